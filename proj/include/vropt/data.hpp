#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vropt {

using Vector = Eigen::VectorXd;

/// Raised for malformed input files (LIBSVM text, vector files, spec files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when vector lengths or indices do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One sparse feature vector. Indices are 0-based and strictly increasing,
/// explicit zeros are dropped on construction.
class SparseRow {
 public:
  SparseRow() = default;
  SparseRow(std::vector<std::uint32_t> indices, std::vector<double> values, std::size_t dim);

  static SparseRow from_dense(const Vector& dense);

  std::span<const std::uint32_t> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }
  std::size_t nnz() const { return indices_.size(); }
  std::size_t dim() const { return dim_; }

  Vector to_dense() const;

 private:
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
  std::size_t dim_ = 0;
};

/// Immutable design matrix (row-major, sparse) plus labels.
class Dataset {
 public:
  Dataset(std::vector<SparseRow> rows, std::vector<double> labels);

  std::size_t n() const { return rows_.size(); }
  std::size_t d() const { return d_; }
  const SparseRow& row(std::size_t i) const { return rows_[i]; }
  std::span<const SparseRow> rows() const { return rows_; }
  std::span<const double> labels() const { return labels_; }
  double label(std::size_t i) const { return labels_[i]; }
  std::size_t total_nnz() const;

  /// Keeps rows [first, first+count) only.
  Dataset head(std::size_t count) const;

  /// 64-bit FNV-1a over dims, indices, value bits and labels. Used as a
  /// cache key for reference solutions.
  std::uint64_t content_hash() const;

 private:
  std::vector<SparseRow> rows_;
  std::vector<double> labels_;
  std::size_t d_ = 0;
};

/// Reads LIBSVM text ("label idx:val ..."), 1-based indices. `dim_override`
/// fixes d (must be >= the largest index seen).
Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim_override = std::nullopt);
Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim_override = std::nullopt);

/// Writes LIBSVM text with 17 significant digits.
void write_libsvm(std::ostream& out, const Dataset& data);

double dot(const SparseRow& row, const Vector& x);
void axpy_sparse(double c, const SparseRow& row, Vector& x);
double row_norm_sq(const SparseRow& row);

/// Seeded source of randomness. Wraps std::mt19937_64 (a 64-bit Mersenne
/// twister whose output sequence is fixed by the standard); all bounded and
/// real-valued draws are derived here so that runs do not depend on the
/// library's distribution implementations.
///
/// Independent streams: `RandomSource::stream(seed, k)` seeds with
/// seed + k * 0x9E3779B97F4A7C15.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static RandomSource stream(std::uint64_t seed, std::uint64_t k) {
    return RandomSource(seed + k * 0x9E3779B97F4A7C15ULL);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal (Box-Muller, no cached second value).
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Uniform index in {0, ..., n-1}. Unbiased (Lemire's multiply-shift with
/// rejection). Throws std::invalid_argument for n == 0.
std::size_t draw_index(RandomSource& rng, std::size_t n);

}  // namespace vropt
