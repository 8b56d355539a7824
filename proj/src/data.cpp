#include "vropt/data.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace vropt {

SparseRow::SparseRow(std::vector<std::uint32_t> indices, std::vector<double> values, std::size_t dim)
    : dim_(dim) {
  if (indices.size() != values.size()) {
    throw DimensionError("SparseRow: indices and values differ in length");
  }
  indices_.reserve(indices.size());
  values_.reserve(values.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dim) {
      throw DimensionError("SparseRow: index " + std::to_string(indices[k]) + " >= dim " +
                           std::to_string(dim));
    }
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw DimensionError("SparseRow: indices must be strictly increasing");
    }
    if (values[k] != 0.0) {
      indices_.push_back(indices[k]);
      values_.push_back(values[k]);
    }
  }
}

SparseRow SparseRow::from_dense(const Vector& dense) {
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (Eigen::Index j = 0; j < dense.size(); ++j) {
    if (dense[j] != 0.0) {
      idx.push_back(static_cast<std::uint32_t>(j));
      val.push_back(dense[j]);
    }
  }
  return SparseRow(std::move(idx), std::move(val), static_cast<std::size_t>(dense.size()));
}

Vector SparseRow::to_dense() const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] = values_[k];
  return out;
}

Dataset::Dataset(std::vector<SparseRow> rows, std::vector<double> labels)
    : rows_(std::move(rows)), labels_(std::move(labels)) {
  if (rows_.empty()) throw ParseError("empty dataset");
  if (rows_.size() != labels_.size()) {
    throw DimensionError("Dataset: " + std::to_string(rows_.size()) + " rows but " +
                         std::to_string(labels_.size()) + " labels");
  }
  d_ = rows_.front().dim();
  if (d_ == 0) throw DimensionError("Dataset: feature dimension must be >= 1");
  for (const auto& r : rows_) {
    if (r.dim() != d_) throw DimensionError("Dataset: rows disagree on dimension");
  }
}

std::size_t Dataset::total_nnz() const {
  std::size_t total = 0;
  for (const auto& r : rows_) total += r.nnz();
  return total;
}

Dataset Dataset::head(std::size_t count) const {
  count = std::min(count, n());
  return Dataset(std::vector<SparseRow>(rows_.begin(), rows_.begin() + static_cast<std::ptrdiff_t>(count)),
                 std::vector<double>(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(count)));
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int b = 0; b < 8; ++b) {
    h ^= (word >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

double parse_real(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": malformed number '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, n());
  fnv_mix(h, d());
  for (std::size_t i = 0; i < n(); ++i) {
    fnv_mix(h, std::bit_cast<std::uint64_t>(labels_[i]));
    const auto& r = rows_[i];
    fnv_mix(h, r.nnz());
    for (std::size_t k = 0; k < r.nnz(); ++k) {
      fnv_mix(h, r.indices()[k]);
      fnv_mix(h, std::bit_cast<std::uint64_t>(r.values()[k]));
    }
  }
  return h;
}

Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim_override) {
  std::vector<std::vector<std::uint32_t>> all_idx;
  std::vector<std::vector<double>> all_val;
  std::vector<double> labels;
  std::size_t max_index = 0;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    std::istringstream tokens(line);
    std::string tok;
    tokens >> tok;
    labels.push_back(parse_real(tok, line_no));

    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    long long prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed token '" + tok + "'");
      }
      long long index = 0;
      const std::string_view idx_part(tok.data(), colon);
      auto [ptr, ec] = std::from_chars(idx_part.data(), idx_part.data() + idx_part.size(), index);
      if (ec != std::errc() || ptr != idx_part.data() + idx_part.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed index in '" + tok + "'");
      }
      if (index < 1) {
        throw ParseError("line " + std::to_string(line_no) + ": index < 1 in '" + tok + "'");
      }
      if (index <= prev) {
        throw ParseError("line " + std::to_string(line_no) + ": indices not strictly increasing");
      }
      if (index > 0xffffffffLL) {
        throw ParseError("line " + std::to_string(line_no) + ": index too large");
      }
      prev = index;
      idx.push_back(static_cast<std::uint32_t>(index - 1));
      val.push_back(parse_real(std::string_view(tok).substr(colon + 1), line_no));
      max_index = std::max(max_index, static_cast<std::size_t>(index));
    }
    all_idx.push_back(std::move(idx));
    all_val.push_back(std::move(val));
  }
  if (labels.empty()) throw ParseError("empty dataset");

  std::size_t d = max_index;
  if (dim_override) {
    if (*dim_override < max_index) {
      throw DimensionError("--dim " + std::to_string(*dim_override) + " is smaller than the largest index " +
                           std::to_string(max_index));
    }
    d = *dim_override;
  }
  if (d == 0) d = 1;

  std::vector<SparseRow> rows;
  rows.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rows.emplace_back(std::move(all_idx[i]), std::move(all_val[i]), d);
  }
  return Dataset(std::move(rows), std::move(labels));
}

Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim_override) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open dataset file: " + path);
  return parse_libsvm(in, dim_override);
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  const auto old_prec = out.precision(17);
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << data.label(i);
    const auto& r = data.row(i);
    for (std::size_t k = 0; k < r.nnz(); ++k) {
      out << ' ' << (r.indices()[k] + 1) << ':' << r.values()[k];
    }
    out << '\n';
  }
  out.precision(old_prec);
}

double dot(const SparseRow& row, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != row.dim()) {
    throw DimensionError("dot: x has length " + std::to_string(x.size()) + ", row dim is " +
                         std::to_string(row.dim()));
  }
  double s = 0.0;
  const auto idx = row.indices();
  const auto val = row.values();
  for (std::size_t k = 0; k < idx.size(); ++k) s += val[k] * x[idx[k]];
  return s;
}

void axpy_sparse(double c, const SparseRow& row, Vector& x) {
  if (static_cast<std::size_t>(x.size()) != row.dim()) {
    throw DimensionError("axpy_sparse: x has length " + std::to_string(x.size()) + ", row dim is " +
                         std::to_string(row.dim()));
  }
  const auto idx = row.indices();
  const auto val = row.values();
  for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] += c * val[k];
}

double row_norm_sq(const SparseRow& row) {
  double s = 0.0;
  for (double v : row.values()) s += v * v;
  return s;
}

double RandomSource::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t draw_index(RandomSource& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("draw_index: n must be >= 1");
  const std::uint64_t range = n;
  std::uint64_t x = rng.next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      x = rng.next_u64();
      m = static_cast<unsigned __int128>(x) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

}  // namespace vropt
