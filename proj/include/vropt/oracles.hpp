#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "vropt/optimizers.hpp"

namespace vropt {

/// Central finite-difference gradient of the smooth part f.
Vector fd_grad(const GlmObjective& obj, const Vector& x, double h = 1e-6);

struct EnumStats {
  Vector mean;
  double variance = 0.0;       ///< E||g - E g||^2 (trace of the covariance)
  double second_moment = 0.0;  ///< E||g||^2
  std::size_t count = 0;
};

/// Exact statistics of an estimator over every index i in {0..n-1}, each
/// weighted by probs[i] (uniform when probs is empty). Guarded to n <= 1e5.
EnumStats enum_stats(std::size_t n, const std::function<Vector(std::size_t)>& estimator,
                     std::span<const double> probs = {});
/// Same over every size-b subset of {0..n-1}, all equally likely. Guarded
/// to at most 1e6 subsets.
EnumStats enum_stats_batches(std::size_t n, std::size_t b,
                             const std::function<Vector(IndexSpan)>& estimator);
/// E||X - EX||^2 <= E||X||^2 up to rounding.
bool lemma2_holds(const EnumStats& stats);

struct InequalityCheck {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack() const { return rhs - lhs; }
};

/// E_i ||grad f_i(x) - grad f_i(x*)||^2 <= 2 L_max (f(x) - f(x*)).
InequalityCheck check_lemma1(const GlmObjective& obj, const Vector& x, const Vector& x_star);

/// Exact conditional expectation over i of ||x+ - x*||^2 for the SGD*
/// step x+ = x - gamma (grad f_i(x) - grad f_i(x*)), against
/// (1 - gamma mu) ||x - x*||^2 with mu = l2. Requires gamma <= 1/L_max.
InequalityCheck check_contraction(const GlmObjective& obj, const Vector& x, const Vector& x_star, double gamma);

/// f(x(v)) - D(v), with x(v) recomputed from v. +inf when v leaves the
/// conjugate domain.
double duality_gap(const GlmObjective& obj, const DualState& dual);

struct ReferenceSolution {
  Vector x;
  double f = 0.0;       ///< composite value at x
  double residual = 0.0;
  std::size_t iterations = 0;
  bool cache_hit = false;
};

/// Deterministic full-gradient solver: accelerated proximal gradient with
/// gamma = 1/L and gradient-based restart, finished by Newton steps when
/// l1 = 0 and d is small. Stops when the residual (||grad f|| for smooth
/// problems, ||x - prox(x - grad f / L)|| L for composite ones) is <= tol.
ReferenceSolution solve_reference(const GlmObjective& obj, double tol = 1e-12, std::size_t max_iter = 1000000);

/// Residual used by solve_reference.
double reference_residual(const GlmObjective& obj, const Vector& x, double l_full);

/// Binary matrix file: 4-byte magic "VRX1", uint32 rows, uint64 cols,
/// then rows * cols little-endian float64 values in row-major order.
void write_matrix_file(const std::string& path, const RowMatrix& m);
RowMatrix read_matrix_file(const std::string& path);
void write_vector_file(const std::string& path, const Vector& v);
Vector read_vector_file(const std::string& path);
/// Writes atomically (temp file + rename).
void write_text_file_atomic(const std::string& path, const std::string& text);

/// Cache key: hex of (dataset hash, loss, l2, l1).
std::string reference_cache_key(const GlmObjective& obj);

/// Loads x*, f* from `cache_dir` (if given and present) or solves and
/// stores them there.
ReferenceSolution load_or_solve_reference(const GlmObjective& obj, const std::optional<std::string>& cache_dir,
                                          double tol = 1e-12);

}  // namespace vropt
