#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vropt/optimizers.hpp"

namespace vropt {

/// Iterate stored lazily: coordinate j holds its value as of iteration
/// last_touch[j]. Between touches a coordinate only sees the l2 decay and a
/// constant average-gradient entry gbar_j, so m skipped steps
///   x_j <- rho x_j - gamma gbar_j,   rho = 1 - gamma lambda
/// collapse to x_j <- rho^m x_j - gamma gbar_j (1 - rho^m) / (1 - rho).
class LazyIterate {
 public:
  LazyIterate(Vector x0, double gamma, double l2);

  std::size_t dim() const { return static_cast<std::size_t>(x_.size()); }
  std::uint64_t iteration() const { return k_; }
  std::uint64_t last_touch(std::size_t j) const { return last_touch_[j]; }
  double gamma() const { return gamma_; }
  double rho() const { return rho_; }

  /// Raw stored value (possibly stale).
  double stored(std::size_t j) const { return x_[static_cast<Eigen::Index>(j)]; }
  double& stored_mut(std::size_t j) { return x_[static_cast<Eigen::Index>(j)]; }

  /// Brings the listed coordinates up to the current iteration.
  void touch(std::span<const std::uint32_t> coords, const Vector& gbar);
  /// Marks the listed coordinates as current after an explicit update.
  void mark_current(std::span<const std::uint32_t> coords, std::uint64_t k);
  void advance() { ++k_; }

  /// All coordinates brought up to date; returns the dense iterate.
  const Vector& materialize(const Vector& gbar);

  /// Value of x_j after m collapsed steps with constant gbar_j.
  double catch_up(double xj, double gbar_j, std::uint64_t m) const;

 private:
  Vector x_;
  std::vector<std::uint64_t> last_touch_;
  std::uint64_t k_ = 0;
  double gamma_;
  double l2_;
  double rho_;
  double log_rho_;
};

/// Just-in-time SAG or SAGA on sparse rows. The step cost is proportional
/// to nnz(a_i); coordinates outside the sampled support are advanced only
/// when they are next read (or on materialize).
class LazySolver {
 public:
  /// `table` must be scalar mode; method must be SAG or SAGA.
  LazySolver(const GlmObjective& obj, Method method, double gamma, const Vector& x0, GradientTable& table);

  void step(std::size_t i);
  const Vector& materialize();
  std::uint64_t touched_coordinates() const { return touched_; }
  const LazyIterate& iterate() const { return lazy_; }

 private:
  const GlmObjective* obj_;
  Method method_;
  GradientTable* table_;
  LazyIterate lazy_;
  std::uint64_t touched_ = 0;
};

/// Reason JIT execution cannot be used for this configuration, or empty.
std::string jit_incompatibility(Method method, const GlmObjective& obj, double gamma, std::size_t batch,
                                bool lipschitz_sampling, bool armijo, bool seen_normalized);

}  // namespace vropt
