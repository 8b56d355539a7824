#pragma once

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vropt/data.hpp"

namespace vropt {

enum class LossKind { HalfSquared, Logistic, Hinge };

std::string to_string(LossKind loss);
LossKind loss_from_string(const std::string& name);

/// Raised when an operation needs a differentiable loss and gets Hinge.
class NonSmoothLossError : public std::logic_error {
 public:
  NonSmoothLossError() : std::logic_error("non-smooth loss") {}
};

/// Raised for inconsistent configurations (bad stepsize, incompatible
/// method/loss, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

double loss_value(LossKind loss, double margin, double label);
double loss_deriv(LossKind loss, double margin, double label);
/// Upper bound M on the second derivative (1 for HalfSquared, 1/4 for
/// Logistic). Throws NonSmoothLossError for Hinge.
double loss_curvature_bound(LossKind loss);
/// Convex conjugate l*(u) = sup_a { a u - l(a) }; +inf outside the domain.
double conjugate_value(LossKind loss, double u, double label);
bool is_smooth(LossKind loss);

/// Smoothness constants of a GlmObjective. All per-example constants include
/// the l2 term: L_i = M ||a_i||^2 + l2.
struct SmoothnessInfo {
  std::vector<double> per_example;
  double l_max = 0.0;
  double l_mean = 0.0;
  double l_full = 0.0;
  /// True when l_full came from a converged power iteration; false when it
  /// is the l_mean fallback bound.
  bool l_full_exact = false;
  double mu_lower = 0.0;

  double kappa() const { return l_full / mu_lower; }
  double kappa_max() const { return l_max / mu_lower; }
  double kappa_mean() const { return l_mean / mu_lower; }
};

/// f(x) = (1/n) sum_i loss(a_i^T x, b_i) + (l2/2)||x||^2, plus the composite
/// term l1 ||x||_1 that is only ever touched through `prox`.
///
/// Labels are coerced here, not at parse time: for Logistic and Hinge a label
/// set {0,1} or {1,2} (or any two distinct values) maps to {-1,+1}.
class GlmObjective {
 public:
  GlmObjective(std::shared_ptr<const Dataset> data, LossKind loss, double l2, double l1 = 0.0);

  const Dataset& data() const { return *data_; }
  std::shared_ptr<const Dataset> data_ptr() const { return data_; }
  LossKind loss() const { return loss_; }
  double l2() const { return l2_; }
  double l1() const { return l1_; }
  std::size_t n() const { return data_->n(); }
  std::size_t d() const { return data_->d(); }
  double label(std::size_t i) const { return labels_[i]; }

  double margin(std::size_t i, const Vector& x) const;
  /// l'(a_i^T x): the scalar that determines grad_i up to the l2 term.
  double loss_deriv_at(std::size_t i, const Vector& x) const;

  double value_i(std::size_t i, const Vector& x) const;
  /// grad f_i(x) = l'(a_i^T x) a_i + l2 x.
  Vector grad_i(std::size_t i, const Vector& x) const;
  /// Adds scale * grad of the loss part only (no l2 term) into out.
  void add_loss_grad_i(std::size_t i, const Vector& x, double scale, Vector& out) const;

  /// Smooth part f(x).
  double full_value(const Vector& x) const;
  /// f(x) + l1 ||x||_1.
  double composite_value(const Vector& x) const;
  Vector full_grad(const Vector& x) const;

  /// Soft threshold with threshold gamma * l1; identity when l1 == 0.
  Vector prox(double gamma, const Vector& z) const;

  SmoothnessInfo smoothness() const;

 private:
  void check_index(std::size_t i) const;
  void require_smooth() const;

  std::shared_ptr<const Dataset> data_;
  LossKind loss_;
  double l2_;
  double l1_;
  std::vector<double> labels_;
};

/// Coordinate-wise soft threshold sign(z) max(|z| - threshold, 0).
Vector soft_threshold(const Vector& z, double threshold);

struct PowerIterationResult {
  double eigenvalue = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Largest eigenvalue of (1/n) sum_i a_i a_i^T by power iteration, applied
/// matrix-free through the sparse rows.
PowerIterationResult top_eigenvalue_gram(const Dataset& data, double tol = 1e-10, int max_iter = 10000);

}  // namespace vropt
