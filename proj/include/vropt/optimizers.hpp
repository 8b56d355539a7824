#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vropt/objective.hpp"
#include "vropt/schedules.hpp"

namespace vropt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexSpan = std::span<const std::size_t>;
/// Per-example importance weights 1/(n p_i); empty means uniform (all 1).
using WeightSpan = std::span<const double>;

/// Raised when an iterate stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double gamma) : std::runtime_error(what), gamma_(gamma) {}
  double gamma() const { return gamma_; }

 private:
  double gamma_;
};

enum class TableMode { Dense, Scalar };

/// Per-example gradient memory for SAG/SAGA.
///
/// Entries hold the loss part of each stored gradient, l'(a_i^T xbar_i) a_i,
/// either as a dense n x d matrix or as the n scalars l'(a_i^T xbar_i). The
/// l2 term lambda x is always evaluated exactly at the current iterate, so
/// both modes describe the same method. `mean` is (1/n) sum_j v^j.
class GradientTable {
 public:
  GradientTable(const GlmObjective& obj, TableMode mode);

  TableMode mode() const { return mode_; }
  std::size_t n() const { return seen_.size(); }
  const Vector& mean() const { return mean_; }
  std::size_t seen_count() const { return seen_count_; }
  bool seen(std::size_t i) const { return seen_[i]; }

  /// Scalar l' stored for example i (scalar mode only).
  double scalar(std::size_t i) const { return scalars_.at(i); }
  std::span<const double> scalars() const { return scalars_; }

  /// v^i as a dense vector.
  Vector entry(std::size_t i) const;
  /// Adds scale * v^i into out.
  void add_entry(std::size_t i, double scale, Vector& out) const;
  /// Stores v^i = deriv * a_i and updates the running mean.
  void replace(std::size_t i, double deriv);
  /// (1/n) sum_j v^j recomputed from scratch.
  Vector recompute_mean() const;
  /// Sets every entry at x (costs n gradient evaluations).
  void initialize_at(const Vector& x);

  /// Mean normalized by the number of examples seen so far instead of n.
  Vector seen_normalized_mean() const;

 private:
  const GlmObjective* obj_;
  TableMode mode_;
  RowMatrix dense_;
  std::vector<double> scalars_;
  Vector mean_;
  std::vector<bool> seen_;
  std::size_t seen_count_ = 0;
};

struct MomentumState {
  Vector m;
  double beta = 0.9;

  MomentumState(std::size_t d, double beta);
};

enum class SvrgVariant { FixedLoop, Continuous };

/// Reference point state shared by SVRG (FixedLoop) and the continuous
/// update variant (SARAH-style recursion).
struct SvrgState {
  Vector ref_point;
  Vector ref_grad;
  std::size_t inner_count = 0;
  std::size_t inner_length = 0;
  SvrgVariant variant = SvrgVariant::FixedLoop;
  bool refreshed = false;
  // Continuous variant only: previous iterate and previous estimate.
  Vector prev_x;
  Vector prev_g;
};

/// grad f_i(x*) for every i, stored as scalars l'(a_i^T x*) plus x*.
struct StarTable {
  Vector x_star;
  std::vector<double> scalars;

  static StarTable build(const GlmObjective& obj, const Vector& x_star);
  Vector grad(const GlmObjective& obj, std::size_t i) const;
};

/// SDCA dual variables and the maintained primal image
/// w = (1/(lambda n)) sum_i v_i a_i.
struct DualState {
  std::vector<double> v;
  Vector w;

  explicit DualState(const GlmObjective& obj);
  /// w recomputed from v by its definition.
  Vector recompute_primal(const GlmObjective& obj) const;
};

// Gradient estimators at a frozen state. These are pure: they never touch
// the state, so they can be enumerated over every index (or batch).
Vector sgd_estimate(const GlmObjective& obj, const Vector& x, IndexSpan batch, WeightSpan iw = {});
Vector sgd_star_estimate(const GlmObjective& obj, const StarTable& star, const Vector& x, IndexSpan batch,
                         WeightSpan iw = {});
Vector saga_estimate(const GradientTable& table, const GlmObjective& obj, const Vector& x, IndexSpan batch,
                     WeightSpan iw = {});
/// Direction SAG would step along after refreshing the batch entries.
Vector sag_direction(const GradientTable& table, const GlmObjective& obj, const Vector& x, IndexSpan batch,
                     bool seen_normalized = false);
Vector svrg_estimate(const SvrgState& state, const GlmObjective& obj, const Vector& x, IndexSpan batch,
                     WeightSpan iw = {});

// Steps. Each one updates x in place and applies the prox of l1 when the
// objective has l1 > 0. A non-finite iterate raises DivergenceError.
void gd_step(const GlmObjective& obj, Vector& x, double gamma);
void sgd_step(const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma, MomentumState* momentum = nullptr,
              WeightSpan iw = {});
void sgd_star_step(const GlmObjective& obj, const StarTable& star, Vector& x, IndexSpan batch, double gamma,
                   WeightSpan iw = {});
void sag_step(GradientTable& table, const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma,
              bool seen_normalized = false);
void saga_step(GradientTable& table, const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma,
               WeightSpan iw = {});
void svrg_outer_refresh(SvrgState& state, const GlmObjective& obj, const Vector& x);
void svrg_inner_step(SvrgState& state, const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma,
                     WeightSpan iw = {});

/// Exact maximization of the dual objective along coordinate i. Returns the
/// increase of the dual objective (always >= 0; a computed step that would
/// not increase it is discarded).
double sdca_step(DualState& dual, const GlmObjective& obj, std::size_t i);

/// D(v) = (1/n) sum_i -l_i*(-v_i) - (lambda/2) ||w(v)||^2, using w
/// recomputed from v.
double dual_objective(const GlmObjective& obj, const DualState& dual);

/// Applies prox (if l1 > 0) and the divergence guard.
void finish_step(const GlmObjective& obj, Vector& x, double gamma);

}  // namespace vropt
