#include "vropt/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vropt {

namespace {

double weight(WeightSpan iw, std::size_t i) { return iw.empty() ? 1.0 : iw[i]; }

void require_batch(IndexSpan batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
}

}  // namespace

void finish_step(const GlmObjective& obj, Vector& x, double gamma) {
  if (obj.l1() > 0.0) x = obj.prox(gamma, x);
  if (!x.allFinite()) {
    throw DivergenceError("iterate became non-finite with stepsize gamma = " + std::to_string(gamma), gamma);
  }
}

// ---------------------------------------------------------------------------
// GradientTable

GradientTable::GradientTable(const GlmObjective& obj, TableMode mode)
    : obj_(&obj), mode_(mode), mean_(Vector::Zero(static_cast<Eigen::Index>(obj.d()))), seen_(obj.n(), false) {
  if (mode == TableMode::Dense) {
    dense_ = RowMatrix::Zero(static_cast<Eigen::Index>(obj.n()), static_cast<Eigen::Index>(obj.d()));
  } else {
    scalars_.assign(obj.n(), 0.0);
  }
}

Vector GradientTable::entry(std::size_t i) const {
  if (mode_ == TableMode::Dense) return dense_.row(static_cast<Eigen::Index>(i)).transpose();
  Vector out = Vector::Zero(mean_.size());
  axpy_sparse(scalars_[i], obj_->data().row(i), out);
  return out;
}

void GradientTable::add_entry(std::size_t i, double scale, Vector& out) const {
  if (mode_ == TableMode::Dense) {
    out += scale * dense_.row(static_cast<Eigen::Index>(i)).transpose();
  } else {
    axpy_sparse(scale * scalars_[i], obj_->data().row(i), out);
  }
}

void GradientTable::replace(std::size_t i, double deriv) {
  const double inv_n = 1.0 / static_cast<double>(n());
  const auto& row = obj_->data().row(i);
  if (mode_ == TableMode::Dense) {
    auto stored = dense_.row(static_cast<Eigen::Index>(i));
    mean_ -= inv_n * stored.transpose();
    stored.setZero();
    const auto idx = row.indices();
    const auto val = row.values();
    for (std::size_t k = 0; k < idx.size(); ++k) stored[idx[k]] = deriv * val[k];
    mean_ += inv_n * stored.transpose();
  } else {
    axpy_sparse((deriv - scalars_[i]) * inv_n, row, mean_);
    scalars_[i] = deriv;
  }
  if (!seen_[i]) {
    seen_[i] = true;
    ++seen_count_;
  }
}

Vector GradientTable::recompute_mean() const {
  Vector sum = Vector::Zero(mean_.size());
  for (std::size_t i = 0; i < n(); ++i) add_entry(i, 1.0, sum);
  return sum / static_cast<double>(n());
}

void GradientTable::initialize_at(const Vector& x) {
  for (std::size_t i = 0; i < n(); ++i) replace(i, obj_->loss_deriv_at(i, x));
}

Vector GradientTable::seen_normalized_mean() const {
  if (seen_count_ == 0) return Vector::Zero(mean_.size());
  return mean_ * (static_cast<double>(n()) / static_cast<double>(seen_count_));
}

MomentumState::MomentumState(std::size_t d, double beta_) : m(Vector::Zero(static_cast<Eigen::Index>(d))), beta(beta_) {
  if (!(beta_ >= 0.0 && beta_ < 1.0)) throw ConfigError("momentum beta must lie in [0, 1)");
}

StarTable StarTable::build(const GlmObjective& obj, const Vector& x_star) {
  if (static_cast<std::size_t>(x_star.size()) != obj.d()) throw DimensionError("x* has the wrong dimension");
  StarTable t;
  t.x_star = x_star;
  t.scalars.resize(obj.n());
  for (std::size_t i = 0; i < obj.n(); ++i) t.scalars[i] = obj.loss_deriv_at(i, x_star);
  return t;
}

Vector StarTable::grad(const GlmObjective& obj, std::size_t i) const {
  Vector g = obj.l2() * x_star;
  axpy_sparse(scalars.at(i), obj.data().row(i), g);
  return g;
}

DualState::DualState(const GlmObjective& obj) : v(obj.n(), 0.0), w(Vector::Zero(static_cast<Eigen::Index>(obj.d()))) {
  if (!(obj.l2() > 0.0)) throw ConfigError("SDCA requires l2 > 0");
}

Vector DualState::recompute_primal(const GlmObjective& obj) const {
  Vector out = Vector::Zero(w.size());
  for (std::size_t i = 0; i < v.size(); ++i) axpy_sparse(v[i], obj.data().row(i), out);
  return out / (obj.l2() * static_cast<double>(obj.n()));
}

// ---------------------------------------------------------------------------
// Estimators

Vector sgd_estimate(const GlmObjective& obj, const Vector& x, IndexSpan batch, WeightSpan iw) {
  require_batch(batch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Vector g = Vector::Zero(x.size());
  double reg_weight = 0.0;
  for (std::size_t i : batch) {
    const double w = weight(iw, i) * inv_b;
    obj.add_loss_grad_i(i, x, w, g);
    reg_weight += w;
  }
  g += reg_weight * obj.l2() * x;
  return g;
}

Vector sgd_star_estimate(const GlmObjective& obj, const StarTable& star, const Vector& x, IndexSpan batch,
                         WeightSpan iw) {
  require_batch(batch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Vector g = Vector::Zero(x.size());
  double reg_weight = 0.0;
  for (std::size_t i : batch) {
    const double w = weight(iw, i) * inv_b;
    axpy_sparse(w * (obj.loss_deriv_at(i, x) - star.scalars.at(i)), obj.data().row(i), g);
    reg_weight += w;
  }
  g += reg_weight * obj.l2() * (x - star.x_star);
  return g;
}

Vector saga_estimate(const GradientTable& table, const GlmObjective& obj, const Vector& x, IndexSpan batch,
                     WeightSpan iw) {
  require_batch(batch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Vector g = table.mean() + obj.l2() * x;
  for (std::size_t i : batch) {
    const double w = weight(iw, i) * inv_b;
    const double s = obj.loss_deriv_at(i, x);
    if (table.mode() == TableMode::Scalar) {
      axpy_sparse(w * (s - table.scalar(i)), obj.data().row(i), g);
    } else {
      axpy_sparse(w * s, obj.data().row(i), g);
      table.add_entry(i, -w, g);
    }
  }
  return g;
}

Vector sag_direction(const GradientTable& table, const GlmObjective& obj, const Vector& x, IndexSpan batch,
                     bool seen_normalized) {
  require_batch(batch);
  const double n = static_cast<double>(table.n());
  Vector sum = table.mean() * n;
  std::size_t seen = table.seen_count();
  std::vector<std::size_t> done;
  for (std::size_t i : batch) {
    if (std::find(done.begin(), done.end(), i) != done.end()) continue;
    done.push_back(i);
    axpy_sparse(obj.loss_deriv_at(i, x), obj.data().row(i), sum);
    table.add_entry(i, -1.0, sum);
    if (!table.seen(i)) ++seen;
  }
  const double denom = seen_normalized ? static_cast<double>(std::max<std::size_t>(seen, 1)) : n;
  return sum / denom + obj.l2() * x;
}

Vector svrg_estimate(const SvrgState& state, const GlmObjective& obj, const Vector& x, IndexSpan batch,
                     WeightSpan iw) {
  require_batch(batch);
  if (!state.refreshed) throw std::logic_error("SVRG state used before svrg_outer_refresh");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const bool continuous = state.variant == SvrgVariant::Continuous;
  const Vector& anchor = continuous ? state.prev_x : state.ref_point;
  Vector g = continuous ? state.prev_g : state.ref_grad;
  double reg_weight = 0.0;
  for (std::size_t i : batch) {
    const double w = continuous ? inv_b : weight(iw, i) * inv_b;
    axpy_sparse(w * (obj.loss_deriv_at(i, x) - obj.loss_deriv_at(i, anchor)), obj.data().row(i), g);
    reg_weight += w;
  }
  g += reg_weight * obj.l2() * (x - anchor);
  return g;
}

// ---------------------------------------------------------------------------
// Steps

void gd_step(const GlmObjective& obj, Vector& x, double gamma) {
  x -= gamma * obj.full_grad(x);
  finish_step(obj, x, gamma);
}

void sgd_step(const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma, MomentumState* momentum,
              WeightSpan iw) {
  const Vector g = sgd_estimate(obj, x, batch, iw);
  if (momentum) {
    momentum->m = momentum->beta * momentum->m + g;
    x -= gamma * momentum->m;
  } else {
    x -= gamma * g;
  }
  finish_step(obj, x, gamma);
}

void sgd_star_step(const GlmObjective& obj, const StarTable& star, Vector& x, IndexSpan batch, double gamma,
                   WeightSpan iw) {
  if (star.scalars.size() != obj.n()) throw std::logic_error("SGD* needs a star table built from x*");
  x -= gamma * sgd_star_estimate(obj, star, x, batch, iw);
  finish_step(obj, x, gamma);
}

void sag_step(GradientTable& table, const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma,
              bool seen_normalized) {
  require_batch(batch);
  // Refresh the table first; the step then uses the refreshed average.
  std::vector<double> derivs;
  derivs.reserve(batch.size());
  for (std::size_t i : batch) derivs.push_back(obj.loss_deriv_at(i, x));
  for (std::size_t k = 0; k < batch.size(); ++k) table.replace(batch[k], derivs[k]);
  const Vector gbar = seen_normalized ? table.seen_normalized_mean() : table.mean();
  x -= gamma * (gbar + obj.l2() * x);
  finish_step(obj, x, gamma);
}

void saga_step(GradientTable& table, const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma,
               WeightSpan iw) {
  require_batch(batch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> derivs;
  derivs.reserve(batch.size());
  // g = (1/b) sum w_i (grad_i(x) - v^i_old) + gbar_old + l2 x
  Vector g = table.mean() + obj.l2() * x;
  for (std::size_t i : batch) {
    const double w = weight(iw, i) * inv_b;
    const double s = obj.loss_deriv_at(i, x);
    derivs.push_back(s);
    if (table.mode() == TableMode::Scalar) {
      axpy_sparse(w * (s - table.scalar(i)), obj.data().row(i), g);
    } else {
      axpy_sparse(w * s, obj.data().row(i), g);
      table.add_entry(i, -w, g);
    }
  }
  x -= gamma * g;
  for (std::size_t k = 0; k < batch.size(); ++k) table.replace(batch[k], derivs[k]);
  finish_step(obj, x, gamma);
}

void svrg_outer_refresh(SvrgState& state, const GlmObjective& obj, const Vector& x) {
  state.ref_point = x;
  state.ref_grad = obj.full_grad(x);
  state.inner_count = 0;
  state.refreshed = true;
  state.prev_x = x;
  state.prev_g = state.ref_grad;
}

void svrg_inner_step(SvrgState& state, const GlmObjective& obj, Vector& x, IndexSpan batch, double gamma,
                     WeightSpan iw) {
  const Vector g = svrg_estimate(state, obj, x, batch, iw);
  if (state.variant == SvrgVariant::Continuous) {
    state.prev_x = x;
    state.prev_g = g;
  }
  x -= gamma * g;
  ++state.inner_count;
  finish_step(obj, x, gamma);
}

// ---------------------------------------------------------------------------
// SDCA

namespace {

// Coordinate objective, up to the constant terms, as a function of the dual
// step delta: -l*(-(v + delta)) - delta m - delta^2 c / 2.
double coordinate_objective(LossKind loss, double label, double v, double delta, double m, double c) {
  const double conj = conjugate_value(loss, -(v + delta), label);
  if (!std::isfinite(conj)) return -kInfinity;
  return -conj - delta * m - 0.5 * delta * delta * c;
}

// Maximizes H(beta) - bm (beta - beta0) - c (beta - beta0)^2 / 2 over (0,1),
// H the binary entropy, by safeguarded Newton on the derivative.
double logistic_coordinate_max(double beta0, double bm, double c) {
  auto deriv = [&](double beta) { return std::log1p(-beta) - std::log(beta) - bm - (beta - beta0) * c; };
  double lo = 0.0;
  double hi = 1.0;
  double beta = 1.0 / (1.0 + std::exp(bm));
  if (!(beta > 0.0 && beta < 1.0)) beta = 0.5;
  if (beta0 > 0.0 && beta0 < 1.0) beta = beta0;
  for (int it = 0; it < 100; ++it) {
    const double g = deriv(beta);
    if (std::abs(g) <= 1e-12) return beta;
    if (g > 0.0) lo = beta; else hi = beta;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(hi, 1e-300)) return beta;
    const double curvature = -1.0 / (beta * (1.0 - beta)) - c;
    double next = beta - g / curvature;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == beta) return beta;
    beta = next;
  }
  throw std::runtime_error("SDCA logistic line search did not converge in 100 iterations");
}

}  // namespace

double sdca_step(DualState& dual, const GlmObjective& obj, std::size_t i) {
  if (i >= obj.n()) throw std::out_of_range("sdca_step: index out of range");
  const auto& row = obj.data().row(i);
  const double b = obj.label(i);
  const double q = row_norm_sq(row);
  const double m = dot(row, dual.w);
  const double n = static_cast<double>(obj.n());
  const double c = q / (obj.l2() * n);
  const double v = dual.v[i];

  double delta = 0.0;
  switch (obj.loss()) {
    case LossKind::HalfSquared:
      delta = (b - m - v) / (1.0 + c);
      break;
    case LossKind::Hinge: {
      const double beta0 = b * v;
      double beta = beta0;
      if (c > 0.0) {
        beta = std::clamp(beta0 + (1.0 - b * m) / c, 0.0, 1.0);
      } else if (1.0 - b * m > 0.0) {
        beta = 1.0;
      } else if (1.0 - b * m < 0.0) {
        beta = 0.0;
      }
      delta = b * beta - v;
      break;
    }
    case LossKind::Logistic: {
      const double beta = logistic_coordinate_max(b * v, b * m, c);
      delta = b * beta - v;
      break;
    }
  }

  const double before = coordinate_objective(obj.loss(), b, v, 0.0, m, c);
  const double after = coordinate_objective(obj.loss(), b, v, delta, m, c);
  if (!(after > before) || delta == 0.0) return 0.0;
  dual.v[i] = v + delta;
  axpy_sparse(delta / (obj.l2() * n), row, dual.w);
  return (after - before) / n;
}

double dual_objective(const GlmObjective& obj, const DualState& dual) {
  double s = 0.0;
  for (std::size_t i = 0; i < obj.n(); ++i) {
    const double conj = conjugate_value(obj.loss(), -dual.v[i], obj.label(i));
    if (!std::isfinite(conj)) return -kInfinity;
    s -= conj;
  }
  const Vector w = dual.recompute_primal(obj);
  return s / static_cast<double>(obj.n()) - 0.5 * obj.l2() * w.squaredNorm();
}

}  // namespace vropt
