#include "vropt/sparse_jit.hpp"

#include <cmath>

namespace vropt {

LazyIterate::LazyIterate(Vector x0, double gamma, double l2)
    : x_(std::move(x0)), last_touch_(static_cast<std::size_t>(x_.size()), 0), gamma_(gamma), l2_(l2) {
  if (!(gamma > 0.0)) throw ConfigError("JIT: stepsize must be > 0");
  rho_ = 1.0 - gamma * l2;
  if (!(rho_ > 0.0)) {
    throw ConfigError("JIT: gamma * l2 >= 1 makes the lazy decay factor non-positive; use --jit off");
  }
  log_rho_ = std::log1p(-gamma * l2);
}

double LazyIterate::catch_up(double xj, double gbar_j, std::uint64_t m) const {
  if (m == 0) return xj;
  const double md = static_cast<double>(m);
  if (l2_ == 0.0) return xj - gamma_ * md * gbar_j;
  const double rho_m = std::exp(md * log_rho_);
  // (1 - rho^m) / (1 - rho) with 1 - rho = gamma l2
  const double geometric = -std::expm1(md * log_rho_) / (gamma_ * l2_);
  return rho_m * xj - gamma_ * gbar_j * geometric;
}

void LazyIterate::touch(std::span<const std::uint32_t> coords, const Vector& gbar) {
  for (std::uint32_t j : coords) {
    const std::uint64_t m = k_ - last_touch_[j];
    if (m == 0) continue;
    x_[j] = catch_up(x_[j], gbar[j], m);
    last_touch_[j] = k_;
  }
}

void LazyIterate::mark_current(std::span<const std::uint32_t> coords, std::uint64_t k) {
  for (std::uint32_t j : coords) last_touch_[j] = k;
}

const Vector& LazyIterate::materialize(const Vector& gbar) {
  for (Eigen::Index j = 0; j < x_.size(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const std::uint64_t m = k_ - last_touch_[uj];
    if (m == 0) continue;
    x_[j] = catch_up(x_[j], gbar[j], m);
    last_touch_[uj] = k_;
  }
  return x_;
}

std::string jit_incompatibility(Method method, const GlmObjective& obj, double gamma, std::size_t batch,
                                bool lipschitz_sampling, bool armijo, bool seen_normalized) {
  if (method != Method::SAG && method != Method::SAGA) return "JIT applies to sag and saga only";
  if (obj.l1() > 0.0) return "JIT does not support l1 (soft threshold breaks the lazy recurrence)";
  if (batch != 1) return "JIT requires batch size 1";
  if (lipschitz_sampling) return "JIT requires uniform sampling";
  if (armijo) return "JIT requires a constant stepsize";
  if (seen_normalized) return "JIT does not support seen-count normalization";
  if (!(1.0 - gamma * obj.l2() > 0.0)) return "JIT requires gamma * l2 < 1";
  return {};
}

LazySolver::LazySolver(const GlmObjective& obj, Method method, double gamma, const Vector& x0, GradientTable& table)
    : obj_(&obj), method_(method), table_(&table), lazy_(x0, gamma, obj.l2()) {
  if (method != Method::SAG && method != Method::SAGA) throw ConfigError("JIT applies to sag and saga only");
  if (table.mode() != TableMode::Scalar) throw ConfigError("JIT needs a scalar gradient table");
  if (obj.l1() > 0.0) throw ConfigError("JIT does not support l1");
}

void LazySolver::step(std::size_t i) {
  const auto& row = obj_->data().row(i);
  const auto idx = row.indices();
  const auto val = row.values();
  const double gamma = lazy_.gamma();
  const double l2 = obj_->l2();

  lazy_.touch(idx, table_->mean());
  double margin = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) margin += val[k] * lazy_.stored(idx[k]);
  const double s = loss_deriv(obj_->loss(), margin, obj_->label(i));

  if (method_ == Method::SAGA) {
    const double coef = s - table_->scalar(i);
    const Vector& gbar = table_->mean();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double& xj = lazy_.stored_mut(idx[k]);
      double g = gbar[idx[k]] + l2 * xj;
      g += coef * val[k];
      xj -= gamma * g;
    }
    table_->replace(i, s);
  } else {
    table_->replace(i, s);
    const Vector& gbar = table_->mean();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double& xj = lazy_.stored_mut(idx[k]);
      xj -= gamma * (gbar[idx[k]] + l2 * xj);
    }
  }
  touched_ += idx.size();
  lazy_.advance();
  lazy_.mark_current(idx, lazy_.iteration());
  for (std::uint32_t j : idx) {
    if (!std::isfinite(lazy_.stored(j))) {
      throw DivergenceError("iterate became non-finite with stepsize gamma = " + std::to_string(gamma), gamma);
    }
  }
}

const Vector& LazySolver::materialize() { return lazy_.materialize(table_->mean()); }

}  // namespace vropt
