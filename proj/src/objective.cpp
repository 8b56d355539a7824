#include "vropt/objective.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vropt {

std::string to_string(LossKind loss) {
  switch (loss) {
    case LossKind::HalfSquared: return "half_squared";
    case LossKind::Logistic: return "logistic";
    case LossKind::Hinge: return "hinge";
  }
  return "unknown";
}

LossKind loss_from_string(const std::string& name) {
  if (name == "half_squared") return LossKind::HalfSquared;
  if (name == "logistic") return LossKind::Logistic;
  if (name == "hinge") return LossKind::Hinge;
  throw ConfigError("unknown loss '" + name + "' (valid: half_squared, logistic, hinge)");
}

bool is_smooth(LossKind loss) { return loss != LossKind::Hinge; }

namespace {

void check_margin(double margin) {
  if (!std::isfinite(margin)) throw std::domain_error("loss evaluated at a non-finite margin");
}

// x log x with the continuous extension 0 log 0 = 0.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double loss_value(LossKind loss, double margin, double label) {
  check_margin(margin);
  switch (loss) {
    case LossKind::HalfSquared: {
      const double r = margin - label;
      return 0.5 * r * r;
    }
    case LossKind::Logistic: {
      const double t = label * margin;
      return std::log1p(std::exp(-std::abs(t))) + std::max(0.0, -t);
    }
    case LossKind::Hinge: return std::max(0.0, 1.0 - label * margin);
  }
  return 0.0;
}

double loss_deriv(LossKind loss, double margin, double label) {
  check_margin(margin);
  switch (loss) {
    case LossKind::HalfSquared: return margin - label;
    case LossKind::Logistic: {
      const double t = label * margin;
      if (t > 0.0) {
        const double e = std::exp(-t);
        return -label * e / (1.0 + e);
      }
      return -label / (1.0 + std::exp(t));
    }
    case LossKind::Hinge: throw NonSmoothLossError();
  }
  return 0.0;
}

double loss_curvature_bound(LossKind loss) {
  switch (loss) {
    case LossKind::HalfSquared: return 1.0;
    case LossKind::Logistic: return 0.25;
    case LossKind::Hinge: throw NonSmoothLossError();
  }
  return 0.0;
}

double conjugate_value(LossKind loss, double u, double label) {
  switch (loss) {
    case LossKind::HalfSquared: return 0.5 * u * u + label * u;
    case LossKind::Logistic: {
      // With s = b u: l*(u) = (-s) log(-s) + (1 + s) log(1 + s) on [-1, 0].
      const double s = label * u;
      if (!(s >= -1.0 && s <= 0.0)) return kInfinity;
      return xlogx(-s) + xlogx(1.0 + s);
    }
    case LossKind::Hinge: {
      const double s = label * u;
      if (!(s >= -1.0 && s <= 0.0)) return kInfinity;
      return s;
    }
  }
  return kInfinity;
}

Vector soft_threshold(const Vector& z, double threshold) {
  Vector out(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double a = std::abs(z[j]) - threshold;
    out[j] = a > 0.0 ? std::copysign(a, z[j]) : 0.0;
  }
  return out;
}

GlmObjective::GlmObjective(std::shared_ptr<const Dataset> data, LossKind loss, double l2, double l1)
    : data_(std::move(data)), loss_(loss), l2_(l2), l1_(l1) {
  if (!data_) throw ConfigError("GlmObjective: null dataset");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be finite and >= 0");
  if (!(l1 >= 0.0) || !std::isfinite(l1)) throw ConfigError("l1 must be finite and >= 0");
  if (loss == LossKind::Hinge && !(l2 > 0.0)) {
    throw ConfigError("hinge loss requires l2 > 0 (it is only solved through the dual)");
  }
  const auto raw = data_->labels();
  labels_.assign(raw.begin(), raw.end());
  if (loss != LossKind::HalfSquared) {
    const std::set<double> distinct(labels_.begin(), labels_.end());
    const bool already_signed =
        std::all_of(distinct.begin(), distinct.end(), [](double v) { return v == 1.0 || v == -1.0; });
    if (!already_signed) {
      if (distinct.size() != 2) {
        throw ConfigError("classification loss needs two label values, found " +
                          std::to_string(distinct.size()));
      }
      const double lo = *distinct.begin();
      for (double& b : labels_) b = (b == lo) ? -1.0 : 1.0;
    }
  }
}

void GlmObjective::check_index(std::size_t i) const {
  if (i >= n()) {
    throw std::out_of_range("example index " + std::to_string(i) + " out of range (n = " +
                            std::to_string(n()) + ")");
  }
}

void GlmObjective::require_smooth() const {
  if (!is_smooth(loss_)) throw NonSmoothLossError();
}

double GlmObjective::margin(std::size_t i, const Vector& x) const {
  check_index(i);
  return dot(data_->row(i), x);
}

double GlmObjective::loss_deriv_at(std::size_t i, const Vector& x) const {
  require_smooth();
  return loss_deriv(loss_, margin(i, x), labels_[i]);
}

double GlmObjective::value_i(std::size_t i, const Vector& x) const {
  return loss_value(loss_, margin(i, x), labels_[i]) + 0.5 * l2_ * x.squaredNorm();
}

Vector GlmObjective::grad_i(std::size_t i, const Vector& x) const {
  const double s = loss_deriv_at(i, x);
  Vector g = l2_ * x;
  axpy_sparse(s, data_->row(i), g);
  return g;
}

void GlmObjective::add_loss_grad_i(std::size_t i, const Vector& x, double scale, Vector& out) const {
  axpy_sparse(scale * loss_deriv_at(i, x), data_->row(i), out);
}

double GlmObjective::full_value(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != d()) throw DimensionError("full_value: wrong length");
  double s = 0.0;
  for (std::size_t i = 0; i < n(); ++i) s += loss_value(loss_, dot(data_->row(i), x), labels_[i]);
  return s / static_cast<double>(n()) + 0.5 * l2_ * x.squaredNorm();
}

double GlmObjective::composite_value(const Vector& x) const {
  return full_value(x) + l1_ * x.lpNorm<1>();
}

Vector GlmObjective::full_grad(const Vector& x) const {
  require_smooth();
  if (static_cast<std::size_t>(x.size()) != d()) throw DimensionError("full_grad: wrong length");
  Vector g = Vector::Zero(x.size());
  for (std::size_t i = 0; i < n(); ++i) {
    const auto& row = data_->row(i);
    axpy_sparse(loss_deriv(loss_, dot(row, x), labels_[i]), row, g);
  }
  g /= static_cast<double>(n());
  g += l2_ * x;
  return g;
}

Vector GlmObjective::prox(double gamma, const Vector& z) const {
  if (!(gamma > 0.0)) throw ConfigError("prox: gamma must be > 0");
  if (l1_ == 0.0) return z;
  return soft_threshold(z, gamma * l1_);
}

PowerIterationResult top_eigenvalue_gram(const Dataset& data, double tol, int max_iter) {
  const auto d = static_cast<Eigen::Index>(data.d());
  RandomSource rng(0x5eed);
  Vector v(d);
  for (auto& vj : v) vj = rng.normal();
  v /= v.norm();

  PowerIterationResult result;
  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = Vector::Zero(d);
    for (const auto& row : data.rows()) axpy_sparse(dot(row, v), row, w);
    w /= static_cast<double>(data.n());
    const double rayleigh = v.dot(w);
    const double wn = w.norm();
    result.iterations = it;
    result.eigenvalue = rayleigh;
    if (wn == 0.0) {
      result.converged = true;
      return result;
    }
    if (it > 1 && std::abs(rayleigh - previous) <= tol * std::abs(rayleigh)) {
      result.converged = true;
      return result;
    }
    previous = rayleigh;
    v = w / wn;
  }
  return result;
}

SmoothnessInfo GlmObjective::smoothness() const {
  require_smooth();
  const double m = loss_curvature_bound(loss_);
  SmoothnessInfo info;
  info.per_example.reserve(n());
  double sum = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    const double li = m * row_norm_sq(data_->row(i)) + l2_;
    info.per_example.push_back(li);
    info.l_max = std::max(info.l_max, li);
    sum += li;
  }
  info.l_mean = sum / static_cast<double>(n());
  const auto power = top_eigenvalue_gram(*data_);
  if (power.converged) {
    info.l_full = m * power.eigenvalue + l2_;
    info.l_full_exact = true;
  } else {
    info.l_full = info.l_mean;
    info.l_full_exact = false;
  }
  info.mu_lower = l2_;
  return info;
}

}  // namespace vropt
