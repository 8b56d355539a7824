#include "vropt/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vropt {

namespace {

struct MethodName {
  Method method;
  const char* id;
};

constexpr MethodName kMethodNames[] = {
    {Method::GD, "gd"},       {Method::SGD, "sgd"},   {Method::SGDMomentum, "sgd_momentum"},
    {Method::SGDStar, "sgd_star"}, {Method::SAG, "sag"}, {Method::SAGA, "saga"},
    {Method::SVRG, "svrg"},   {Method::SARAH, "sarah"}, {Method::SDCA, "sdca"},
};

}  // namespace

std::string to_string(Method m) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == m) return entry.id;
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (const auto& entry : kMethodNames) {
    if (name == entry.id) return entry.method;
  }
  throw ConfigError("unknown method '" + name + "' (valid: " + valid_method_ids() + ")");
}

std::string valid_method_ids() {
  std::string out;
  for (const auto& entry : kMethodNames) {
    if (!out.empty()) out += ", ";
    out += entry.id;
  }
  return out;
}

Sampler::Sampler(SamplingScheme scheme, std::size_t n, const std::vector<double>& weights)
    : scheme_(scheme), n_(n) {
  if (n == 0) throw ConfigError("sampler: n must be >= 1");
  if (scheme.batch < 1) throw ConfigError("sampler: batch size must be >= 1");
  if (scheme.kind == SamplingKind::Uniform && !scheme.with_replacement && scheme.batch > n) {
    throw ConfigError("sampler: batch " + std::to_string(scheme.batch) + " > n " + std::to_string(n) +
                      " without replacement");
  }
  if (scheme.kind == SamplingKind::Uniform) {
    probs_.assign(n, 1.0 / static_cast<double>(n));
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  } else {
    if (weights.size() != n) throw ConfigError("sampler: Lipschitz sampling needs one weight per example");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("sampler: weights must have a positive sum");
    probs_.resize(n);
    cumulative_.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(weights[i] > 0.0)) throw ConfigError("sampler: Lipschitz weights must be positive");
      probs_[i] = weights[i] / total;
      acc += weights[i];
      cumulative_[i] = acc / total;
    }
    cumulative_.back() = 1.0;
  }
  batch_.reserve(scheme.batch);
}

double Sampler::probability(std::size_t i) const { return probs_.at(i); }

const std::vector<std::size_t>& Sampler::sample(RandomSource& rng) {
  batch_.clear();
  const std::size_t b = scheme_.batch;
  if (scheme_.kind == SamplingKind::Uniform) {
    if (b == 1 || scheme_.with_replacement) {
      for (std::size_t k = 0; k < b; ++k) batch_.push_back(draw_index(rng, n_));
    } else {
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t j = k + draw_index(rng, n_ - k);
        std::swap(perm_[k], perm_[j]);
        batch_.push_back(perm_[k]);
      }
    }
  } else {
    for (std::size_t k = 0; k < b; ++k) {
      const double u = rng.uniform();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      batch_.push_back(std::min(static_cast<std::size_t>(it - cumulative_.begin()), n_ - 1));
    }
  }
  return batch_;
}

double minibatch_smoothness(double l_max, double l_full, std::size_t n, std::size_t b) {
  if (b < 1 || b > n) {
    throw ConfigError("minibatch_smoothness: batch " + std::to_string(b) + " outside [1, " + std::to_string(n) + "]");
  }
  if (n == 1) return l_max;
  if (b == 1) return l_max;
  if (b == n) return l_full;
  const double nn = static_cast<double>(n);
  const double bb = static_cast<double>(b);
  return (1.0 / bb) * ((nn - bb) / (nn - 1.0)) * l_max + (nn / bb) * ((bb - 1.0) / (nn - 1.0)) * l_full;
}

void StepsizePolicy::validate() const {
  switch (kind) {
    case StepsizeKind::Fixed:
      if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("fixed stepsize must be > 0");
      break;
    case StepsizeKind::StochasticArmijo:
      if (!(gamma_max > 0.0)) throw ConfigError("Armijo gamma_max must be > 0");
      if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("Armijo constant c must lie in (0,1)");
      if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("Armijo backtrack factor must lie in (0,1)");
      break;
    default: break;
  }
}

double default_stepsize(Method method, const SmoothnessInfo& smooth, const SamplingScheme& scheme, std::size_t n,
                        std::string* warning) {
  auto need_full_l = [&] {
    if (!smooth.l_full_exact && warning) {
      *warning = "power iteration did not converge; using the L_mean bound in place of L";
    }
  };
  switch (method) {
    case Method::SGD:
    case Method::SGDMomentum:
      throw ConfigError("SGD has no safe constant default stepsize; pass --gamma");
    case Method::GD:
      need_full_l();
      return 1.0 / smooth.l_full;
    case Method::SDCA:
      return 0.0;  // SDCA does exact coordinate maximization, no stepsize
    default: break;
  }
  if (scheme.kind == SamplingKind::Lipschitz) return 1.0 / smooth.l_mean;
  if (scheme.batch > 1) {
    need_full_l();
    return 1.0 / minibatch_smoothness(smooth.l_max, smooth.l_full, n, std::min(scheme.batch, n));
  }
  return 1.0 / smooth.l_max;
}

double armijo_stochastic(const GlmObjective& obj, std::size_t i, const Vector& x, const Vector& direction,
                         const StepsizePolicy& policy) {
  policy.validate();
  const Vector gi = obj.grad_i(i, x);
  const double gnorm2 = gi.squaredNorm();
  if (std::sqrt(gnorm2) <= kArmijoSkipNorm) return policy.gamma_max;
  const double fi = obj.value_i(i, x);
  if (!std::isfinite(fi)) throw std::domain_error("Armijo: non-finite f_i at the current iterate");
  double gamma = policy.gamma_max;
  while (true) {
    const Vector trial = x + gamma * direction;
    const double ft = obj.value_i(i, trial);
    if (!std::isfinite(ft)) throw std::domain_error("Armijo: non-finite f_i at trial stepsize " + std::to_string(gamma));
    if (ft < fi - policy.armijo_c * gamma * gnorm2) return gamma;
    const double next = gamma * policy.backtrack;
    if (next < kArmijoFloor) return gamma;
    gamma = next;
  }
}

}  // namespace vropt
