#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vropt/data.hpp"
#include "vropt/objective.hpp"

namespace vropt {

enum class Method { GD, SGD, SGDMomentum, SGDStar, SAG, SAGA, SVRG, SARAH, SDCA };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
/// Comma-separated list of valid method ids, for usage messages.
std::string valid_method_ids();

enum class SamplingKind { Uniform, Lipschitz };

/// How example indices are drawn each iteration.
///
/// Uniform batches are drawn without replacement by default (partial
/// Fisher-Yates). Lipschitz sampling (p_i proportional to L_i) always draws
/// with replacement.
struct SamplingScheme {
  SamplingKind kind = SamplingKind::Uniform;
  std::size_t batch = 1;
  bool with_replacement = false;
};

/// Stateful sampler for one run. Owns the permutation buffer used by
/// without-replacement draws and the cumulative weights for Lipschitz draws.
class Sampler {
 public:
  /// `weights` (typically L_i) is required for Lipschitz sampling.
  Sampler(SamplingScheme scheme, std::size_t n, const std::vector<double>& weights = {});

  const SamplingScheme& scheme() const { return scheme_; }
  /// p_i; uniform gives 1/n.
  double probability(std::size_t i) const;
  const std::vector<double>& probabilities() const { return probs_; }

  /// Draws B_k. The result is only valid until the next call.
  const std::vector<std::size_t>& sample(RandomSource& rng);

 private:
  SamplingScheme scheme_;
  std::size_t n_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> batch_;
};

/// Mini-batch smoothness constant L(b) interpolating L(1) = L_max and
/// L(n) = L.
double minibatch_smoothness(double l_max, double l_full, std::size_t n, std::size_t b);

enum class StepsizeKind { Fixed, TheoryDefault, MiniBatchDefault, StochasticArmijo };

struct StepsizePolicy {
  StepsizeKind kind = StepsizeKind::TheoryDefault;
  double gamma = 0.0;  ///< used by Fixed
  double gamma_max = 1.0;
  double armijo_c = 0.5;
  double backtrack = 0.5;

  static StepsizePolicy fixed(double gamma) { return {StepsizeKind::Fixed, gamma}; }
  static StepsizePolicy theory() { return {StepsizeKind::TheoryDefault}; }
  static StepsizePolicy armijo(double gamma_max = 1.0, double c = 0.5, double backtrack = 0.5) {
    return {StepsizeKind::StochasticArmijo, 0.0, gamma_max, c, backtrack};
  }
  void validate() const;
};

/// Theory-driven constant stepsize for `method` (see README for the table).
/// Throws ConfigError for plain SGD, which has no safe constant default.
/// `warning`, when provided, receives a message if the result relies on the
/// L_mean fallback for L.
double default_stepsize(Method method, const SmoothnessInfo& smooth, const SamplingScheme& scheme,
                        std::size_t n, std::string* warning = nullptr);

/// Stochastic Armijo backtracking on f_i alone:
/// the largest gamma in {gamma_max * backtrack^m} with
///   f_i(x + gamma d) < f_i(x) - c gamma ||grad f_i(x)||^2,
/// where d is the update direction (the negated gradient estimate). Returns
/// gamma_max without trials when ||grad f_i(x)|| <= 1e-8, and the last trial
/// (at or above the 1e-12 floor) when nothing passes.
double armijo_stochastic(const GlmObjective& obj, std::size_t i, const Vector& x, const Vector& direction,
                         const StepsizePolicy& policy);

inline constexpr double kArmijoFloor = 1e-12;
inline constexpr double kArmijoSkipNorm = 1e-8;

}  // namespace vropt
