#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vropt/optimizers.hpp"
#include "vropt/trace.hpp"

namespace vropt {

enum class JitMode { Auto, On, Off };

std::string to_string(JitMode mode);
JitMode jit_mode_from_string(const std::string& name);

struct RunConfig {
  Method method = Method::SAGA;
  StepsizePolicy stepsize = StepsizePolicy::theory();
  SamplingScheme sampling;
  double epochs = 30.0;
  std::uint64_t seed = 1;
  /// SVRG/SARAH inner loop length; 0 means n.
  std::size_t inner_length = 0;
  /// Draw each inner length uniformly from {1..t} (the analysed variant).
  bool random_inner_length = false;
  double beta = 0.9;
  /// Epochs of plain SGD run first; table methods store the gradients seen.
  double warm_start_sgd_epochs = 0.0;
  /// Fill the gradient table at x0 before the first step (costs n).
  bool table_init_at_x0 = false;
  /// SAG: divide by the number of examples seen so far instead of n.
  bool seen_normalized = false;
  TableMode table = TableMode::Dense;
  JitMode jit = JitMode::Auto;
  std::optional<Vector> x0;
  std::optional<Vector> x_star;
  std::optional<double> f_star;
  double checkpoint_every = 1.0;
  StopRule stop;
  bool record_variance = true;
  bool timing = false;
};

/// State visible to checkpoint observers.
struct CheckpointView {
  const GlmObjective& obj;
  const Vector& x;
  const TraceRecord& record;
  const GradientTable* table = nullptr;
  const SvrgState* svrg = nullptr;
  const DualState* dual = nullptr;
  const StarTable* star = nullptr;
};

using CheckpointObserver = std::function<void(const CheckpointView&)>;

struct RunResult {
  Trace trace;
  Vector x;
  double gamma = 0.0;
  bool jit_used = false;
  bool stopped_early = false;
  std::uint64_t touched_coordinates = 0;
  std::uint64_t iterations = 0;
  std::vector<std::string> warnings;
};

/// Divergence with the trace recorded up to the failure.
class RunDiverged : public DivergenceError {
 public:
  RunDiverged(const DivergenceError& cause, Trace partial)
      : DivergenceError(cause.what(), cause.gamma()), partial_(std::move(partial)) {}
  const Trace& partial() const { return partial_; }

 private:
  Trace partial_;
};

/// Throws ConfigError when the configuration does not fit the objective.
void validate_config(const RunConfig& config, const GlmObjective& obj);

/// Runs one method. Gradient evaluations are charged 1 per per-example
/// gradient (SDCA: 1 per coordinate step), n per full gradient and 2 per
/// SVRG/SARAH inner example. Checkpoints are taken at epoch 0 and whenever
/// the evaluation count crosses a multiple of checkpoint_every * n, plus a
/// final one. The budget is epochs * n evaluations.
RunResult run(const RunConfig& config, const GlmObjective& obj, const CheckpointObserver& observer = {});

/// E_i ||g_i - grad f(x)||^2 of the method's estimator at the given state,
/// by enumeration over single indices.
double estimator_spread(Method method, const GlmObjective& obj, const Vector& x, const GradientTable* table,
                        const SvrgState* svrg, const StarTable* star, bool seen_normalized = false);

}  // namespace vropt
