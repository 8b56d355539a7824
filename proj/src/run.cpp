#include "vropt/run.hpp"

#include <chrono>
#include <cmath>

#include "vropt/oracles.hpp"
#include "vropt/sparse_jit.hpp"

namespace vropt {

std::string to_string(JitMode mode) {
  switch (mode) {
    case JitMode::Auto: return "auto";
    case JitMode::On: return "on";
    case JitMode::Off: return "off";
  }
  return "auto";
}

JitMode jit_mode_from_string(const std::string& name) {
  if (name == "auto") return JitMode::Auto;
  if (name == "on") return JitMode::On;
  if (name == "off") return JitMode::Off;
  throw ConfigError("unknown jit mode '" + name + "' (valid: auto, on, off)");
}

namespace {

bool is_table_method(Method m) { return m == Method::SAG || m == Method::SAGA; }
bool is_svrg_family(Method m) { return m == Method::SVRG || m == Method::SARAH; }

}  // namespace

void validate_config(const RunConfig& c, const GlmObjective& obj) {
  const std::string name = to_string(c.method);
  if (!(c.epochs >= 0.0) || !std::isfinite(c.epochs)) throw ConfigError("epochs must be finite and >= 0");
  if (!(c.checkpoint_every > 0.0)) throw ConfigError("checkpoint cadence must be > 0");
  if (!is_smooth(obj.loss()) && c.method != Method::SDCA) {
    throw ConfigError("loss " + to_string(obj.loss()) + " is non-smooth; only sdca accepts it");
  }
  if (c.method == Method::SDCA) {
    if (!(obj.l2() > 0.0)) throw ConfigError("sdca requires l2 > 0");
    if (obj.l1() > 0.0) throw ConfigError("sdca does not support l1");
    if (c.sampling.batch != 1) throw ConfigError("sdca uses single coordinates (batch 1)");
  }
  if (c.sampling.batch < 1 || c.sampling.batch > obj.n()) {
    throw ConfigError("batch size must lie in [1, n = " + std::to_string(obj.n()) + "]");
  }
  if (c.method == Method::SGDStar && !c.x_star) throw ConfigError("sgd_star needs x* (--xstar)");
  if (c.x_star && static_cast<std::size_t>(c.x_star->size()) != obj.d()) throw DimensionError("x* has the wrong dimension");
  if (c.x0 && static_cast<std::size_t>(c.x0->size()) != obj.d()) throw DimensionError("x0 has the wrong dimension");
  c.stepsize.validate();
  if (c.stepsize.kind == StepsizeKind::StochasticArmijo) {
    if (c.method == Method::GD || c.method == Method::SDCA) throw ConfigError("Armijo search applies to stochastic methods only");
    if (c.sampling.batch != 1) throw ConfigError("Armijo search needs batch size 1");
    if (obj.l1() > 0.0) throw ConfigError("Armijo search does not support l1");
  }
  if (c.method == Method::SGDMomentum && !(c.beta >= 0.0 && c.beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
  if (c.seen_normalized && c.method != Method::SAG) throw ConfigError("seen-count normalization applies to sag only");
  if (c.stop.kind == StopKind::Gap && c.method != Method::SDCA) throw ConfigError("gap stop rule needs sdca");
  if (c.stop.kind == StopKind::GbarNorm && !is_table_method(c.method)) throw ConfigError("gbar stop rule needs sag or saga");
  if (c.stop.kind == StopKind::GradNorm && !is_smooth(obj.loss())) throw ConfigError("grad stop rule needs a smooth loss");
  if (c.warm_start_sgd_epochs < 0.0) throw ConfigError("warm start epochs must be >= 0");
  if (c.warm_start_sgd_epochs > 0.0 && c.method == Method::SDCA) throw ConfigError("sdca has no SGD warm start");
  if (c.table_init_at_x0 && !is_table_method(c.method)) throw ConfigError("table initialization applies to sag and saga");
}

double estimator_spread(Method method, const GlmObjective& obj, const Vector& x, const GradientTable* table,
                        const SvrgState* svrg, const StarTable* star, bool seen_normalized) {
  if (method == Method::GD) return 0.0;
  const Vector full = obj.full_grad(x);
  std::function<Vector(std::size_t)> est;
  switch (method) {
    case Method::SGD:
    case Method::SGDMomentum:
      est = [&](std::size_t i) { const std::size_t b[] = {i}; return sgd_estimate(obj, x, b); };
      break;
    case Method::SGDStar:
      est = [&](std::size_t i) { const std::size_t b[] = {i}; return sgd_star_estimate(obj, *star, x, b); };
      break;
    case Method::SAGA:
      est = [&](std::size_t i) { const std::size_t b[] = {i}; return saga_estimate(*table, obj, x, b); };
      break;
    case Method::SAG:
      est = [&](std::size_t i) {
        const std::size_t b[] = {i};
        return sag_direction(*table, obj, x, b, seen_normalized);
      };
      break;
    case Method::SVRG:
    case Method::SARAH:
      est = [&](std::size_t i) { const std::size_t b[] = {i}; return svrg_estimate(*svrg, obj, x, b); };
      break;
    default: throw ConfigError("no stochastic estimator for " + to_string(method));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < obj.n(); ++i) s += (est(i) - full).squaredNorm();
  return s / static_cast<double>(obj.n());
}

namespace {

constexpr std::size_t kVarianceLimit = 100000;

class Runner {
 public:
  Runner(const RunConfig& c, const GlmObjective& obj, const CheckpointObserver& observer)
      : c_(c), obj_(obj), observer_(observer), n_(obj.n()), rng_(c.seed), aux_rng_(RandomSource::stream(c.seed, 1)) {}

  RunResult go();

 private:
  void setup();
  double pick_gamma(std::size_t i, const Vector& direction);
  void charge(std::uint64_t evals) { evals_ += evals; }
  bool budget_left() const { return evals_ < budget_; }
  bool checkpoint_due() const { return evals_ >= next_checkpoint_; }
  /// Records a checkpoint; returns true when the stop rule fires.
  bool checkpoint(bool check_stop = true);
  const Vector& current_x();
  void warm_start();
  void loop_simple();
  void loop_svrg();
  void loop_sdca();

  const RunConfig& c_;
  const GlmObjective& obj_;
  const CheckpointObserver& observer_;
  std::size_t n_;
  RandomSource rng_;
  RandomSource aux_rng_;
  std::optional<Sampler> sampler_;
  std::optional<SmoothnessInfo> smooth_;
  std::vector<double> iw_;
  Vector x_;
  double gamma_ = 0.0;
  double armijo_last_ = 0.0;
  std::optional<GradientTable> table_;
  std::optional<MomentumState> momentum_;
  std::optional<SvrgState> svrg_;
  std::optional<StarTable> star_;
  std::optional<DualState> dual_;
  std::optional<LazySolver> lazy_;
  std::uint64_t evals_ = 0;
  std::uint64_t budget_ = 0;
  std::uint64_t next_checkpoint_ = 0;
  std::uint64_t cadence_ = 1;
  std::chrono::steady_clock::time_point start_;
  RunResult result_;
};

void Runner::setup() {
  validate_config(c_, obj_);
  if (is_smooth(obj_.loss())) smooth_ = obj_.smoothness();
  x_ = c_.x0 ? *c_.x0 : Vector::Zero(static_cast<Eigen::Index>(obj_.d()));
  budget_ = static_cast<std::uint64_t>(std::llround(c_.epochs * static_cast<double>(n_)));
  cadence_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(c_.checkpoint_every * static_cast<double>(n_))));

  std::vector<double> weights;
  if (c_.sampling.kind == SamplingKind::Lipschitz) {
    if (smooth_) {
      weights = smooth_->per_example;
    } else {
      for (std::size_t i = 0; i < n_; ++i) weights.push_back(row_norm_sq(obj_.data().row(i)) + obj_.l2());
    }
  }
  sampler_.emplace(c_.sampling, n_, weights);
  if (c_.sampling.kind == SamplingKind::Lipschitz &&
      (c_.method == Method::SGD || c_.method == Method::SGDMomentum || c_.method == Method::SGDStar ||
       c_.method == Method::SAGA || c_.method == Method::SVRG)) {
    iw_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) iw_[i] = 1.0 / (static_cast<double>(n_) * sampler_->probability(i));
  }

  switch (c_.stepsize.kind) {
    case StepsizeKind::Fixed: gamma_ = c_.stepsize.gamma; break;
    case StepsizeKind::TheoryDefault:
    case StepsizeKind::MiniBatchDefault:
      if (c_.method != Method::SDCA) {
        std::string warning;
        gamma_ = default_stepsize(c_.method, *smooth_, c_.sampling, n_, &warning);
        if (!warning.empty()) result_.warnings.push_back(warning);
      }
      break;
    case StepsizeKind::StochasticArmijo:
      gamma_ = c_.stepsize.gamma_max;
      armijo_last_ = c_.stepsize.gamma_max / 2.0;
      break;
  }

  if (is_table_method(c_.method)) {
    const bool armijo = c_.stepsize.kind == StepsizeKind::StochasticArmijo;
    const std::string why = jit_incompatibility(c_.method, obj_, gamma_, c_.sampling.batch,
                                                c_.sampling.kind == SamplingKind::Lipschitz, armijo, c_.seen_normalized);
    bool use_jit = false;
    if (c_.jit == JitMode::On) {
      if (!why.empty()) throw ConfigError(why);
      use_jit = true;
    } else if (c_.jit == JitMode::Auto && why.empty()) {
      const double density = static_cast<double>(obj_.data().total_nnz()) /
                             (static_cast<double>(n_) * static_cast<double>(obj_.d()));
      use_jit = density <= 0.1;
    }
    table_.emplace(obj_, use_jit ? TableMode::Scalar : c_.table);
    if (c_.table_init_at_x0) {
      table_->initialize_at(x_);
      charge(n_);
    }
    result_.jit_used = use_jit;
  } else if (c_.jit == JitMode::On) {
    throw ConfigError("JIT applies to sag and saga only");
  }
  if (c_.method == Method::SGDMomentum) momentum_.emplace(obj_.d(), c_.beta);
  if (c_.method == Method::SGDStar) star_ = StarTable::build(obj_, *c_.x_star);
  if (is_svrg_family(c_.method)) {
    svrg_.emplace();
    svrg_->variant = c_.method == Method::SARAH ? SvrgVariant::Continuous : SvrgVariant::FixedLoop;
    svrg_->inner_length = c_.inner_length == 0 ? n_ : c_.inner_length;
  }
  if (c_.method == Method::SDCA) {
    dual_.emplace(obj_);
    if (c_.x0) result_.warnings.push_back("sdca starts from v = 0; x0 is ignored");
    x_ = dual_->w;
  }
  result_.gamma = gamma_;
}

double Runner::pick_gamma(std::size_t i, const Vector& direction) {
  if (c_.stepsize.kind != StepsizeKind::StochasticArmijo) return gamma_;
  StepsizePolicy p = c_.stepsize;
  p.gamma_max = std::min(c_.stepsize.gamma_max, 2.0 * armijo_last_);
  const double g = armijo_stochastic(obj_, i, x_, direction, p);
  armijo_last_ = g;
  return g;
}

const Vector& Runner::current_x() {
  if (lazy_) x_ = lazy_->materialize();
  if (dual_) x_ = dual_->w;
  return x_;
}

bool Runner::checkpoint(bool check_stop) {
  const Vector& x = current_x();
  TraceRecord r;
  r.grad_evals = evals_;
  r.epoch = static_cast<double>(evals_) / static_cast<double>(n_);
  r.f = obj_.composite_value(x);
  if (!std::isfinite(r.f)) throw DivergenceError("objective became non-finite with stepsize gamma = " + std::to_string(gamma_), gamma_);
  if (c_.f_star) r.subopt = r.f - *c_.f_star;
  if (smooth_) r.grad_norm = reference_residual(obj_, x, smooth_->l_full);
  if (table_) {
    const Vector gbar = c_.seen_normalized ? table_->seen_normalized_mean() : table_->mean();
    r.gbar_norm = (gbar + obj_.l2() * x).norm();
  }
  if (dual_) r.gap = duality_gap(obj_, *dual_);
  if (c_.record_variance && n_ <= kVarianceLimit && c_.method != Method::SDCA) {
    const bool svrg_ready = !svrg_ || svrg_->refreshed;
    if (svrg_ready) {
      r.var_est = estimator_spread(c_.method, obj_, x, table_ ? &*table_ : nullptr, svrg_ ? &*svrg_ : nullptr,
                                   star_ ? &*star_ : nullptr, c_.seen_normalized);
    }
  }
  if (c_.timing) r.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  result_.trace.push_back(r);
  while (next_checkpoint_ <= evals_) next_checkpoint_ += cadence_;
  if (observer_) {
    CheckpointView view{obj_, x, result_.trace.back(), table_ ? &*table_ : nullptr, svrg_ ? &*svrg_ : nullptr,
                        dual_ ? &*dual_ : nullptr, star_ ? &*star_ : nullptr};
    observer_(view);
  }
  if (!check_stop) return false;
  if (c_.epochs == 0.0) return true;
  return should_stop(c_.stop, r);
}

void Runner::warm_start() {
  const auto steps = static_cast<std::uint64_t>(std::llround(c_.warm_start_sgd_epochs * static_cast<double>(n_)));
  const double gamma = c_.stepsize.kind == StepsizeKind::StochasticArmijo ? c_.stepsize.gamma_max : gamma_;
  for (std::uint64_t k = 0; k < steps; ++k) {
    const std::size_t i = draw_index(rng_, n_);
    const double s = obj_.loss_deriv_at(i, x_);
    if (table_) table_->replace(i, s);
    Vector g = obj_.l2() * x_;
    axpy_sparse(s, obj_.data().row(i), g);
    x_ -= gamma * g;
    finish_step(obj_, x_, gamma);
    charge(1);
  }
}

void Runner::loop_simple() {
  const Method m = c_.method;
  const bool armijo = c_.stepsize.kind == StepsizeKind::StochasticArmijo;
  const WeightSpan iw(iw_);
  if (table_ && result_.jit_used) lazy_.emplace(obj_, m, gamma_, x_, *table_);
  while (budget_left()) {
    if (m == Method::GD) {
      gd_step(obj_, x_, gamma_);
      charge(n_);
    } else {
      const auto& batch = sampler_->sample(rng_);
      const IndexSpan b(batch);
      if (lazy_) {
        lazy_->step(batch[0]);
      } else {
        double gamma = gamma_;
        switch (m) {
          case Method::SGD:
          case Method::SGDMomentum:
            if (armijo) gamma = pick_gamma(batch[0], -sgd_estimate(obj_, x_, b, iw));
            sgd_step(obj_, x_, b, gamma, momentum_ ? &*momentum_ : nullptr, iw);
            break;
          case Method::SGDStar:
            if (armijo) gamma = pick_gamma(batch[0], -sgd_star_estimate(obj_, *star_, x_, b, iw));
            sgd_star_step(obj_, *star_, x_, b, gamma, iw);
            break;
          case Method::SAG:
            if (armijo) gamma = pick_gamma(batch[0], -sag_direction(*table_, obj_, x_, b, c_.seen_normalized));
            sag_step(*table_, obj_, x_, b, gamma, c_.seen_normalized);
            break;
          case Method::SAGA:
            if (armijo) gamma = pick_gamma(batch[0], -saga_estimate(*table_, obj_, x_, b, iw));
            saga_step(*table_, obj_, x_, b, gamma, iw);
            break;
          default: break;
        }
      }
      charge(batch.size());
    }
    ++result_.iterations;
    if (checkpoint_due() && checkpoint()) {
      result_.stopped_early = true;
      return;
    }
  }
}

void Runner::loop_svrg() {
  const bool armijo = c_.stepsize.kind == StepsizeKind::StochasticArmijo;
  const WeightSpan iw(iw_);
  while (budget_left()) {
    svrg_outer_refresh(*svrg_, obj_, x_);
    charge(n_);
    if (c_.stop.kind == StopKind::GradNorm) {
      TraceRecord boundary;
      boundary.grad_norm = obj_.l1() == 0.0 ? svrg_->ref_grad.norm()
                                            : reference_residual(obj_, svrg_->ref_point, smooth_->l_full);
      if (should_stop(c_.stop, boundary)) {
        checkpoint(false);
        result_.stopped_early = true;
        return;
      }
    }
    if (checkpoint_due()) checkpoint(false);
    std::size_t t = svrg_->inner_length;
    if (c_.random_inner_length) t = 1 + draw_index(aux_rng_, svrg_->inner_length);
    for (std::size_t k = 0; k < t && budget_left(); ++k) {
      const auto& batch = sampler_->sample(rng_);
      const IndexSpan b(batch);
      double gamma = gamma_;
      if (armijo) gamma = pick_gamma(batch[0], -svrg_estimate(*svrg_, obj_, x_, b, iw));
      svrg_inner_step(*svrg_, obj_, x_, b, gamma, iw);
      charge(2 * batch.size());
      ++result_.iterations;
      if (checkpoint_due()) checkpoint(false);
    }
  }
}

void Runner::loop_sdca() {
  while (budget_left()) {
    const auto& batch = sampler_->sample(rng_);
    sdca_step(*dual_, obj_, batch[0]);
    charge(1);
    ++result_.iterations;
    if (checkpoint_due() && checkpoint()) {
      result_.stopped_early = true;
      return;
    }
  }
}

RunResult Runner::go() {
  setup();
  start_ = std::chrono::steady_clock::now();
  try {
    next_checkpoint_ = evals_;
    if (checkpoint()) {
      result_.x = current_x();
      return result_;
    }
    if (c_.warm_start_sgd_epochs > 0.0) warm_start();
    if (is_svrg_family(c_.method)) {
      loop_svrg();
    } else if (c_.method == Method::SDCA) {
      loop_sdca();
    } else {
      loop_simple();
    }
    if (result_.trace.back().grad_evals != evals_) checkpoint(false);
  } catch (const DivergenceError& e) {
    throw RunDiverged(e, result_.trace);
  }
  result_.x = current_x();
  if (lazy_) result_.touched_coordinates = lazy_->touched_coordinates();
  return result_;
}

}  // namespace

RunResult run(const RunConfig& config, const GlmObjective& obj, const CheckpointObserver& observer) {
  Runner runner(config, obj, observer);
  return runner.go();
}

}  // namespace vropt
