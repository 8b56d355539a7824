#include "vropt/validate.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "vropt/experiment.hpp"
#include "vropt/oracles.hpp"
#include "vropt/sparse_jit.hpp"
#include "vropt/synthetic.hpp"

namespace vropt {

const std::vector<CheckInfo>& validation_checks() {
  static const std::vector<CheckInfo> checks = {
      {"vr_ordering", 1, "VR methods beat GD and SGD by 100x on mushrooms-scale logistic regression"},
      {"vr_property", 2, "estimator variance vanishes for SAGA/SVRG but not for SGD"},
      {"noise_ball", 3, "constant-step SGD stalls in a noise ball while SAG converges (2-D)"},
      {"contraction", 4, "SGD* one-step contraction holds by exact enumeration"},
      {"lemma1", 5, "gradient-difference bound and estimator second-moment bound"},
      {"unbiasedness", 6, "SGD, SGD*, SAGA, SVRG and mini-batch estimators are unbiased"},
      {"sag_mean", 7, "running table average equals the recomputed average"},
      {"jit_equivalence", 8, "lazy sparse SAGA matches dense SAGA"},
      {"scalar_table", 9, "scalar-table SAGA matches dense-table SAGA"},
      {"sdca", 10, "SDCA monotone dual, duality gap and coordinate updates"},
      {"minibatch_smoothness", 11, "mini-batch smoothness endpoints and monotonicity"},
      {"prox_pipeline", 12, "prox-SAGA matches the proximal reference solution and its zeros"},
      {"oracles", 13, "analytic gradients and conjugates match numeric oracles"},
      {"rate_fit", 14, "linear-rate fitting recovers planted rates"},
  };
  return checks;
}

namespace {

using Clock = std::chrono::steady_clock;

double rel_diff(const Vector& a, const Vector& b) {
  const double scale = b.norm();
  const double diff = (a - b).norm();
  return scale > 0.0 ? diff / scale : diff;
}

double rel_diff(double a, double b) {
  const double scale = std::abs(b);
  return scale > 0.0 ? std::abs(a - b) / scale : std::abs(a - b);
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

struct Context {
  const ValidateOptions& opts;
  std::shared_ptr<const Dataset> mushrooms;
  std::string mushrooms_source;
  std::optional<GlmObjective> mush_obj;
  std::optional<ReferenceSolution> mush_ref;
  bool lemma2_ok = true;
  std::size_t lemma2_states = 0;

  const GlmObjective& mush() {
    if (!mush_obj) {
      mushrooms = load_dataset(opts.mushrooms, std::nullopt, &mushrooms_source);
      mush_obj.emplace(mushrooms, LossKind::Logistic, 1.0 / static_cast<double>(mushrooms->n()));
    }
    return *mush_obj;
  }
  const ReferenceSolution& mush_reference() {
    if (!mush_ref) mush_ref = load_or_solve_reference(mush(), opts.cache_dir);
    return *mush_ref;
  }
  void note_lemma2(const EnumStats& s) {
    ++lemma2_states;
    if (!lemma2_holds(s)) lemma2_ok = false;
  }
};

std::shared_ptr<const Dataset> share(Dataset d) { return std::make_shared<const Dataset>(std::move(d)); }

// ---------------------------------------------------------------------------

CheckResult check_ordering(Context& ctx) {
  CheckResult r;
  const GlmObjective& obj = ctx.mush();
  const ReferenceSolution& ref = ctx.mush_reference();
  const SmoothnessInfo sm = obj.smoothness();
  struct Entry {
    Method m;
    double gamma;
    double subopt = 0.0;
    double seconds = 0.0;
  };
  std::vector<Entry> entries = {{Method::GD, 1.0 / sm.l_full},
                                {Method::SGD, 1.0 / sm.l_max},
                                {Method::SAG, 1.0 / sm.l_max},
                                {Method::SVRG, 1.0 / sm.l_max}};
  for (auto& e : entries) {
    RunConfig c;
    c.method = e.m;
    c.stepsize = StepsizePolicy::fixed(e.gamma);
    c.epochs = 30;
    c.seed = 1;
    c.f_star = ref.f;
    c.record_variance = false;
    c.checkpoint_every = 30;
    const auto t0 = Clock::now();
    const RunResult res = run(c, obj);
    e.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    e.subopt = *res.trace.back().subopt;
  }
  const double baseline = std::min(entries[0].subopt, entries[1].subopt);
  const double vr = std::max(entries[2].subopt, entries[3].subopt);
  double slowest = 0.0;
  for (const auto& e : entries) slowest = std::max(slowest, e.seconds);
  r.passed = vr <= 1e-2 * baseline && vr <= 1e-8 && slowest <= 60.0;
  r.observed = vr;
  r.tolerance = 1e-8;
  std::ostringstream d;
  d << "data=" << ctx.mushrooms_source << " n=" << obj.n() << " d=" << obj.d() << "; final subopt gd=" << sci(entries[0].subopt)
    << " sgd=" << sci(entries[1].subopt) << " sag=" << sci(entries[2].subopt) << " svrg=" << sci(entries[3].subopt)
    << "; slowest run " << sci(slowest) << " s";
  r.detail = d.str();
  return r;
}

CheckResult check_vr(Context& ctx) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::dense_classification(200, 20, 11)), LossKind::Logistic, 0.01);
  const SmoothnessInfo sm = obj.smoothness();
  std::map<std::string, double> ratios;
  for (Method m : {Method::SAGA, Method::SVRG, Method::SGD}) {
    RunConfig c;
    c.method = m;
    c.stepsize = StepsizePolicy::fixed(1.0 / sm.l_max);
    c.epochs = 30;
    c.seed = 3;
    double v1 = -1.0;
    double v30 = -1.0;
    const RunResult res = run(c, obj, [&](const CheckpointView& v) {
      const double e = v.record.epoch;
      if (!v.record.var_est) return;
      // At an SVRG refresh x equals the anchor and the spread is exactly 0.
      const bool at_anchor = v.svrg && v.x == v.svrg->ref_point;
      if (v1 < 0.0 && e >= 1.0 - 1e-9 && !at_anchor) v1 = *v.record.var_est;
      if (e >= 30.0 - 1e-9 && v30 < 0.0) v30 = *v.record.var_est;
    });
    (void)res;
    ratios[to_string(m)] = v30 / v1;
  }
  r.passed = ratios["saga"] <= 1e-3 && ratios["svrg"] <= 1e-3 && ratios["sgd"] >= 0.1;
  r.observed = std::max(ratios["saga"], ratios["svrg"]);
  r.tolerance = 1e-3;
  r.detail = "var(epoch 30)/var(epoch 1): saga=" + sci(ratios["saga"]) + " svrg=" + sci(ratios["svrg"]) +
             " sgd=" + sci(ratios["sgd"]) + " (sgd must stay >= 0.1)";
  (void)ctx;
  return r;
}

CheckResult check_noise_ball(Context&) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::two_d_classification(200, 5)), LossKind::Logistic, 0.01);
  const SmoothnessInfo sm = obj.smoothness();
  const ReferenceSolution ref = solve_reference(obj);
  const double gamma = 1.0 / sm.l_max;
  const Trace2dResult sgd = trace2d(obj, Method::SGD, gamma, 50, 7, ref.x);
  const Trace2dResult sag = trace2d(obj, Method::SAG, gamma, 50, 7, ref.x);
  const double initial = ref.x.norm();
  const double sag_final = (sag.iterates.back() - ref.x).norm();
  double sgd_min = kInfinity;
  for (std::size_t k = sgd.iterates.size() - 100; k < sgd.iterates.size(); ++k) {
    sgd_min = std::min(sgd_min, (sgd.iterates[k] - ref.x).norm());
  }
  r.passed = sgd_min >= 10.0 * sag_final && sag_final <= 1e-3 * initial;
  r.observed = sag_final / initial;
  r.tolerance = 1e-3;
  r.detail = "gamma=" + sci(gamma) + "; SAG final distance " + sci(sag_final) + " (initial " + sci(initial) +
             "); SGD min distance over last 100 iterates " + sci(sgd_min);
  return r;
}

CheckResult check_contraction_thm(Context&) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::dense_classification(50, 10, 21)), LossKind::Logistic, 0.1);
  const ReferenceSolution ref = solve_reference(obj);
  const SmoothnessInfo sm = obj.smoothness();
  const double gamma = 1.0 / sm.l_max;
  const StarTable star = StarTable::build(obj, ref.x);
  RandomSource rng(99);
  Vector x(10);
  std::size_t held = 0;
  double worst = -kInfinity;
  // SGD* reaches roundoff level within ~80 steps, so 100 iterates are taken
  // as 5 trajectories of 20 from fresh random starts.
  for (int k = 0; k < 100; ++k) {
    if (k % 20 == 0) {
      for (auto& v : x) v = 3.0 * rng.normal();
    }
    const InequalityCheck c = check_contraction(obj, x, ref.x, gamma);
    if (c.holds) ++held;
    if (c.rhs > 0.0) worst = std::max(worst, c.lhs / c.rhs);
    const std::size_t i[] = {draw_index(rng, obj.n())};
    sgd_star_step(obj, star, x, i, gamma);
  }
  r.passed = held == 100;
  r.observed = worst;
  r.tolerance = 1.0 + 1e-12;
  r.detail = std::to_string(held) + "/100 iterates satisfy E||x+ - x*||^2 <= (1 - gamma mu)||x - x*||^2; max ratio " +
             sci(worst);
  return r;
}

CheckResult check_lemmas(Context& ctx) {
  CheckResult r;
  double worst_slack = kInfinity;
  std::size_t held = 0;
  std::size_t total = 0;
  const GlmObjective logi(share(synthetic::dense_classification(50, 10, 31)), LossKind::Logistic, 0.1);
  const GlmObjective quad(share(synthetic::dense_regression(50, 10, 32)), LossKind::HalfSquared, 0.1);
  for (const GlmObjective* obj : {&logi, &quad}) {
    const ReferenceSolution ref = solve_reference(*obj);
    RandomSource rng(41);
    for (int k = 0; k < 1000; ++k) {
      const double scale = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
      Vector x = ref.x;
      for (auto& v : x) v += scale * rng.normal();
      const InequalityCheck c = check_lemma1(*obj, x, ref.x);
      ++total;
      const double slack = c.slack() / (1.0 + std::abs(c.rhs));
      worst_slack = std::min(worst_slack, slack);
      if (slack >= -1e-12) ++held;
    }
  }
  // Second-moment bound on a spread of estimator states.
  const GlmObjective small(share(synthetic::dense_classification(40, 6, 33)), LossKind::Logistic, 0.05);
  for (Method m : {Method::SGD, Method::SAGA, Method::SVRG}) {
    RunConfig c;
    c.method = m;
    c.stepsize = StepsizePolicy::fixed(1.0 / small.smoothness().l_max);
    c.epochs = 5;
    c.record_variance = false;
    run(c, small, [&](const CheckpointView& v) {
      if (v.svrg && !v.svrg->refreshed) return;
      const EnumStats s = enum_stats(small.n(), [&](std::size_t i) {
        const std::size_t b[] = {i};
        if (m == Method::SGD) return sgd_estimate(small, v.x, b);
        if (m == Method::SAGA) return saga_estimate(*v.table, small, v.x, b);
        return svrg_estimate(*v.svrg, small, v.x, b);
      });
      ctx.note_lemma2(s);
    });
  }
  r.passed = held == total && ctx.lemma2_ok;
  r.observed = worst_slack;
  r.tolerance = -1e-12;
  r.detail = "gradient-difference bound: " + std::to_string(held) + "/" + std::to_string(total) + " points, min normalized slack " +
             sci(worst_slack) + "; second-moment bound: " + (ctx.lemma2_ok ? "holds" : "FAILS") + " on " +
             std::to_string(ctx.lemma2_states) + " enumerated states";
  return r;
}

CheckResult check_unbiased(Context& ctx) {
  CheckResult r;
  const bool fault = ctx.opts.inject_fault == "saga-covariate-sign";
  double worst = 0.0;
  std::size_t states = 0;
  std::ostringstream detail;

  auto saga_single = [&](const GradientTable& table, const GlmObjective& obj, const Vector& x, IndexSpan b,
                         WeightSpan iw) {
    Vector g = saga_estimate(table, obj, x, b, iw);
    if (fault) {
      // covariate added instead of subtracted
      for (std::size_t i : b) table.add_entry(i, 2.0 * (iw.empty() ? 1.0 : iw[i]) / static_cast<double>(b.size()), g);
    }
    return g;
  };

  auto score = [&](const EnumStats& s, const Vector& full) {
    ctx.note_lemma2(s);
    ++states;
    const double err = (s.mean - full).norm() / (1.0 + full.norm());
    worst = std::max(worst, err);
    return err;
  };

  // Single-index estimators, 10 checkpoints each.
  const GlmObjective obj(share(synthetic::dense_classification(60, 8, 51)), LossKind::Logistic, 0.05);
  const ReferenceSolution ref = solve_reference(obj);
  const double gamma = 1.0 / obj.smoothness().l_max;
  const std::vector<std::pair<Method, SamplingKind>> cases = {
      {Method::SGD, SamplingKind::Uniform},  {Method::SGDStar, SamplingKind::Uniform},
      {Method::SAGA, SamplingKind::Uniform}, {Method::SVRG, SamplingKind::Uniform},
      {Method::SAGA, SamplingKind::Lipschitz}, {Method::SGD, SamplingKind::Lipschitz}};
  for (const auto& [m, kind] : cases) {
    RunConfig c;
    c.method = m;
    c.stepsize = StepsizePolicy::fixed(gamma);
    c.sampling.kind = kind;
    c.epochs = 10;
    c.record_variance = false;
    c.x_star = ref.x;
    std::vector<double> probs;
    std::vector<double> iw;
    if (kind == SamplingKind::Lipschitz) {
      const auto& li = obj.smoothness().per_example;
      double sum = 0.0;
      for (double l : li) sum += l;
      for (double l : li) {
        probs.push_back(l / sum);
        iw.push_back(1.0 / (static_cast<double>(obj.n()) * (l / sum)));
      }
    }
    double method_worst = 0.0;
    std::size_t checkpoints = 0;
    run(c, obj, [&](const CheckpointView& v) {
      if (v.record.grad_evals == 0) return;
      if (v.svrg && !v.svrg->refreshed) return;
      const StarTable* star = v.star;
      const EnumStats s = enum_stats(
          obj.n(),
          [&](std::size_t i) {
            const std::size_t b[] = {i};
            const WeightSpan w(iw);
            switch (m) {
              case Method::SGD: return sgd_estimate(obj, v.x, b, w);
              case Method::SGDStar: return sgd_star_estimate(obj, *star, v.x, b, w);
              case Method::SAGA: return saga_single(*v.table, obj, v.x, b, w);
              default: return svrg_estimate(*v.svrg, obj, v.x, b, w);
            }
          },
          probs);
      method_worst = std::max(method_worst, score(s, obj.full_grad(v.x)));
      ++checkpoints;
    });
    detail << to_string(m) << (kind == SamplingKind::Lipschitz ? "/lipschitz" : "") << ": " << checkpoints
           << " checkpoints, max err " << sci(method_worst) << "; ";
  }

  // Mini-batch estimators: exhaustive subsets with n = 6.
  const GlmObjective tiny(share(synthetic::dense_classification(6, 4, 52)), LossKind::Logistic, 0.1);
  const ReferenceSolution tiny_ref = solve_reference(tiny);
  for (std::size_t b : {std::size_t{2}, std::size_t{3}}) {
    for (Method m : {Method::SGD, Method::SGDStar, Method::SAGA, Method::SVRG}) {
      RunConfig c;
      c.method = m;
      c.sampling.batch = b;
      c.stepsize = StepsizePolicy::fixed(0.5 / tiny.smoothness().l_max);
      c.epochs = 10;
      c.record_variance = false;
      c.x_star = tiny_ref.x;
      double method_worst = 0.0;
      run(c, tiny, [&](const CheckpointView& v) {
        if (v.record.grad_evals == 0) return;
        if (v.svrg && !v.svrg->refreshed) return;
        const EnumStats s = enum_stats_batches(tiny.n(), b, [&](IndexSpan batch) {
          switch (m) {
            case Method::SGD: return sgd_estimate(tiny, v.x, batch);
            case Method::SGDStar: return sgd_star_estimate(tiny, *v.star, v.x, batch);
            case Method::SAGA: return saga_single(*v.table, tiny, v.x, batch, {});
            default: return svrg_estimate(*v.svrg, tiny, v.x, batch);
          }
        });
        method_worst = std::max(method_worst, score(s, tiny.full_grad(v.x)));
      });
      detail << to_string(m) << "/b=" << b << ": max err " << sci(method_worst) << "; ";
    }
  }
  r.passed = worst <= 1e-12;
  r.observed = worst;
  r.tolerance = 1e-12;
  r.detail = (fault ? std::string("[fault injected: saga-covariate-sign] ") : std::string()) + std::to_string(states) +
             " states; " + detail.str();
  return r;
}

CheckResult check_sag_mean(Context&) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::sparse_classification(100, 30, 0.2, 61)), LossKind::Logistic, 0.01);
  const double gamma = 1.0 / obj.smoothness().l_max;
  double worst = 0.0;
  std::size_t checks = 0;
  for (Method m : {Method::SAG, Method::SAGA}) {
    for (TableMode mode : {TableMode::Dense, TableMode::Scalar}) {
      GradientTable table(obj, mode);
      Vector x = Vector::Zero(static_cast<Eigen::Index>(obj.d()));
      RandomSource rng(7);
      for (int k = 1; k <= 1000; ++k) {
        const std::size_t i[] = {draw_index(rng, obj.n())};
        if (m == Method::SAG) sag_step(table, obj, x, i, gamma);
        else saga_step(table, obj, x, i, gamma);
        if (k % 100 == 0) {
          worst = std::max(worst, rel_diff(table.mean(), table.recompute_mean()));
          ++checks;
        }
      }
    }
  }
  r.passed = worst <= 1e-10;
  r.observed = worst;
  r.tolerance = 1e-10;
  r.detail = std::to_string(checks) + " comparisons (sag/saga x dense/scalar), max relative difference " + sci(worst);
  return r;
}

CheckResult check_jit(Context&) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::sparse_classification(500, 200, 0.02, 71)), LossKind::Logistic, 1.0 / 500.0);
  double worst_x = 0.0;
  double worst_f = 0.0;
  double worst_gbar = 0.0;
  bool counts_ok = true;
  for (Method m : {Method::SAGA, Method::SAG}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      RunConfig c;
      c.method = m;
      c.epochs = 5;
      c.seed = seed;
      c.record_variance = false;
      std::vector<Vector> xs;
      std::vector<double> fs;
      std::vector<Vector> gbars;
      c.jit = JitMode::Off;
      c.table = TableMode::Dense;
      run(c, obj, [&](const CheckpointView& v) {
        xs.push_back(v.x);
        fs.push_back(v.record.f);
        gbars.push_back(v.table->mean());
      });
      c.jit = JitMode::On;
      std::size_t k = 0;
      const RunResult lazy = run(c, obj, [&](const CheckpointView& v) {
        worst_x = std::max(worst_x, rel_diff(v.x, xs[k]));
        worst_f = std::max(worst_f, rel_diff(v.record.f, fs[k]));
        worst_gbar = std::max(worst_gbar, rel_diff(v.table->mean(), gbars[k]));
        ++k;
      });
      // Replay the sampler to count the nonzeros of the sampled rows.
      RandomSource rng(seed);
      Sampler sampler(SamplingScheme{}, obj.n());
      std::uint64_t nnz = 0;
      for (std::uint64_t it = 0; it < lazy.iterations; ++it) nnz += obj.data().row(sampler.sample(rng)[0]).nnz();
      if (!lazy.jit_used || nnz != lazy.touched_coordinates || k != xs.size()) counts_ok = false;
    }
  }
  r.passed = worst_x <= 1e-9 && worst_f <= 1e-10 && worst_gbar <= 1e-10 && counts_ok;
  r.observed = worst_x;
  r.tolerance = 1e-9;
  r.detail = "20 runs (saga, sag x 10 seeds): max rel x diff " + sci(worst_x) + ", f diff " + sci(worst_f) +
             ", gbar diff " + sci(worst_gbar) + "; touched-coordinate counter " +
             (counts_ok ? "equals" : "DIFFERS FROM") + " sum of sampled nnz";
  return r;
}

CheckResult check_scalar(Context&) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::sparse_classification(300, 50, 0.1, 81)), LossKind::Logistic, 1.0 / 300.0);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig c;
    c.method = Method::SAGA;
    c.epochs = 10;
    c.seed = seed;
    c.jit = JitMode::Off;
    c.record_variance = false;
    c.table = TableMode::Dense;
    std::vector<Vector> xs;
    run(c, obj, [&](const CheckpointView& v) { xs.push_back(v.x); });
    c.table = TableMode::Scalar;
    std::size_t k = 0;
    run(c, obj, [&](const CheckpointView& v) { worst = std::max(worst, rel_diff(v.x, xs[k++])); });
  }
  r.passed = worst <= 1e-12;
  r.observed = worst;
  r.tolerance = 1e-12;
  r.detail = "3 seeds x 10 epochs, max relative iterate difference " + sci(worst);
  return r;
}

// Golden-section maximization of a concave function on [a, b].
double golden_max(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int k = 0; k < iters && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++k) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

CheckResult check_sdca(Context& ctx) {
  CheckResult r;
  std::ostringstream detail;
  bool ok = true;

  // Coordinate updates against golden-section maximization of D along e_i.
  double worst_coord = 0.0;
  for (LossKind loss : {LossKind::HalfSquared, LossKind::Logistic, LossKind::Hinge}) {
    const auto data = loss == LossKind::HalfSquared ? share(synthetic::dense_regression(20, 5, 91))
                                                    : share(synthetic::dense_classification(20, 5, 92));
    const GlmObjective obj(data, loss, 0.1);
    DualState dual(obj);
    RandomSource rng(5);
    for (int k = 0; k < 60; ++k) {
      const std::size_t i = draw_index(rng, obj.n());
      const double b = obj.label(i);
      const double v0 = dual.v[i];
      // feasible interval for delta
      double lo = -20.0;
      double hi = 20.0;
      if (loss != LossKind::HalfSquared) {
        // b (v0 + delta) must stay in [0, 1]
        lo = std::min(-v0, b - v0);
        hi = std::max(-v0, b - v0);
      }
      auto along = [&](double delta) {
        DualState probe = dual;
        probe.v[i] = v0 + delta;
        return dual_objective(obj, probe);
      };
      const double oracle = along(golden_max(along, lo, hi));
      sdca_step(dual, obj, i);
      worst_coord = std::max(worst_coord, std::abs(dual_objective(obj, dual) - oracle));
    }
  }
  const bool coord_ok = worst_coord <= 1e-8;
  ok = ok && coord_ok;
  detail << "coordinate maxima vs golden section: max |D diff| " << sci(worst_coord) << "; ";

  // Mushrooms logistic: monotone dual, gap and distance to the primal reference.
  const GlmObjective& obj = ctx.mush();
  const ReferenceSolution& ref = ctx.mush_reference();
  DualState dual(obj);
  RandomSource rng(1);
  Sampler sampler(SamplingScheme{}, obj.n());
  double prev_dual = dual_objective(obj, dual);
  bool monotone = true;
  double min_gain = 0.0;
  double gap = duality_gap(obj, dual);
  int first_below = 0;
  for (int epochs = 1; epochs <= 100; ++epochs) {
    for (std::size_t k = 0; k < obj.n(); ++k) {
      const double gain = sdca_step(dual, obj, sampler.sample(rng)[0]);
      min_gain = std::min(min_gain, gain);
      if (gain < 0.0) monotone = false;
    }
    const double dv = dual_objective(obj, dual);
    if (dv < prev_dual - 1e-12 * std::abs(prev_dual)) monotone = false;
    prev_dual = dv;
    gap = duality_gap(obj, dual);
    if (gap <= 1e-8 && first_below == 0) first_below = epochs;
  }
  const double w_def = rel_diff(dual.w, dual.recompute_primal(obj));
  const double dist = (dual.recompute_primal(obj) - ref.x).norm();
  ok = ok && monotone && first_below > 0 && dist <= 1e-4 && w_def <= 1e-10;
  detail << "mushrooms logistic: gap <= 1e-8 first at epoch " << first_below << ", gap " << sci(gap)
         << " after 100 epochs, ||x(v) - x*|| "
         << sci(dist) << ", dual " << (monotone ? "monotone" : "NOT monotone") << ", w drift " << sci(w_def) << "; ";

  // Hinge loss certified by the gap alone.
  const GlmObjective hinge(share(synthetic::dense_classification(200, 10, 93)), LossKind::Hinge, 0.1);
  RunConfig c;
  c.method = Method::SDCA;
  c.epochs = 2000;
  c.stop = StopRule{StopKind::Gap, 1e-6};
  const RunResult hr = run(c, hinge);
  const double hinge_gap = *hr.trace.back().gap;
  ok = ok && hinge_gap <= 1e-6;
  detail << "hinge: gap " << sci(hinge_gap) << " at epoch " << hr.trace.back().epoch;

  r.passed = ok;
  r.observed = gap;
  r.tolerance = 1e-8;
  r.detail = detail.str();
  return r;
}

CheckResult check_minibatch(Context& ctx) {
  CheckResult r;
  RandomSource rng(123);
  bool endpoints = true;
  bool monotone = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + draw_index(rng, 60);
    const double l_full = 0.1 + 10.0 * rng.uniform();
    const double l_max = l_full * (1.0 + static_cast<double>(n - 1) * rng.uniform());
    if (minibatch_smoothness(l_max, l_full, n, 1) != l_max) endpoints = false;
    if (minibatch_smoothness(l_max, l_full, n, n) != l_full) endpoints = false;
    double prev = kInfinity;
    for (std::size_t b = 1; b <= n; ++b) {
      const double lb = minibatch_smoothness(l_max, l_full, n, b);
      if (lb > prev * (1.0 + 1e-15)) monotone = false;
      prev = lb;
    }
  }
  const GlmObjective& obj = ctx.mush();
  const SmoothnessInfo sm = obj.smoothness();
  const bool mush_ok = minibatch_smoothness(sm.l_max, sm.l_full, obj.n(), 1) == sm.l_max &&
                       minibatch_smoothness(sm.l_max, sm.l_full, obj.n(), obj.n()) == sm.l_full &&
                       sm.l_full <= sm.l_max && sm.l_max <= static_cast<double>(obj.n()) * sm.l_full;
  r.passed = endpoints && monotone && mush_ok;
  r.observed = r.passed ? 0.0 : 1.0;
  r.tolerance = 0.0;
  r.detail = std::string("200 random constant sets: endpoints ") + (endpoints ? "exact" : "WRONG") + ", " +
             (monotone ? "non-increasing in b" : "NOT monotone") + "; mushrooms L=" + sci(sm.l_full) +
             " L_max=" + sci(sm.l_max);
  return r;
}

CheckResult check_prox(Context&) {
  CheckResult r;
  const GlmObjective obj(share(synthetic::dense_regression(100, 20, 101)), LossKind::HalfSquared, 0.01, 0.05);
  const ReferenceSolution ref = solve_reference(obj);
  RunConfig c;
  c.method = Method::SAGA;
  c.epochs = 300;
  c.seed = 4;
  c.record_variance = false;
  c.checkpoint_every = 300;
  const RunResult res = run(c, obj);
  const double err = (res.x - ref.x).lpNorm<Eigen::Infinity>();
  std::size_t mismatches = 0;
  std::size_t zeros = 0;
  for (Eigen::Index j = 0; j < ref.x.size(); ++j) {
    if ((ref.x[j] == 0.0) != (res.x[j] == 0.0)) ++mismatches;
    if (ref.x[j] == 0.0) ++zeros;
  }
  r.passed = err <= 1e-6 && mismatches == 0;
  r.observed = err;
  r.tolerance = 1e-6;
  r.detail = "max |x - x*| " + sci(err) + "; reference has " + std::to_string(zeros) + "/20 zeros, pattern mismatches " +
             std::to_string(mismatches);
  return r;
}

CheckResult check_oracles(Context&) {
  CheckResult r;
  double worst_grad = 0.0;
  for (LossKind loss : {LossKind::HalfSquared, LossKind::Logistic}) {
    const auto data = loss == LossKind::HalfSquared ? share(synthetic::dense_regression(30, 6, 111))
                                                    : share(synthetic::dense_classification(30, 6, 112));
    const GlmObjective obj(data, loss, 0.1);
    RandomSource rng(113);
    for (int k = 0; k < 100; ++k) {
      Vector x(6);
      for (auto& v : x) v = 2.0 * rng.normal();
      const Vector g = obj.full_grad(x);
      worst_grad = std::max(worst_grad, rel_diff(fd_grad(obj, x, 1e-6), g));
    }
  }
  double worst_conj = 0.0;
  bool domain_ok = true;
  for (double b : {1.0, -1.0}) {
    for (int k = 1; k < 100; ++k) {
      const double s = -static_cast<double>(k) / 100.0;  // b u in (-1, 0)
      const double u = s / b;
      for (LossKind loss : {LossKind::Logistic, LossKind::Hinge, LossKind::HalfSquared}) {
        auto obj = [&](double a) { return a * u - loss_value(loss, a, b); };
        double numeric = 0.0;
        if (loss == LossKind::Hinge) {
          numeric = -kInfinity;
          for (int t = -50000; t <= 50000; ++t) numeric = std::max(numeric, obj(t * 1e-3));
        } else {
          numeric = obj(golden_max(obj, -50.0, 50.0));
        }
        worst_conj = std::max(worst_conj, std::abs(numeric - conjugate_value(loss, u, b)));
      }
    }
    // outside the domain the sup is unbounded
    for (double s : {0.5, -1.5}) {
      const double u = s / b;
      for (LossKind loss : {LossKind::Logistic, LossKind::Hinge}) {
        auto sup_on = [&](double w) {
          double best = -kInfinity;
          for (int t = -1000; t <= 1000; ++t) best = std::max(best, t * w / 1000.0 * u - loss_value(loss, t * w / 1000.0, b));
          return best;
        };
        const bool grows = sup_on(100.0) > sup_on(50.0) + 1.0;
        if (!grows || std::isfinite(conjugate_value(loss, u, b))) domain_ok = false;
      }
    }
  }
  r.passed = worst_grad <= 1e-5 && worst_conj <= 1e-6 && domain_ok;
  r.observed = std::max(worst_grad, worst_conj);
  r.tolerance = 1e-5;
  r.detail = "gradient vs central differences: max rel err " + sci(worst_grad) + " (tol 1e-5); conjugates vs numeric sup: max err " +
             sci(worst_conj) + " (tol 1e-6); out-of-domain conjugates " + (domain_ok ? "infinite" : "WRONG");
  return r;
}

CheckResult check_rate(Context&) {
  CheckResult r;
  double worst = 0.0;
  for (double rho : {0.1, 0.01, 0.3}) {
    for (double c0 : {1.0, 5.0}) {
      Trace t;
      for (int k = 0; k <= 40; ++k) {
        TraceRecord rec;
        rec.grad_evals = static_cast<std::uint64_t>(k);
        rec.epoch = k;
        rec.subopt = c0 * std::pow(1.0 - rho, k);
        t.push_back(rec);
      }
      const RateFit fit = fit_linear_rate(t, 0.0, 1.0);
      worst = std::max({worst, std::abs(fit.rho_hat - rho), std::abs(fit.c_hat - c0) / c0});
    }
  }
  const GlmObjective obj(share(synthetic::dense_classification(100, 10, 121)), LossKind::Logistic, 0.05);
  const ReferenceSolution ref = solve_reference(obj);
  RunConfig c;
  c.method = Method::SAGA;
  c.epochs = 15;
  c.f_star = ref.f;
  c.record_variance = false;
  const RunResult res = run(c, obj);
  const RateFit fit = fit_linear_rate(res.trace, 1.0, 1.0);
  r.passed = worst <= 1e-8 && fit.ok && fit.rho_hat > 0.0 && fit.r2 >= 0.9;
  r.observed = worst;
  r.tolerance = 1e-8;
  r.detail = "planted traces: max error " + sci(worst) + "; SAGA toy: rho_hat=" + sci(fit.rho_hat) +
             " per iteration, r2=" + sci(fit.r2) + " over " + std::to_string(fit.points) + " checkpoints" +
             (fit.message.empty() ? "" : " (" + fit.message + ")");
  return r;
}

}  // namespace

std::vector<CheckResult> run_validation(const ValidateOptions& options) {
  if (!options.inject_fault.empty() && options.inject_fault != "saga-covariate-sign") {
    throw ConfigError("unknown fault '" + options.inject_fault + "' (valid: saga-covariate-sign)");
  }
  using Fn = CheckResult (*)(Context&);
  static const std::map<std::string, Fn> impl = {
      {"vr_ordering", check_ordering},     {"vr_property", check_vr},       {"noise_ball", check_noise_ball},
      {"contraction", check_contraction_thm}, {"lemma1", check_lemmas}, {"unbiasedness", check_unbiased},
      {"sag_mean", check_sag_mean},      {"jit_equivalence", check_jit},  {"scalar_table", check_scalar},
      {"sdca", check_sdca},              {"minibatch_smoothness", check_minibatch},
      {"prox_pipeline", check_prox},     {"oracles", check_oracles},      {"rate_fit", check_rate}};
  for (const auto& id : options.only) {
    if (!impl.count(id)) {
      std::string valid;
      for (const auto& c : validation_checks()) valid += (valid.empty() ? "" : ", ") + c.id;
      throw ConfigError("unknown check '" + id + "' (valid: " + valid + ")");
    }
  }
  Context ctx{options, nullptr, {}, std::nullopt, std::nullopt};
  std::vector<CheckResult> out;
  for (const auto& info : validation_checks()) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), info.id) == options.only.end()) {
      continue;
    }
    const auto t0 = Clock::now();
    CheckResult res;
    try {
      res = impl.at(info.id)(ctx);
    } catch (const std::exception& e) {
      res.passed = false;
      res.detail = std::string("error: ") + e.what();
    }
    res.id = info.id;
    res.criterion = info.criterion;
    res.title = info.title;
    res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (options.log) {
      *options.log << (res.passed ? "PASS " : "FAIL ") << res.id << " (" << sci(res.seconds) << " s): " << res.detail
                   << std::endl;
    }
    out.push_back(res);
  }
  return out;
}

}  // namespace vropt
