#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vropt/experiment.hpp"
#include "vropt/oracles.hpp"
#include "vropt/run.hpp"
#include "vropt/validate.hpp"

using namespace vropt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitDiverged = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::string> cache_dir() {
  if (const char* env = std::getenv("VROPT_CACHE"); env && *env) return std::string(env);
  return std::nullopt;
}

struct ProblemFlags {
  std::string data;
  std::optional<std::size_t> dim;
  std::string loss = "logistic";
  std::string l2 = "1/n";
  std::string l1 = "0";

  void add(CLI::App* app) {
    app->add_option("--data", data, "LIBSVM file, 'mushrooms' or synthetic:...")->required();
    app->add_option("--dim", dim, "Feature dimension override");
    app->add_option("--loss", loss, "half_squared | logistic | hinge")->capture_default_str();
    app->add_option("--l2", l2, "L2 strength (number or 1/n)")->capture_default_str();
    app->add_option("--l1", l1, "L1 strength (number or C/n)")->capture_default_str();
  }

  struct Loaded {
    std::shared_ptr<const Dataset> data;
    std::shared_ptr<GlmObjective> obj;
    std::string provenance;
  };

  Loaded load() const {
    Loaded out;
    try {
      out.data = load_dataset(data, dim, &out.provenance);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw std::ios_base::failure(std::string("cannot load dataset ") + data + ": " + e.what());
    }
    const LossKind kind = loss_from_string(loss);
    out.obj = std::make_shared<GlmObjective>(out.data, kind, parse_regularization(l2, out.data->n()),
                                             parse_regularization(l1, out.data->n()));
    return out;
  }
};

std::vector<std::pair<std::string, std::string>> problem_metadata(const ProblemFlags::Loaded& p) {
  return {{"data", p.provenance},
          {"n", std::to_string(p.data->n())},
          {"d", std::to_string(p.data->d())},
          {"loss", to_string(p.obj->loss())},
          {"l2", format_double(p.obj->l2())},
          {"l1", format_double(p.obj->l1())}};
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_text_file_atomic(path, text);
}

double read_fstar(const std::string& arg) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(arg, &pos);
    if (pos == arg.size()) return v;
  } catch (const std::exception&) {
  }
  std::ifstream in(arg);
  if (!in) throw std::ios_base::failure("cannot open f* file " + arg);
  double v = 0.0;
  if (!(in >> v)) throw ParseError(arg + ": expected a number");
  return v;
}

// ---------------------------------------------------------------------------

struct SolveRefCmd {
  ProblemFlags problem;
  double tol = 1e-12;
  std::string out = "reference";

  void add(CLI::App* app) {
    problem.add(app);
    app->add_option("--tol", tol, "Residual tolerance")->capture_default_str();
    app->add_option("--out", out, "Output prefix: writes PREFIX.xstar and PREFIX.fstar")->capture_default_str();
  }

  int exec() {
    const auto p = problem.load();
    const ReferenceSolution ref = load_or_solve_reference(*p.obj, cache_dir(), tol);
    const auto parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_vector_file(out + ".xstar", ref.x);
    write_text_file_atomic(out + ".fstar", format_double(ref.f) + "\n");
    std::cout << "f* = " << format_double(ref.f) << "\nresidual = " << format_double(ref.residual)
              << "\ncache = " << (ref.cache_hit ? "hit" : (cache_dir() ? "stored" : "off")) << "\nwrote " << out
              << ".xstar and " << out << ".fstar\n";
    return kExitOk;
  }
};

struct RunCmd {
  ProblemFlags problem;
  std::string method;
  std::optional<double> gamma;
  std::string gamma_policy = "theory";
  double gamma_max = 1.0;
  double beta = 0.9;
  std::size_t batch = 1;
  std::string sampling = "uniform";
  bool with_replacement = false;
  std::size_t inner_t = 0;
  bool random_inner = false;
  double epochs = 30;
  std::uint64_t seed = 1;
  double checkpoint_every = 1;
  std::string xstar;
  std::string fstar;
  std::string out;
  std::string jit = "auto";
  std::string table = "dense";
  double warm_start = 0;
  bool init_table = false;
  bool seen_normalized = false;
  std::string stop = "epochs";
  bool no_variance = false;
  bool timing = false;

  void add(CLI::App* app) {
    problem.add(app);
    app->add_option("--method", method, valid_method_ids())->required();
    app->add_option("--gamma", gamma, "Constant stepsize");
    app->add_option("--gamma-policy", gamma_policy, "theory | fixed | armijo")->capture_default_str();
    app->add_option("--gamma-max", gamma_max, "Armijo initial trial stepsize")->capture_default_str();
    app->add_option("--beta", beta, "Momentum parameter")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--sampling", sampling, "uniform | lipschitz")->capture_default_str();
    app->add_flag("--with-replacement", with_replacement, "Uniform batches with replacement");
    app->add_option("--inner-t", inner_t, "SVRG inner loop length (0 = n)")->capture_default_str();
    app->add_flag("--random-inner-t", random_inner, "Draw each inner length uniformly from 1..t");
    app->add_option("--epochs", epochs, "Budget in epochs")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--checkpoint-every", checkpoint_every, "Checkpoint cadence in epochs")->capture_default_str();
    app->add_option("--xstar", xstar, "Reference solution vector file");
    app->add_option("--fstar", fstar, "Optimal value (number or file)");
    app->add_option("--out", out, "Trace CSV path (default stdout)");
    app->add_option("--jit", jit, "auto | on | off")->capture_default_str();
    app->add_option("--table", table, "dense | scalar")->capture_default_str();
    app->add_option("--warm-start-sgd-epochs", warm_start, "Epochs of SGD before the method")->capture_default_str();
    app->add_flag("--init-table", init_table, "Initialize the gradient table at x0");
    app->add_flag("--seen-normalized", seen_normalized, "SAG: divide by the number of examples seen");
    app->add_option("--stop", stop, "grad:EPS | gbar:EPS | gap:EPS | epochs")->capture_default_str();
    app->add_flag("--no-variance", no_variance, "Skip the enumeration variance column");
    app->add_flag("--timing", timing, "Record wall time (output is then not reproducible)");
  }

  int exec() {
    RunConfig c;
    try {
      c.method = method_from_string(method);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (c.method == Method::SGDStar && xstar.empty()) throw UsageError("sgd_star needs --xstar");
    const auto p = problem.load();
    if (gamma_policy == "armijo") {
      c.stepsize = StepsizePolicy::armijo(gamma_max);
    } else if (gamma_policy == "fixed" || gamma) {
      if (!gamma) throw UsageError("--gamma-policy fixed needs --gamma");
      c.stepsize = StepsizePolicy::fixed(*gamma);
    } else if (gamma_policy != "theory") {
      throw UsageError("--gamma-policy must be theory, fixed or armijo");
    }
    c.beta = beta;
    c.sampling.batch = batch;
    c.sampling.with_replacement = with_replacement;
    if (sampling == "lipschitz") c.sampling.kind = SamplingKind::Lipschitz;
    else if (sampling != "uniform") throw UsageError("--sampling must be uniform or lipschitz");
    c.inner_length = inner_t;
    c.random_inner_length = random_inner;
    c.epochs = epochs;
    c.seed = seed;
    c.checkpoint_every = checkpoint_every;
    if (!xstar.empty()) c.x_star = read_vector_file(xstar);
    if (!fstar.empty()) c.f_star = read_fstar(fstar);
    c.jit = jit_mode_from_string(jit);
    if (table == "scalar") c.table = TableMode::Scalar;
    else if (table != "dense") throw UsageError("--table must be dense or scalar");
    c.warm_start_sgd_epochs = warm_start;
    c.table_init_at_x0 = init_table;
    c.seen_normalized = seen_normalized;
    c.stop = parse_stop_rule(stop);
    c.record_variance = !no_variance;
    c.timing = timing;

    auto meta = problem_metadata(p);
    meta.emplace_back("method", method);
    meta.emplace_back("epochs", format_double(epochs));
    meta.emplace_back("seed", std::to_string(seed));
    meta.emplace_back("batch", std::to_string(batch));
    meta.emplace_back("sampling", sampling);
    meta.emplace_back("stop", to_string(c.stop));

    Trace trace;
    int code = kExitOk;
    std::string gamma_text;
    try {
      const RunResult r = run(c, *p.obj);
      trace = r.trace;
      gamma_text = format_double(r.gamma);
      meta.emplace_back("jit", r.jit_used ? "on" : "off");
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    } catch (const RunDiverged& e) {
      trace = e.partial();
      gamma_text = format_double(e.gamma());
      std::cerr << "diverged: " << e.what() << '\n';
      code = kExitDiverged;
    }
    meta.emplace_back("gamma", c.stepsize.kind == StepsizeKind::StochasticArmijo ? "armijo" : gamma_text);
    std::ostringstream csv;
    write_trace(csv, trace, meta);
    write_output(out, csv.str());
    return code;
  }
};

struct CompareCmd {
  std::string spec_path;
  unsigned jobs = 1;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("spec", spec_path, "Experiment spec file")->required();
    app->add_option("--jobs", jobs, "Concurrent runs")->capture_default_str();
    app->add_option("--out", out, "Output directory (overrides the spec)");
  }

  int exec() {
    std::ifstream in(spec_path);
    if (!in) throw std::ios_base::failure("cannot open spec file " + spec_path);
    ExperimentSpec spec;
    try {
      spec = parse_experiment_spec(in);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (!out.empty()) spec.out = out;
    const CompareResult res = run_compare(spec, jobs, cache_dir());
    std::cout << "f* = " << format_double(res.f_star) << '\n';
    for (const auto& r : res.rows) {
      std::cout << r.label << " seed " << r.seed << ": final subopt "
                << (r.final_record.subopt ? format_double(*r.final_record.subopt) : "-") << " [" << r.status << "] -> "
                << (std::filesystem::path(spec.out) / r.file).string() << '\n';
    }
    std::cout << "summary: " << (std::filesystem::path(spec.out) / "summary.csv").string() << '\n';
    return kExitOk;
  }
};

struct Trace2dCmd {
  ProblemFlags problem;
  std::string method = "sgd";
  std::optional<double> gamma;
  double epochs = 20;
  std::uint64_t seed = 1;
  std::string out = "trace2d_out";
  std::size_t grid = 101;

  void add(CLI::App* app) {
    problem.add(app);
    app->add_option("--method", method, "gd | sgd | sgd_momentum | sag | saga")->capture_default_str();
    app->add_option("--gamma", gamma, "Constant stepsize (default 1/L_max)");
    app->add_option("--epochs", epochs, "Epochs")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--out", out, "Output directory")->capture_default_str();
    app->add_option("--grid", grid, "Level-set grid points per axis")->capture_default_str();
  }

  int exec() {
    Method m;
    try {
      m = method_from_string(method);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    const auto p = problem.load();
    if (p.obj->d() != 2) throw UsageError("trace2d needs exactly 2 features, dataset has d = " + std::to_string(p.obj->d()));
    const double g = gamma ? *gamma : 1.0 / p.obj->smoothness().l_max;
    const ReferenceSolution ref = load_or_solve_reference(*p.obj, cache_dir());
    const Trace2dResult res = trace2d(*p.obj, m, g, epochs, seed, ref.x);
    std::filesystem::create_directories(out);
    std::ostringstream it;
    it << "# method=" << method << "\n# gamma=" << format_double(g) << "\n# x_star=" << format_double(ref.x[0]) << ' '
       << format_double(ref.x[1]) << '\n';
    write_iterates_csv(it, res.iterates);
    write_text_file_atomic((std::filesystem::path(out) / ("iterates_" + method + ".csv")).string(), it.str());
    std::ostringstream lv;
    write_level_grid_csv(lv, *p.obj, res.lo, res.hi, grid);
    write_text_file_atomic((std::filesystem::path(out) / "levels.csv").string(), lv.str());
    std::cout << "wrote " << res.iterates.size() << " iterates and a " << grid << "x" << grid << " grid to " << out
              << '\n';
    return kExitOk;
  }
};

struct ValidateCmd {
  std::vector<std::string> only;
  std::string report;
  std::string fault;
  std::string mushrooms = "mushrooms";

  void add(CLI::App* app) {
    app->add_option("--only", only, "Run only these check ids");
    app->add_option("--report", report, "Write a JSON report here");
    app->add_option("--inject-fault", fault, "Test fixture: saga-covariate-sign");
    app->add_option("--mushrooms", mushrooms, "Dataset for the mushrooms-scale checks")->capture_default_str();
  }

  int exec() {
    ValidateOptions opts;
    opts.only = only;
    opts.inject_fault = fault;
    opts.cache_dir = cache_dir();
    opts.mushrooms = mushrooms;
    opts.log = &std::cout;
    std::vector<CheckResult> results;
    try {
      results = run_validation(opts);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    bool all = true;
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
      all = all && r.passed;
      j.push_back({{"id", r.id},
                   {"criterion", r.criterion},
                   {"title", r.title},
                   {"passed", r.passed},
                   {"observed", r.observed},
                   {"tolerance", r.tolerance},
                   {"detail", r.detail},
                   {"seconds", r.seconds}});
    }
    if (!report.empty()) write_output(report, nlohmann::json{{"passed", all}, {"checks", j}}.dump(2) + "\n");
    std::cout << (all ? "all checks passed" : "some checks FAILED") << '\n';
    return all ? kExitOk : 1;
  }
};

struct GenDataCmd {
  std::string kind;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--kind", kind, "synthetic:... dataset spec")->required();
    app->add_option("--out", out, "LIBSVM output path")->required();
  }

  int exec() {
    const auto data = load_dataset(kind);
    std::ostringstream s;
    write_libsvm(s, *data);
    write_output(out, s.str());
    std::cout << "wrote n=" << data->n() << " d=" << data->d() << " to " << out << '\n';
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-reduced finite-sum optimization toolkit"};
  app.require_subcommand(1);
  SolveRefCmd solve_ref;
  RunCmd run_cmd;
  CompareCmd compare;
  Trace2dCmd trace2d_cmd;
  ValidateCmd validate;
  GenDataCmd gen_data;
  auto* c_solve = app.add_subcommand("solve-ref", "Solve for x* and f* with a deterministic full-gradient method");
  auto* c_run = app.add_subcommand("run", "Run one method and write its trace");
  auto* c_compare = app.add_subcommand("compare", "Run a spec file of methods and seeds");
  auto* c_trace2d = app.add_subcommand("trace2d", "Dump iterates and a level-set grid for a 2-feature problem");
  auto* c_validate = app.add_subcommand("validate", "Run the validation suite");
  auto* c_gen = app.add_subcommand("gen-data", "Write a synthetic dataset in LIBSVM format");
  solve_ref.add(c_solve);
  run_cmd.add(c_run);
  compare.add(c_compare);
  trace2d_cmd.add(c_trace2d);
  validate.add(c_validate);
  gen_data.add(c_gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_solve) return solve_ref.exec();
    if (*c_run) return run_cmd.exec();
    if (*c_compare) return compare.exec();
    if (*c_trace2d) return trace2d_cmd.exec();
    if (*c_validate) return validate.exec();
    if (*c_gen) return gen_data.exec();
  } catch (const RunDiverged& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NonSmoothLossError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
