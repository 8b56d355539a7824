#include "vropt/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "vropt/oracles.hpp"
#include "vropt/synthetic.hpp"

namespace vropt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(trim(part));
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + what + ": '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size() || (!s.empty() && s[0] == '-')) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + what + ": '" + s + "'");
  }
}

}  // namespace

std::shared_ptr<const Dataset> load_dataset(const std::string& spec, std::optional<std::size_t> dim,
                                            std::string* provenance) {
  auto note = [&](const std::string& s) {
    if (provenance) *provenance = s;
  };
  if (spec == "mushrooms") {
    std::vector<std::string> candidates;
    if (const char* env = std::getenv("VROPT_MUSHROOMS")) candidates.emplace_back(env);
    candidates.emplace_back("data/mushrooms");
    for (const auto& path : candidates) {
      if (std::filesystem::exists(path)) {
        note("libsvm:" + path);
        return std::make_shared<const Dataset>(load_libsvm(path, dim));
      }
    }
    note("synthetic:mushrooms");
    return std::make_shared<const Dataset>(synthetic::mushrooms_like());
  }
  if (spec.rfind("synthetic:", 0) == 0) {
    const auto parts = split(spec, ':');
    const std::string& kind = parts.size() > 1 ? parts[1] : std::string();
    note(spec);
    auto arg = [&](std::size_t k) -> const std::string& {
      if (k >= parts.size()) throw ConfigError("dataset '" + spec + "': missing field " + std::to_string(k));
      return parts[k];
    };
    if (kind == "mushrooms") return std::make_shared<const Dataset>(synthetic::mushrooms_like());
    if (kind == "sparse") {
      return std::make_shared<const Dataset>(synthetic::sparse_classification(
          to_u64(arg(2), "n"), to_u64(arg(3), "d"), to_double(arg(4), "density"), to_u64(arg(5), "seed")));
    }
    if (kind == "dense") {
      return std::make_shared<const Dataset>(
          synthetic::dense_classification(to_u64(arg(2), "n"), to_u64(arg(3), "d"), to_u64(arg(4), "seed")));
    }
    if (kind == "regression") {
      return std::make_shared<const Dataset>(
          synthetic::dense_regression(to_u64(arg(2), "n"), to_u64(arg(3), "d"), to_u64(arg(4), "seed")));
    }
    if (kind == "twod") {
      return std::make_shared<const Dataset>(synthetic::two_d_classification(to_u64(arg(2), "n"), to_u64(arg(3), "seed")));
    }
    throw ConfigError("unknown synthetic dataset '" + spec + "'");
  }
  note("libsvm:" + spec);
  return std::make_shared<const Dataset>(load_libsvm(spec, dim));
}

double parse_regularization(const std::string& text, std::size_t n) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  double value = 0.0;
  if (slash != std::string::npos && trim(t.substr(slash + 1)) == "n") {
    const std::string num = trim(t.substr(0, slash));
    value = to_double(num.empty() ? "1" : num, "regularization") / static_cast<double>(n);
  } else {
    value = to_double(t, "regularization");
  }
  if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("regularization must be finite and >= 0, got '" + t + "'");
  return value;
}

ExperimentSpec parse_experiment_spec(std::istream& in) {
  ExperimentSpec spec;
  std::string line;
  std::size_t lineno = 0;
  MethodEntry* current = nullptr;
  bool have_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "spec line " + std::to_string(lineno) + ": ";
    if (line == "[method]") {
      spec.methods.emplace_back();
      current = &spec.methods.back();
      continue;
    }
    if (line.front() == '[') throw ConfigError(where + "unknown section " + line);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (!current) {
        if (key == "data") {
          spec.data = value;
          have_data = true;
        } else if (key == "dim") {
          spec.dim = to_u64(value, key);
        } else if (key == "loss") {
          spec.loss = loss_from_string(value);
        } else if (key == "l2") {
          spec.l2 = value;
        } else if (key == "l1") {
          spec.l1 = value;
        } else if (key == "epochs") {
          spec.epochs = to_double(value, key);
        } else if (key == "seeds" || key == "seed") {
          spec.seeds.clear();
          for (const auto& s : split(value, ',')) spec.seeds.push_back(to_u64(s, key));
        } else if (key == "checkpoint_every") {
          spec.checkpoint_every = to_double(value, key);
        } else if (key == "out") {
          spec.out = value;
        } else {
          throw ConfigError("unknown key '" + key + "'");
        }
      } else {
        MethodEntry& m = *current;
        if (key == "name" || key == "method") {
          m.method = method_from_string(value);
          if (m.label.empty()) m.label = value;
        } else if (key == "label") {
          m.label = value;
        } else if (key == "gamma") {
          m.gamma = to_double(value, key);
        } else if (key == "gamma_policy") {
          if (value != "theory" && value != "armijo") throw ConfigError("gamma_policy must be theory or armijo");
          m.gamma_policy = value;
        } else if (key == "batch") {
          m.batch = to_u64(value, key);
        } else if (key == "sampling") {
          if (value == "uniform") m.sampling = SamplingKind::Uniform;
          else if (value == "lipschitz") m.sampling = SamplingKind::Lipschitz;
          else throw ConfigError("sampling must be uniform or lipschitz");
        } else if (key == "inner_t") {
          m.inner_t = to_u64(value, key);
        } else if (key == "beta") {
          m.beta = to_double(value, key);
        } else if (key == "warm_start_sgd_epochs") {
          m.warm_start_sgd_epochs = to_double(value, key);
        } else if (key == "table") {
          if (value == "dense") m.table = TableMode::Dense;
          else if (value == "scalar") m.table = TableMode::Scalar;
          else throw ConfigError("table must be dense or scalar");
        } else if (key == "jit") {
          m.jit = jit_mode_from_string(value);
        } else {
          throw ConfigError("unknown method key '" + key + "'");
        }
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!have_data) throw ConfigError("spec: missing 'data'");
  if (spec.methods.empty()) throw ConfigError("spec: no [method] blocks");
  if (spec.seeds.empty()) throw ConfigError("spec: no seeds");
  for (std::size_t k = 0; k < spec.methods.size(); ++k) {
    if (spec.methods[k].label.empty()) throw ConfigError("spec: [method] block " + std::to_string(k + 1) + " has no name");
  }
  for (std::size_t a = 0; a < spec.methods.size(); ++a) {
    for (std::size_t b = a + 1; b < spec.methods.size(); ++b) {
      if (spec.methods[a].label == spec.methods[b].label) {
        throw ConfigError("spec: duplicate method label '" + spec.methods[a].label + "' (set label = ...)");
      }
    }
  }
  return spec;
}

CompareResult run_compare(const ExperimentSpec& spec, unsigned jobs, const std::optional<std::string>& cache_dir) {
  std::string provenance;
  const auto data = load_dataset(spec.data, spec.dim, &provenance);
  const double l2 = parse_regularization(spec.l2, data->n());
  const double l1 = parse_regularization(spec.l1, data->n());
  const GlmObjective obj(data, spec.loss, l2, l1);
  if (spec.methods.empty()) throw ConfigError("experiment spec has no [method] blocks");
  const bool smooth_loss = is_smooth(spec.loss);
  for (const auto& m : spec.methods) {
    if (!smooth_loss && m.method != Method::SDCA) {
      throw ConfigError("method '" + m.label + "': loss " + to_string(spec.loss) + " is only solved by sdca");
    }
  }
  // Hinge has no smooth primal: no smoothness constants and no reference f*.
  std::optional<SmoothnessInfo> smooth;
  std::optional<ReferenceSolution> ref;
  if (smooth_loss) {
    smooth = obj.smoothness();
    ref = load_or_solve_reference(obj, cache_dir);
  }

  struct Job {
    const MethodEntry* entry;
    std::uint64_t seed;
    RunConfig config;
    std::string file;
  };
  std::vector<Job> work;
  for (const auto& m : spec.methods) {
    for (std::uint64_t seed : spec.seeds) {
      RunConfig c;
      c.method = m.method;
      c.epochs = spec.epochs;
      c.seed = seed;
      c.checkpoint_every = spec.checkpoint_every;
      c.sampling.kind = m.sampling;
      c.sampling.batch = m.batch;
      c.inner_length = m.inner_t;
      c.beta = m.beta;
      c.warm_start_sgd_epochs = m.warm_start_sgd_epochs;
      c.table = m.table;
      c.jit = m.jit;
      if (ref) c.f_star = ref->f;
      if (ref && m.method == Method::SGDStar) c.x_star = ref->x;
      if (m.gamma_policy == "armijo") {
        c.stepsize = StepsizePolicy::armijo(m.gamma ? *m.gamma : 1.0);
      } else if (m.gamma) {
        c.stepsize = StepsizePolicy::fixed(*m.gamma);
      } else if (m.method == Method::SGD || m.method == Method::SGDMomentum) {
        c.stepsize = StepsizePolicy::fixed(1.0 / smooth->l_max);
      }
      validate_config(c, obj);
      const std::string file = m.label + "_seed" + std::to_string(seed) + ".csv";
      work.push_back({&m, seed, c, file});
    }
  }

  std::filesystem::create_directories(spec.out);
  CompareResult result;
  result.metadata = {{"data", provenance},
                     {"n", std::to_string(data->n())},
                     {"d", std::to_string(data->d())},
                     {"loss", to_string(spec.loss)},
                     {"l2", format_double(l2)},
                     {"l1", format_double(l1)}};
  if (ref) {
    result.f_star = ref->f;
    result.metadata.emplace_back("f_star", format_double(ref->f));
    result.metadata.emplace_back("L_max", format_double(smooth->l_max));
    result.metadata.emplace_back("L", format_double(smooth->l_full));
  }
  result.metadata.emplace_back("epochs", format_double(spec.epochs));
  result.rows.resize(work.size());

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= work.size()) return;
      const Job& job = work[k];
      CompareRow row;
      row.label = job.entry->label;
      row.method = to_string(job.entry->method);
      row.seed = job.seed;
      row.file = job.file;
      try {
        Trace trace;
        try {
          const RunResult r = run(job.config, obj);
          trace = r.trace;
          row.gamma = r.gamma;
        } catch (const RunDiverged& e) {
          trace = e.partial();
          row.gamma = e.gamma();
          row.status = "diverged";
        }
        auto meta = result.metadata;
        meta.emplace_back("method", row.method);
        meta.emplace_back("label", row.label);
        meta.emplace_back("seed", std::to_string(job.seed));
        meta.emplace_back("gamma", format_double(row.gamma));
        meta.emplace_back("batch", std::to_string(job.config.sampling.batch));
        std::ostringstream csv;
        write_trace(csv, trace, meta);
        write_text_file_atomic((std::filesystem::path(spec.out) / job.file).string(), csv.str());
        if (!trace.empty()) row.final_record = trace.back();
        row.fit = fit_linear_rate(trace, 1.0, static_cast<double>(data->n()));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
      result.rows[k] = row;
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ostringstream summary;
  for (const auto& [k, v] : result.metadata) summary << "# " << k << '=' << v << '\n';
  summary << "label,method,seed,gamma,final_epoch,final_f,final_subopt,rho_hat_per_epoch,r2,status,file\n";
  for (const auto& r : result.rows) {
    summary << r.label << ',' << r.method << ',' << r.seed << ',' << format_double(r.gamma) << ','
            << format_double(r.final_record.epoch) << ',' << format_double(r.final_record.f) << ','
            << (r.final_record.subopt ? format_double(*r.final_record.subopt) : "") << ','
            << (r.fit.ok ? format_double(r.fit.rho_hat) : "") << ',' << (r.fit.ok ? format_double(r.fit.r2) : "")
            << ',' << r.status << ',' << r.file << '\n';
  }
  write_text_file_atomic((std::filesystem::path(spec.out) / "summary.csv").string(), summary.str());
  return result;
}

Trace2dResult trace2d(const GlmObjective& obj, Method method, double gamma, double epochs, std::uint64_t seed,
                      const Vector& x_star, double beta) {
  if (obj.d() != 2) throw ConfigError("trace2d needs a dataset with exactly 2 features (d = " + std::to_string(obj.d()) + ")");
  if (!(gamma > 0.0)) throw ConfigError("trace2d needs gamma > 0");
  const std::size_t n = obj.n();
  RandomSource rng(seed);
  Sampler sampler(SamplingScheme{}, n);
  std::optional<GradientTable> table;
  std::optional<MomentumState> momentum;
  if (method == Method::SAG || method == Method::SAGA) table.emplace(obj, TableMode::Dense);
  if (method == Method::SGDMomentum) momentum.emplace(2, beta);
  if (method != Method::GD && method != Method::SGD && method != Method::SGDMomentum && method != Method::SAG &&
      method != Method::SAGA) {
    throw ConfigError("trace2d supports gd, sgd, sgd_momentum, sag and saga");
  }
  Trace2dResult res;
  Vector x = Vector::Zero(2);
  res.iterates.push_back(x);
  const auto steps = static_cast<std::uint64_t>(std::llround(epochs * static_cast<double>(n)));
  const std::uint64_t iterations = method == Method::GD ? std::max<std::uint64_t>(1, steps / n) : steps;
  for (std::uint64_t k = 0; k < iterations; ++k) {
    if (method == Method::GD) {
      gd_step(obj, x, gamma);
    } else {
      const IndexSpan b(sampler.sample(rng));
      switch (method) {
        case Method::SGD: sgd_step(obj, x, b, gamma); break;
        case Method::SGDMomentum: sgd_step(obj, x, b, gamma, &*momentum); break;
        case Method::SAG: sag_step(*table, obj, x, b, gamma); break;
        case Method::SAGA: saga_step(*table, obj, x, b, gamma); break;
        default: break;
      }
    }
    res.iterates.push_back(x);
  }
  res.x_star = x_star;
  for (int c = 0; c < 2; ++c) {
    double lo = x_star[c];
    double hi = x_star[c];
    for (const auto& it : res.iterates) {
      lo = std::min(lo, it[c]);
      hi = std::max(hi, it[c]);
    }
    const double pad = 0.1 * std::max(hi - lo, 1e-3);
    res.lo[c] = lo - pad;
    res.hi[c] = hi + pad;
  }
  return res;
}

void write_iterates_csv(std::ostream& out, const std::vector<Vector>& iterates) {
  out << "k,x1,x2\n";
  for (std::size_t k = 0; k < iterates.size(); ++k) {
    out << k << ',' << format_double(iterates[k][0]) << ',' << format_double(iterates[k][1]) << '\n';
  }
}

void write_level_grid_csv(std::ostream& out, const GlmObjective& obj, const double lo[2], const double hi[2],
                          std::size_t points) {
  if (points < 2) throw ConfigError("level grid needs at least 2 points per axis");
  out << "x1,x2,f\n";
  Vector x(2);
  for (std::size_t a = 0; a < points; ++a) {
    x[0] = lo[0] + (hi[0] - lo[0]) * static_cast<double>(a) / static_cast<double>(points - 1);
    for (std::size_t b = 0; b < points; ++b) {
      x[1] = lo[1] + (hi[1] - lo[1]) * static_cast<double>(b) / static_cast<double>(points - 1);
      out << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(obj.composite_value(x)) << '\n';
    }
  }
}

}  // namespace vropt
