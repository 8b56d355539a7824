#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vropt/run.hpp"

namespace vropt {

/// Resolves a dataset argument. Accepted forms:
///   a LIBSVM file path;
///   "mushrooms": $VROPT_MUSHROOMS, then data/mushrooms, then the synthetic
///     stand-in of the same shape;
///   "synthetic:mushrooms", "synthetic:sparse:N:D:DENSITY:SEED",
///   "synthetic:dense:N:D:SEED", "synthetic:regression:N:D:SEED",
///   "synthetic:twod:N:SEED".
/// `provenance` (optional) receives a short description of the source.
std::shared_ptr<const Dataset> load_dataset(const std::string& spec, std::optional<std::size_t> dim = std::nullopt,
                                            std::string* provenance = nullptr);

/// Parses a regularization value: a number, "1/n" or "C/n".
double parse_regularization(const std::string& text, std::size_t n);

struct MethodEntry {
  std::string label;
  Method method = Method::SAGA;
  std::optional<double> gamma;
  std::string gamma_policy = "theory";  ///< theory or armijo
  std::size_t batch = 1;
  SamplingKind sampling = SamplingKind::Uniform;
  std::size_t inner_t = 0;
  double beta = 0.9;
  double warm_start_sgd_epochs = 0.0;
  TableMode table = TableMode::Dense;
  JitMode jit = JitMode::Auto;
};

struct ExperimentSpec {
  std::string data;
  std::optional<std::size_t> dim;
  LossKind loss = LossKind::Logistic;
  std::string l2 = "1/n";
  std::string l1 = "0";
  double epochs = 30.0;
  std::vector<std::uint64_t> seeds{1};
  double checkpoint_every = 1.0;
  std::string out = "compare_out";
  std::vector<MethodEntry> methods;
};

/// Line-oriented "key = value" text with repeated [method] blocks. Throws
/// ConfigError naming the line on any problem.
ExperimentSpec parse_experiment_spec(std::istream& in);

struct CompareRow {
  std::string label;
  std::string method;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  TraceRecord final_record;
  RateFit fit;
  std::string file;  ///< relative to the output directory
  std::string status = "ok";
};

struct CompareResult {
  std::vector<CompareRow> rows;
  double f_star = 0.0;
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Runs every (method, seed) pair, writing <out>/<label>_seed<k>.csv and
/// <out>/summary.csv. All configurations are validated before the first
/// run. SGD without an explicit gamma uses 1/L_max. Runs execute on up to
/// `jobs` threads. `cache_dir` holds reference solutions.
CompareResult run_compare(const ExperimentSpec& spec, unsigned jobs, const std::optional<std::string>& cache_dir);

struct Trace2dResult {
  std::vector<Vector> iterates;
  Vector x_star;
  double lo[2] = {0, 0};
  double hi[2] = {0, 0};
};

/// Runs `method` (gd, sgd, sgd_momentum, sag or saga; batch 1, uniform) on
/// a 2-feature objective recording every iterate.
Trace2dResult trace2d(const GlmObjective& obj, Method method, double gamma, double epochs, std::uint64_t seed,
                      const Vector& x_star, double beta = 0.9);
/// "k,x1,x2" rows.
void write_iterates_csv(std::ostream& out, const std::vector<Vector>& iterates);
/// "x1,x2,f" rows on a points x points grid over [lo, hi].
void write_level_grid_csv(std::ostream& out, const GlmObjective& obj, const double lo[2], const double hi[2],
                          std::size_t points = 101);

}  // namespace vropt
