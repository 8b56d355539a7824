#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>

#include "vropt/experiment.hpp"
#include "vropt/oracles.hpp"
#include "vropt/run.hpp"
#include "vropt/synthetic.hpp"
#include "vropt/validate.hpp"

namespace py = pybind11;
using namespace vropt;

namespace {

using DatasetPtr = std::shared_ptr<const Dataset>;

DatasetPtr dataset_from_dense(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>& a,
                              const std::vector<double>& b) {
  if (static_cast<std::size_t>(a.rows()) != b.size()) throw DimensionError("A has " + std::to_string(a.rows()) +
                                                                           " rows but b has " + std::to_string(b.size()));
  std::vector<SparseRow> rows;
  rows.reserve(b.size());
  for (Eigen::Index i = 0; i < a.rows(); ++i) rows.push_back(SparseRow::from_dense(a.row(i).transpose()));
  return std::make_shared<const Dataset>(std::move(rows), b);
}

py::dict record_dict(const TraceRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["grad_evals"] = r.grad_evals;
  d["f"] = r.f;
  d["subopt"] = r.subopt;
  d["grad_norm"] = r.grad_norm;
  d["var_est"] = r.var_est;
  d["gap"] = r.gap;
  d["time_s"] = r.time_s;
  return d;
}

py::list trace_list(const Trace& t) {
  py::list out;
  for (const auto& r : t) out.append(record_dict(r));
  return out;
}

py::dict run_method(const GlmObjective& obj, const std::string& method, double epochs, std::uint64_t seed,
                    std::optional<double> gamma, bool armijo, double gamma_max, std::size_t batch,
                    const std::string& sampling, std::size_t inner_length, double checkpoint_every,
                    const std::string& stop, const std::string& jit, const std::string& table,
                    std::optional<Vector> x0, std::optional<Vector> x_star, std::optional<double> f_star,
                    bool record_variance, bool seen_normalized, bool init_table) {
  RunConfig c;
  c.method = method_from_string(method);
  c.epochs = epochs;
  c.seed = seed;
  if (gamma && armijo) throw ConfigError("gamma and armijo are mutually exclusive");
  if (gamma) c.stepsize = StepsizePolicy::fixed(*gamma);
  if (armijo) c.stepsize = StepsizePolicy::armijo(gamma_max);
  c.sampling.batch = batch;
  if (sampling == "lipschitz") {
    c.sampling.kind = SamplingKind::Lipschitz;
  } else if (sampling != "uniform") {
    throw ConfigError("sampling must be 'uniform' or 'lipschitz'");
  }
  c.inner_length = inner_length;
  c.checkpoint_every = checkpoint_every;
  c.stop = parse_stop_rule(stop);
  c.jit = jit_mode_from_string(jit);
  if (table == "scalar") {
    c.table = TableMode::Scalar;
  } else if (table != "dense") {
    throw ConfigError("table must be 'dense' or 'scalar'");
  }
  c.x0 = std::move(x0);
  c.x_star = std::move(x_star);
  c.f_star = f_star;
  c.record_variance = record_variance;
  c.seen_normalized = seen_normalized;
  c.table_init_at_x0 = init_table;

  RunResult r;
  {
    py::gil_scoped_release release;
    r = run(c, obj);
  }
  py::dict out;
  out["x"] = r.x;
  out["gamma"] = r.gamma;
  out["trace"] = trace_list(r.trace);
  out["jit_used"] = r.jit_used;
  out["stopped_early"] = r.stopped_early;
  out["iterations"] = r.iterations;
  out["warnings"] = r.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_vropt, m) {
  m.doc() = "Variance-reduced finite-sum solvers for regularized GLMs";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NonSmoothLossError>(m, "NonSmoothLossError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<Dataset, std::shared_ptr<Dataset>>(m, "Dataset")
      .def(py::init([](const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>& a,
                       const std::vector<double>& b) { return std::const_pointer_cast<Dataset>(dataset_from_dense(a, b)); }),
           py::arg("A"), py::arg("b"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("d", &Dataset::d)
      .def_property_readonly("nnz", &Dataset::total_nnz)
      .def_property_readonly("labels", [](const Dataset& d) { return std::vector<double>(d.labels().begin(), d.labels().end()); })
      .def("row", [](const Dataset& d, std::size_t i) {
        if (i >= d.n()) throw py::index_error("row index out of range");
        return d.row(i).to_dense();
      })
      .def("content_hash", &Dataset::content_hash)
      .def("__repr__", [](const Dataset& d) {
        return "Dataset(n=" + std::to_string(d.n()) + ", d=" + std::to_string(d.d()) + ")";
      });

  m.def("load_dataset",
        [](const std::string& spec, std::optional<std::size_t> dim) {
          return std::const_pointer_cast<Dataset>(load_dataset(spec, dim));
        },
        py::arg("spec"), py::arg("dim") = py::none(),
        "LIBSVM path, 'mushrooms', or 'synthetic:KIND:...'");

  py::class_<SmoothnessInfo>(m, "Smoothness")
      .def_readonly("per_example", &SmoothnessInfo::per_example)
      .def_readonly("l_max", &SmoothnessInfo::l_max)
      .def_readonly("l_mean", &SmoothnessInfo::l_mean)
      .def_readonly("l_full", &SmoothnessInfo::l_full)
      .def_readonly("l_full_exact", &SmoothnessInfo::l_full_exact)
      .def_readonly("mu", &SmoothnessInfo::mu_lower)
      .def_property_readonly("kappa", &SmoothnessInfo::kappa)
      .def_property_readonly("kappa_max", &SmoothnessInfo::kappa_max);

  py::class_<GlmObjective>(m, "Objective")
      .def(py::init([](std::shared_ptr<Dataset> data, const std::string& loss, double l2, double l1) {
             return GlmObjective(std::move(data), loss_from_string(loss), l2, l1);
           }),
           py::arg("data"), py::arg("loss") = "logistic", py::arg("l2") = 0.0, py::arg("l1") = 0.0)
      .def_property_readonly("n", &GlmObjective::n)
      .def_property_readonly("d", &GlmObjective::d)
      .def_property_readonly("l2", &GlmObjective::l2)
      .def_property_readonly("l1", &GlmObjective::l1)
      .def_property_readonly("loss", [](const GlmObjective& o) { return to_string(o.loss()); })
      .def_property_readonly("data", [](const GlmObjective& o) { return std::const_pointer_cast<Dataset>(o.data_ptr()); })
      .def("value", &GlmObjective::full_value, py::arg("x"))
      .def("composite_value", &GlmObjective::composite_value, py::arg("x"))
      .def("grad", &GlmObjective::full_grad, py::arg("x"))
      .def("value_i", &GlmObjective::value_i, py::arg("i"), py::arg("x"))
      .def("grad_i", &GlmObjective::grad_i, py::arg("i"), py::arg("x"))
      .def("prox", &GlmObjective::prox, py::arg("gamma"), py::arg("z"))
      .def("smoothness", &GlmObjective::smoothness);

  py::class_<ReferenceSolution>(m, "ReferenceSolution")
      .def_readonly("x", &ReferenceSolution::x)
      .def_readonly("f", &ReferenceSolution::f)
      .def_readonly("residual", &ReferenceSolution::residual)
      .def_readonly("iterations", &ReferenceSolution::iterations)
      .def_readonly("cache_hit", &ReferenceSolution::cache_hit);

  m.def("solve_reference",
        [](const GlmObjective& obj, double tol, std::optional<std::string> cache_dir) {
          py::gil_scoped_release release;
          if (cache_dir) return load_or_solve_reference(obj, cache_dir, tol);
          return solve_reference(obj, tol);
        },
        py::arg("objective"), py::arg("tol") = 1e-12, py::arg("cache_dir") = py::none());

  m.def("run", &run_method, py::arg("objective"), py::arg("method"), py::kw_only(), py::arg("epochs") = 30.0,
        py::arg("seed") = 1, py::arg("gamma") = py::none(), py::arg("armijo") = false, py::arg("gamma_max") = 1.0,
        py::arg("batch") = 1, py::arg("sampling") = "uniform", py::arg("inner_length") = 0,
        py::arg("checkpoint_every") = 1.0, py::arg("stop") = "epochs", py::arg("jit") = "auto",
        py::arg("table") = "dense", py::arg("x0") = py::none(), py::arg("x_star") = py::none(),
        py::arg("f_star") = py::none(), py::arg("record_variance") = true, py::arg("seen_normalized") = false,
        py::arg("init_table") = false,
        "Runs one method and returns a dict with x, gamma, trace (list of checkpoint dicts) and run flags.");

  m.def("methods", [] { return valid_method_ids(); });

  m.def("fit_linear_rate",
        [](const std::vector<double>& epochs, const std::vector<double>& subopt, double burn_in) {
          if (epochs.size() != subopt.size()) throw DimensionError("epochs and subopt differ in length");
          Trace t;
          for (std::size_t k = 0; k < epochs.size(); ++k) {
            TraceRecord r;
            r.epoch = epochs[k];
            r.grad_evals = k;
            r.subopt = subopt[k];
            t.push_back(r);
          }
          const RateFit f = fit_linear_rate(t, burn_in);
          py::dict d;
          d["ok"] = f.ok;
          d["rho_hat"] = f.rho_hat;
          d["c_hat"] = f.c_hat;
          d["r2"] = f.r2;
          d["points"] = f.points;
          d["message"] = f.message;
          return d;
        },
        py::arg("epochs"), py::arg("subopt"), py::arg("burn_in") = 0.0,
        "Fits subopt ~ c (1 - rho)^k with k the record index.");

  m.def("check_ids", [] {
    std::vector<std::string> ids;
    for (const auto& c : validation_checks()) ids.push_back(c.id);
    return ids;
  });

  m.def("validate",
        [](const std::vector<std::string>& only, const std::string& inject_fault,
           std::optional<std::string> cache_dir) {
          ValidateOptions o;
          o.only = only;
          o.inject_fault = inject_fault;
          o.cache_dir = std::move(cache_dir);
          std::vector<CheckResult> results;
          {
            py::gil_scoped_release release;
            results = run_validation(o);
          }
          py::list out;
          for (const auto& r : results) {
            py::dict d;
            d["id"] = r.id;
            d["criterion"] = r.criterion;
            d["title"] = r.title;
            d["passed"] = r.passed;
            d["observed"] = r.observed;
            d["tolerance"] = r.tolerance;
            d["detail"] = r.detail;
            out.append(d);
          }
          return out;
        },
        py::arg("only") = std::vector<std::string>{}, py::arg("inject_fault") = "",
        py::arg("cache_dir") = py::none());

}
