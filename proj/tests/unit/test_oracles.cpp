#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "vropt/oracles.hpp"
#include "vropt/synthetic.hpp"
#include "vropt/trace.hpp"

using namespace vropt;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Dataset> share(Dataset d) { return std::make_shared<const Dataset>(std::move(d)); }

std::shared_ptr<const Dataset> scalar_rows(std::vector<double> a, std::vector<double> b) {
  std::vector<SparseRow> rows;
  for (double v : a) rows.push_back(SparseRow({0}, {v}, 1));
  return std::make_shared<const Dataset>(std::move(rows), std::move(b));
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vropt_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Trace geometric(double rho, double c, std::size_t count) {
  Trace t;
  for (std::size_t k = 0; k < count; ++k) {
    TraceRecord r;
    r.grad_evals = k;
    r.epoch = static_cast<double>(k);
    r.subopt = c * std::pow(1.0 - rho, static_cast<double>(k));
    t.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("fd_grad") {
  const GlmObjective q(scalar_rows({1.0}, {0.0}), LossKind::HalfSquared, 0.0);
  CHECK(std::abs(fd_grad(q, Vector::Ones(1))[0] - 1.0) <= 1e-8);
  const GlmObjective obj(share(synthetic::dense_classification(30, 5, 1)), LossKind::Logistic, 0.1);
  const ReferenceSolution ref = solve_reference(obj);
  CHECK(fd_grad(obj, ref.x).norm() <= 1e-8);
}

TEST_CASE("enumeration statistics") {
  Vector values(4);
  values << 1, 2, 3, 6;
  const EnumStats u = enum_stats(4, [&](std::size_t i) { return Vector::Constant(1, values[static_cast<Eigen::Index>(i)]); });
  CHECK(u.mean[0] == 3.0);
  CHECK(u.variance == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(u.second_moment == doctest::Approx(12.5).epsilon(1e-15));
  CHECK(u.count == 4);
  CHECK(lemma2_holds(u));
  const double probs[] = {0.5, 0.0, 0.0, 0.5};
  const EnumStats w = enum_stats(4, [&](std::size_t i) { return Vector::Constant(1, values[static_cast<Eigen::Index>(i)]); }, probs);
  CHECK(w.mean[0] == 3.5);
  CHECK(w.variance == doctest::Approx(6.25).epsilon(1e-15));
  const EnumStats pairs = enum_stats_batches(4, 2, [&](IndexSpan b) {
    return Vector::Constant(1, 0.5 * (values[static_cast<Eigen::Index>(b[0])] + values[static_cast<Eigen::Index>(b[1])]));
  });
  CHECK(pairs.count == 6);
  CHECK(pairs.mean[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(pairs.variance < u.variance);
}

TEST_CASE("gradient-difference bound examples") {
  const GlmObjective one(scalar_rows({1.0}, {0.0}), LossKind::HalfSquared, 0.0);
  const InequalityCheck eq = check_lemma1(one, Vector::Ones(1), Vector::Zero(1));
  CHECK(eq.lhs == 1.0);
  CHECK(eq.rhs == 1.0);
  CHECK(eq.holds);
  const GlmObjective obj(share(synthetic::dense_classification(40, 5, 3)), LossKind::Logistic, 0.05);
  const ReferenceSolution ref = solve_reference(obj);
  const InequalityCheck at = check_lemma1(obj, ref.x, ref.x);
  CHECK(at.lhs == 0.0);
  CHECK(at.holds);
  RandomSource rng(4);
  for (int k = 0; k < 1000; ++k) {
    Vector x(5);
    for (auto& v : x) v = 3.0 * rng.normal();
    const InequalityCheck c = check_lemma1(obj, x, ref.x);
    CHECK(c.slack() >= -1e-12 * std::max(1.0, c.rhs));
  }
}

TEST_CASE("contraction check") {
  const GlmObjective obj(share(synthetic::dense_classification(50, 10, 21)), LossKind::Logistic, 0.1);
  const ReferenceSolution ref = solve_reference(obj);
  const double gamma = 1.0 / obj.smoothness().l_max;
  const InequalityCheck at = check_contraction(obj, ref.x, ref.x, gamma);
  CHECK(at.lhs == 0.0);
  CHECK(at.rhs == 0.0);
  CHECK(at.holds);
  Vector x = Vector::Ones(10);
  CHECK(check_contraction(obj, x, ref.x, gamma).holds);
  CHECK_THROWS_AS(check_contraction(obj, x, ref.x, gamma * 1.0001), ConfigError);
  const GlmObjective flat(share(synthetic::dense_classification(50, 10, 21)), LossKind::Logistic, 0.0);
  CHECK_THROWS_AS(check_contraction(flat, x, ref.x, gamma), ConfigError);
}

TEST_CASE("duality gap") {
  const GlmObjective one(scalar_rows({1.0}, {1.0}), LossKind::HalfSquared, 1.0);
  const DualState zero(one);
  CHECK(duality_gap(one, zero) == 0.5);
  CHECK(dual_objective(one, zero) == 0.0);

  const GlmObjective obj(share(synthetic::dense_classification(20, 4, 6)), LossKind::Logistic, 0.2);
  RandomSource rng(8);
  for (int k = 0; k < 1000; ++k) {
    DualState dual(obj);
    for (std::size_t i = 0; i < obj.n(); ++i) dual.v[i] = obj.label(i) * rng.uniform();
    dual.w = dual.recompute_primal(obj);
    CHECK(duality_gap(obj, dual) >= -1e-10);
  }
  DualState bad(obj);
  bad.v[0] = 2.0 * obj.label(0);
  CHECK(std::isinf(duality_gap(obj, bad)));
}

TEST_CASE("reference solver") {
  SUBCASE("1-D quadratic") {
    const GlmObjective q(scalar_rows({1.0}, {3.0}), LossKind::HalfSquared, 0.0);
    const ReferenceSolution r = solve_reference(q);
    CHECK(std::abs(r.x[0] - 3.0) <= 1e-12);
    CHECK(std::abs(r.f) <= 1e-24);
  }
  SUBCASE("smooth residual and tolerance consistency") {
    const GlmObjective obj(share(synthetic::mushrooms_like()), LossKind::Logistic, 1.0 / 8124.0);
    const ReferenceSolution a = solve_reference(obj, 1e-10);
    const ReferenceSolution b = solve_reference(obj, 1e-12);
    CHECK(a.residual <= 1e-10);
    CHECK(b.residual <= 1e-12);
    CHECK(std::abs(a.f - b.f) <= 1e-9);
    CHECK(obj.full_grad(b.x).norm() <= 1e-12);
  }
  SUBCASE("composite residual") {
    const GlmObjective obj(share(synthetic::dense_regression(60, 12, 4)), LossKind::HalfSquared, 0.01, 0.1);
    const ReferenceSolution r = solve_reference(obj);
    CHECK(reference_residual(obj, r.x, obj.smoothness().l_full) <= 1e-12);
    int zeros = 0;
    for (double v : r.x) zeros += v == 0.0 ? 1 : 0;
    CHECK(zeros > 0);
  }
}

TEST_CASE("reference cache") {
  const fs::path dir = temp_dir("cache");
  const GlmObjective obj(share(synthetic::dense_classification(30, 4, 2)), LossKind::Logistic, 0.1);
  const ReferenceSolution first = load_or_solve_reference(obj, dir.string());
  CHECK_FALSE(first.cache_hit);
  const ReferenceSolution second = load_or_solve_reference(obj, dir.string());
  CHECK(second.cache_hit);
  CHECK(second.x == first.x);
  CHECK(second.f == first.f);
  const GlmObjective other(share(synthetic::dense_classification(30, 4, 2)), LossKind::Logistic, 0.2);
  CHECK(reference_cache_key(other) != reference_cache_key(obj));
  fs::remove_all(dir);
}

TEST_CASE("binary vector and matrix files") {
  const fs::path dir = temp_dir("files");
  Vector v(3);
  v << 1.0 / 3.0, -2e-300, 7.0;
  write_vector_file((dir / "v.bin").string(), v);
  CHECK(read_vector_file((dir / "v.bin").string()) == v);
  RowMatrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  write_matrix_file((dir / "m.bin").string(), m);
  CHECK(read_matrix_file((dir / "m.bin").string()) == m);
  write_text_file_atomic((dir / "bad.bin").string(), "nope");
  CHECK_THROWS(read_vector_file((dir / "bad.bin").string()));
  CHECK_THROWS(read_vector_file((dir / "missing.bin").string()));
  fs::remove_all(dir);
}

TEST_CASE("rate fitting") {
  const RateFit f = fit_linear_rate(geometric(0.1, 1.0, 40), 0.0);
  REQUIRE(f.ok);
  CHECK(std::abs(f.rho_hat - 0.1) <= 1e-10);
  CHECK(std::abs(f.c_hat - 1.0) <= 1e-10);
  CHECK(f.r2 == doctest::Approx(1.0));
  for (double rho : {0.001, 0.05, 0.3}) {
    const RateFit g = fit_linear_rate(geometric(rho, 4.5, 30), 0.0);
    CHECK(std::abs(g.rho_hat - rho) <= 1e-8);
    CHECK(std::abs(g.c_hat - 4.5) <= 1e-8 * 4.5);
  }
  const RateFit flat = fit_linear_rate(geometric(0.0, 2.0, 20), 0.0);
  REQUIRE(flat.ok);
  CHECK(flat.rho_hat == 0.0);
  CHECK_FALSE(fit_linear_rate(geometric(0.1, 1.0, 3), 0.0).ok);
  const RateFit burn = fit_linear_rate(geometric(0.2, 1.0, 40), 10.0);
  CHECK(burn.points == 30);
}
