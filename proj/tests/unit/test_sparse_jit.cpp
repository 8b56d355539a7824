#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "vropt/run.hpp"
#include "vropt/sparse_jit.hpp"
#include "vropt/synthetic.hpp"

using namespace vropt;

namespace {

std::shared_ptr<const Dataset> share(Dataset d) { return std::make_shared<const Dataset>(std::move(d)); }

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace

TEST_CASE("catch_up closed form") {
  const LazyIterate plain(Vector::Zero(3), 0.1, 0.0);
  CHECK(plain.catch_up(2.0, 1.0, 0) == 2.0);
  CHECK(plain.catch_up(2.0, 1.0, 3) == doctest::Approx(1.7).epsilon(1e-15));

  const LazyIterate decay(Vector::Zero(1), 0.1, 0.5);
  double x = 1.3;
  for (int k = 0; k < 40; ++k) x = decay.rho() * x - 0.1 * (-0.7);
  CHECK(std::abs(decay.catch_up(1.3, -0.7, 40) - x) <= 1e-14);
  const double far = decay.catch_up(1.3, -0.7, 100000000ULL);
  CHECK(std::abs(far - (-0.1 * -0.7 / (0.1 * 0.5))) <= 1e-12);

  CHECK_THROWS_AS(LazyIterate(Vector::Zero(1), 2.0, 0.5), ConfigError);
  CHECK_THROWS_AS(LazyIterate(Vector::Zero(1), 0.0, 0.5), ConfigError);
}

TEST_CASE("materialize is idempotent and starts at x0") {
  const GlmObjective obj(share(synthetic::sparse_classification(50, 40, 0.05, 1)), LossKind::Logistic, 0.02);
  GradientTable table(obj, TableMode::Scalar);
  Vector x0(40);
  for (Eigen::Index j = 0; j < 40; ++j) x0[j] = 0.01 * static_cast<double>(j);
  LazySolver solver(obj, Method::SAGA, 0.5, x0, table);
  CHECK(solver.materialize() == x0);
  RandomSource rng(2);
  for (int k = 0; k < 30; ++k) solver.step(draw_index(rng, obj.n()));
  const Vector a = solver.materialize();
  const Vector b = solver.materialize();
  CHECK(a == b);
  for (std::size_t j = 0; j < 40; ++j) CHECK(solver.iterate().last_touch(j) <= solver.iterate().iteration());
}

TEST_CASE("dense row: one lazy step equals one dense step") {
  const GlmObjective obj(share(synthetic::dense_classification(10, 5, 3)), LossKind::Logistic, 0.1);
  for (Method m : {Method::SAG, Method::SAGA}) {
    GradientTable lazy_table(obj, TableMode::Scalar);
    GradientTable dense_table(obj, TableMode::Scalar);
    const Vector x0 = Vector::Constant(5, 0.3);
    LazySolver solver(obj, m, 0.4, x0, lazy_table);
    Vector x = x0;
    for (std::size_t i : {3u, 7u, 3u}) {
      solver.step(i);
      const std::size_t b[] = {i};
      if (m == Method::SAG) {
        sag_step(dense_table, obj, x, b, 0.4);
      } else {
        saga_step(dense_table, obj, x, b, 0.4);
      }
      CHECK(rel(solver.materialize(), x) <= 1e-14);
    }
  }
}

TEST_CASE("disjoint supports advance only on their own turns") {
  std::vector<SparseRow> rows = {SparseRow({0, 1}, {1.0, -0.5}, 4), SparseRow({2, 3}, {0.8, 1.1}, 4)};
  const GlmObjective obj(std::make_shared<const Dataset>(std::move(rows), std::vector<double>{1.0, -1.0}),
                         LossKind::Logistic, 0.05);
  GradientTable lazy_table(obj, TableMode::Scalar);
  GradientTable dense_table(obj, TableMode::Scalar);
  LazySolver solver(obj, Method::SAGA, 0.3, Vector::Zero(4), lazy_table);
  Vector x = Vector::Zero(4);
  for (int k = 0; k < 12; ++k) {
    const std::size_t i = static_cast<std::size_t>(k % 2);
    solver.step(i);
    const auto& it = solver.iterate();
    const std::size_t other = i == 0 ? 2 : 0;
    CHECK(it.last_touch(other) < it.iteration());
    const std::size_t b[] = {i};
    saga_step(dense_table, obj, x, b, 0.3);
  }
  CHECK(rel(solver.materialize(), x) <= 1e-13);
  CHECK(solver.touched_coordinates() == 24);
}

TEST_CASE("n = 1 sparse row matches gradient descent on its support") {
  std::vector<SparseRow> rows = {SparseRow({1, 4}, {2.0, -1.0}, 6)};
  const GlmObjective obj(std::make_shared<const Dataset>(std::move(rows), std::vector<double>{1.0}),
                         LossKind::HalfSquared, 0.2);
  GradientTable table(obj, TableMode::Scalar);
  const Vector x0 = Vector::Constant(6, 1.0);
  LazySolver solver(obj, Method::SAG, 0.1, x0, table);
  Vector y = x0;
  for (int k = 0; k < 15; ++k) {
    solver.step(0);
    gd_step(obj, y, 0.1);
  }
  CHECK(rel(solver.materialize(), y) <= 1e-13);
}

TEST_CASE("JIT runs match dense runs over 10 seeds") {
  const GlmObjective obj(share(synthetic::sparse_classification(500, 200, 0.02, 71)), LossKind::Logistic,
                         1.0 / 500.0);
  for (Method m : {Method::SAGA, Method::SAG}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      RunConfig c;
      c.method = m;
      c.epochs = 5;
      c.seed = seed;
      c.table = TableMode::Scalar;
      c.record_variance = false;
      c.jit = JitMode::On;
      const RunResult lazy = run(c, obj);
      c.jit = JitMode::Off;
      const RunResult dense = run(c, obj);
      REQUIRE(lazy.jit_used);
      REQUIRE_FALSE(dense.jit_used);
      CHECK(rel(lazy.x, dense.x) <= 1e-9);
      REQUIRE(lazy.trace.size() == dense.trace.size());
      for (std::size_t k = 0; k < lazy.trace.size(); ++k) {
        CHECK(std::abs(lazy.trace[k].f - dense.trace[k].f) <= 1e-10 * std::abs(dense.trace[k].f));
        CHECK(*lazy.trace[k].gbar_norm == doctest::Approx(*dense.trace[k].gbar_norm).epsilon(1e-10));
      }

      Sampler sampler(SamplingScheme{}, obj.n());
      RandomSource rng(seed);
      std::uint64_t nnz = 0;
      for (std::uint64_t k = 0; k < lazy.iterations; ++k) nnz += obj.data().row(sampler.sample(rng)[0]).nnz();
      CHECK(lazy.touched_coordinates == nnz);
    }
  }
}

TEST_CASE("auto mode and incompatibilities") {
  const GlmObjective sparse(share(synthetic::sparse_classification(200, 100, 0.03, 5)), LossKind::Logistic, 0.01);
  const GlmObjective dense(share(synthetic::dense_classification(50, 8, 5)), LossKind::Logistic, 0.01);
  RunConfig c;
  c.method = Method::SAGA;
  c.epochs = 1;
  c.record_variance = false;
  CHECK(run(c, sparse).jit_used);
  CHECK_FALSE(run(c, dense).jit_used);
  c.sampling.batch = 4;
  CHECK_FALSE(run(c, sparse).jit_used);
  CHECK_FALSE(jit_incompatibility(Method::SAGA, sparse, 0.1, 4, false, false, false).empty());
  CHECK_FALSE(jit_incompatibility(Method::SVRG, sparse, 0.1, 1, false, false, false).empty());
  CHECK_FALSE(jit_incompatibility(Method::SAGA, sparse, 200.0, 1, false, false, false).empty());
  CHECK(jit_incompatibility(Method::SAG, sparse, 0.1, 1, false, false, false).empty());
  c.sampling.batch = 1;
  c.jit = JitMode::On;
  c.method = Method::SVRG;
  CHECK_THROWS_AS(run(c, sparse), ConfigError);
}
