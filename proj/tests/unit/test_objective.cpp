#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include <Eigen/Eigenvalues>

#include "vropt/objective.hpp"
#include "vropt/oracles.hpp"
#include "vropt/synthetic.hpp"

using namespace vropt;

namespace {

std::shared_ptr<const Dataset> rows(std::vector<std::vector<double>> dense, std::vector<double> labels) {
  std::vector<SparseRow> r;
  for (const auto& row : dense) r.push_back(SparseRow::from_dense(Eigen::Map<const Vector>(row.data(), row.size())));
  // from_dense drops zeros but keeps the dimension
  return std::make_shared<const Dataset>(std::move(r), std::move(labels));
}

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x[k++] = e;
  return x;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("loss_value examples") {
  CHECK(loss_value(LossKind::HalfSquared, 2.5, 2.5) == 0.0);
  CHECK(loss_value(LossKind::HalfSquared, 3.0, 1.0) == 2.0);
  CHECK(loss_value(LossKind::Logistic, 0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_value(LossKind::Hinge, 2.0, 1.0) == 0.0);
  CHECK(loss_value(LossKind::Hinge, 0.25, 1.0) == 0.75);
  CHECK(std::isfinite(loss_value(LossKind::Logistic, -800.0, 1.0)));
  CHECK(loss_value(LossKind::Logistic, -800.0, 1.0) == doctest::Approx(800.0));
  CHECK_THROWS_AS(loss_value(LossKind::Logistic, NAN, 1.0), std::domain_error);
}

TEST_CASE("loss_deriv examples") {
  CHECK(loss_deriv(LossKind::HalfSquared, 3.0, 1.0) == 2.0);
  CHECK(loss_deriv(LossKind::Logistic, 0.0, 1.0) == -0.5);
  const double sat = loss_deriv(LossKind::Logistic, 40.0, 1.0);
  CHECK(std::isfinite(sat));
  CHECK(std::abs(sat) < 1e-17);
  CHECK(std::isfinite(loss_deriv(LossKind::Logistic, -1000.0, 1.0)));
  CHECK_THROWS_AS(loss_deriv(LossKind::Hinge, 0.0, 1.0), NonSmoothLossError);
  CHECK_THROWS_WITH(loss_deriv(LossKind::Hinge, 0.0, 1.0), "non-smooth loss");
}

TEST_CASE("loss derivatives match central differences") {
  RandomSource rng(7);
  for (LossKind loss : {LossKind::HalfSquared, LossKind::Logistic}) {
    for (int k = 0; k < 100; ++k) {
      const double a = 6.0 * rng.normal();
      const double b = loss == LossKind::Logistic ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : rng.normal();
      const double h = 1e-6;
      const double fd = (loss_value(loss, a + h, b) - loss_value(loss, a - h, b)) / (2 * h);
      const double an = loss_deriv(loss, a, b);
      CHECK(std::abs(fd - an) <= 1e-7 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("Fenchel-Young inequality and equality") {
  for (LossKind loss : {LossKind::HalfSquared, LossKind::Logistic}) {
    for (double b : {-1.0, 1.0}) {
      for (double x = -6.0; x <= 6.0; x += 0.25) {
        for (double u = -2.0; u <= 2.0; u += 0.05) {
          const double c = conjugate_value(loss, u, b);
          if (std::isinf(c)) continue;
          CHECK(loss_value(loss, x, b) + c >= x * u - 1e-8);
        }
        const double u = loss_deriv(loss, x, b);
        CHECK(std::abs(loss_value(loss, x, b) + conjugate_value(loss, u, b) - x * u) <= 1e-8);
      }
    }
  }
}

TEST_CASE("conjugate examples") {
  CHECK(conjugate_value(LossKind::HalfSquared, 0.0, 3.0) == 0.0);
  CHECK(std::isfinite(conjugate_value(LossKind::Hinge, -0.5, 1.0)));
  CHECK(conjugate_value(LossKind::Hinge, -0.5, 1.0) == doctest::Approx(-0.5));
  CHECK(std::isinf(conjugate_value(LossKind::Hinge, 0.5, 1.0)));
  CHECK(std::isinf(conjugate_value(LossKind::Logistic, 0.5, 1.0)));
  CHECK(std::isinf(conjugate_value(LossKind::Logistic, -1.5, 1.0)));
  CHECK(conjugate_value(LossKind::Logistic, 0.0, 1.0) == 0.0);
  CHECK(conjugate_value(LossKind::Logistic, -1.0, 1.0) == 0.0);
}

TEST_CASE("grad_i examples") {
  const GlmObjective sq(rows({{1, 0}}, {0.0}), LossKind::HalfSquared, 0.0);
  CHECK(sq.grad_i(0, vec({2, 5})) == vec({2, 0}));
  // margin 1 equals the label, so l' = 0
  const GlmObjective sq2(rows({{1, 1}}, {1.0}), LossKind::HalfSquared, 0.0);
  CHECK(sq2.grad_i(0, vec({0.25, 0.75})).norm() == 0.0);
  CHECK_THROWS_AS(sq.grad_i(1, vec({2, 5})), std::out_of_range);
  const GlmObjective hinge(rows({{1, 0}}, {1.0}), LossKind::Hinge, 0.1);
  CHECK_THROWS_AS(hinge.grad_i(0, vec({0, 0})), NonSmoothLossError);
}

TEST_CASE("grad_i and full_grad match finite differences") {
  for (LossKind loss : {LossKind::HalfSquared, LossKind::Logistic}) {
    const auto data = loss == LossKind::HalfSquared ? synthetic::dense_regression(30, 6, 5)
                                                    : synthetic::dense_classification(30, 6, 5);
    const GlmObjective obj(std::make_shared<const Dataset>(data), loss, 0.03);
    RandomSource rng(11);
    for (int k = 0; k < 100; ++k) {
      Vector x(6);
      for (auto& v : x) v = 2.0 * rng.normal();
      const Vector g = obj.full_grad(x);
      const Vector fd = fd_grad(obj, x);
      CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("full_grad is the exact mean of grad_i, n=1 reduces to the example") {
  const GlmObjective obj(std::make_shared<const Dataset>(synthetic::dense_classification(25, 4, 9)),
                         LossKind::Logistic, 0.2);
  const Vector x = vec({0.3, -1, 2, 0.5});
  Vector mean = Vector::Zero(4);
  for (std::size_t i = 0; i < obj.n(); ++i) mean += obj.grad_i(i, x);
  mean /= 25.0;
  CHECK((mean - obj.full_grad(x)).norm() <= 1e-15 * mean.norm());

  const GlmObjective one(rows({{2, -1}}, {1.0}), LossKind::Logistic, 0.0);
  const Vector y = vec({0.5, 0.25});
  CHECK(one.full_value(y) == loss_value(LossKind::Logistic, 0.75, 1.0));
  CHECK(one.full_grad(y) == one.grad_i(0, y));
}

TEST_CASE("label coercion for classification losses") {
  const GlmObjective obj(rows({{1}, {1}, {1}}, {0.0, 1.0, 0.0}), LossKind::Logistic, 0.1);
  CHECK(obj.label(0) == -1.0);
  CHECK(obj.label(1) == 1.0);
  const GlmObjective two(rows({{1}, {1}}, {1.0, 2.0}), LossKind::Hinge, 0.1);
  CHECK(two.label(0) == -1.0);
  CHECK(two.label(1) == 1.0);
  CHECK_THROWS_AS(GlmObjective(rows({{1}, {1}, {1}}, {0.0, 1.0, 2.0}), LossKind::Logistic, 0.1), ConfigError);
  CHECK_THROWS_AS(GlmObjective(rows({{1}}, {1.0}), LossKind::Hinge, 0.0), ConfigError);
  CHECK_THROWS_AS(GlmObjective(rows({{1}}, {1.0}), LossKind::Logistic, -1.0), ConfigError);
}

TEST_CASE("smoothness examples") {
  const GlmObjective lg(rows({{3, 4}}, {1.0}), LossKind::Logistic, 0.1);
  CHECK(lg.smoothness().l_max == doctest::Approx(6.35).epsilon(1e-15));
  const GlmObjective sq(rows({{1, 0}, {0, 1}}, {1.0, -1.0}), LossKind::HalfSquared, 0.0);
  const SmoothnessInfo s = sq.smoothness();
  CHECK(s.l_full == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.l_max == 1.0);
  CHECK(s.l_full_exact);
  const GlmObjective hinge(rows({{1, 0}}, {1.0}), LossKind::Hinge, 0.1);
  CHECK_THROWS_AS(hinge.smoothness(), NonSmoothLossError);
}

TEST_CASE("power iteration matches a dense eigensolver on a mushrooms subsample") {
  const auto sub = std::make_shared<const Dataset>(synthetic::mushrooms_like().head(50));
  const GlmObjective obj(sub, LossKind::Logistic, 1.0 / 8124.0);
  const SmoothnessInfo s = obj.smoothness();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(112, 112);
  for (std::size_t i = 0; i < sub->n(); ++i) {
    const Vector a = sub->row(i).to_dense();
    gram += a * a.transpose();
  }
  gram /= 50.0;
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();
  CHECK(rel(s.l_full, 0.25 * top + 1.0 / 8124.0) <= 1e-6);
  CHECK(s.l_full <= s.l_max);
}

TEST_CASE("smoothness ordering and realized Lipschitz bounds") {
  RandomSource rng(13);
  for (LossKind loss : {LossKind::HalfSquared, LossKind::Logistic}) {
    const auto data = std::make_shared<const Dataset>(synthetic::sparse_classification(40, 12, 0.3, 8));
    const GlmObjective obj(data, loss, 0.05);
    const SmoothnessInfo s = obj.smoothness();
    CHECK(s.l_full <= s.l_max * (1 + 1e-12));
    CHECK(s.l_max <= 40.0 * s.l_full);
    CHECK(s.l_mean <= s.l_max);
    CHECK(s.mu_lower <= s.l_full);
    for (int k = 0; k < 1000; ++k) {
      const std::size_t i = draw_index(rng, obj.n());
      Vector x(12);
      Vector y(12);
      for (auto& v : x) v = 3.0 * rng.normal();
      for (auto& v : y) v = 3.0 * rng.normal();
      const double lhs = (obj.grad_i(i, x) - obj.grad_i(i, y)).norm();
      CHECK(lhs <= s.per_example[i] * (x - y).norm() * (1 + 1e-12));
    }
  }
}

TEST_CASE("prox examples and nonexpansiveness") {
  const GlmObjective obj(rows({{1}}, {1.0}), LossKind::HalfSquared, 0.0, 1.0);
  CHECK(obj.prox(1.0, vec({2}))[0] == 1.0);
  CHECK(obj.prox(1.0, vec({-0.5}))[0] == 0.0);
  const GlmObjective plain(rows({{1}}, {1.0}), LossKind::HalfSquared, 0.0);
  CHECK(plain.prox(0.3, vec({-4.25}))[0] == -4.25);
  CHECK_THROWS_AS(obj.prox(0.0, vec({1})), ConfigError);
  RandomSource rng(5);
  for (int k = 0; k < 200; ++k) {
    Vector z(5);
    Vector w(5);
    for (auto& v : z) v = rng.normal();
    for (auto& v : w) v = rng.normal();
    CHECK((soft_threshold(z, 0.4) - soft_threshold(w, 0.4)).norm() <= (z - w).norm() + 1e-15);
  }
}
