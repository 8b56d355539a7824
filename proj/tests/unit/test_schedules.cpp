#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <memory>
#include <map>
#include <set>

#include "vropt/schedules.hpp"
#include "vropt/synthetic.hpp"

using namespace vropt;

TEST_CASE("method ids round trip") {
  for (Method m : {Method::GD, Method::SGD, Method::SGDMomentum, Method::SGDStar, Method::SAG, Method::SAGA,
                   Method::SVRG, Method::SARAH, Method::SDCA}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_WITH_AS(method_from_string("adam"), doctest::Contains("saga"), ConfigError);
}

TEST_CASE("uniform sampler") {
  SUBCASE("b = n gives the full index set") {
    Sampler s({SamplingKind::Uniform, 7}, 7);
    RandomSource rng(1);
    for (int k = 0; k < 10; ++k) {
      auto b = s.sample(rng);
      std::sort(b.begin(), b.end());
      for (std::size_t i = 0; i < 7; ++i) CHECK(b[i] == i);
    }
  }
  SUBCASE("b = 1 follows draw_index") {
    Sampler s({SamplingKind::Uniform, 1}, 13);
    RandomSource a(42);
    RandomSource b(42);
    for (int k = 0; k < 200; ++k) CHECK(s.sample(a)[0] == draw_index(b, 13));
  }
  SUBCASE("without replacement batches have distinct indices") {
    Sampler s({SamplingKind::Uniform, 4}, 9);
    RandomSource rng(3);
    for (int k = 0; k < 500; ++k) {
      const auto& b = s.sample(rng);
      CHECK(std::set<std::size_t>(b.begin(), b.end()).size() == 4);
    }
  }
  SUBCASE("every size-2 subset of 4 is equally likely") {
    Sampler s({SamplingKind::Uniform, 2}, 4);
    RandomSource rng(8);
    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    const int draws = 60000;
    for (int k = 0; k < draws; ++k) {
      const auto& b = s.sample(rng);
      counts[{std::min(b[0], b[1]), std::max(b[0], b[1])}]++;
    }
    CHECK(counts.size() == 6);
    for (const auto& [key, c] : counts) CHECK(std::abs(static_cast<double>(c) / draws - 1.0 / 6.0) <= 0.02);
  }
  CHECK_THROWS_AS(Sampler({SamplingKind::Uniform, 5}, 4), ConfigError);
  CHECK_NOTHROW(Sampler({SamplingKind::Uniform, 5, true}, 4));
  CHECK_THROWS_AS(Sampler({SamplingKind::Uniform, 0}, 4), ConfigError);
}

TEST_CASE("Lipschitz sampler") {
  Sampler s({SamplingKind::Lipschitz, 1}, 3, {1.0, 1.0, 2.0});
  double total = 0.0;
  for (double p : s.probabilities()) {
    CHECK(p > 0.0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);
  CHECK(s.probability(2) == 0.5);
  RandomSource rng(5);
  int hits = 0;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) hits += s.sample(rng)[0] == 2 ? 1 : 0;
  CHECK(std::abs(static_cast<double>(hits) / draws - 0.5) <= 0.02);

  Sampler equal({SamplingKind::Lipschitz, 1}, 5, std::vector<double>(5, 3.0));
  Sampler uni({SamplingKind::Uniform, 1}, 5);
  RandomSource r1(9);
  RandomSource r2(10);
  std::vector<int> c1(5, 0);
  std::vector<int> c2(5, 0);
  for (int k = 0; k < draws; ++k) {
    ++c1[equal.sample(r1)[0]];
    ++c2[uni.sample(r2)[0]];
  }
  double tv = 0.0;
  for (int i = 0; i < 5; ++i) tv += 0.5 * std::abs(c1[i] - c2[i]) / static_cast<double>(draws);
  CHECK(tv <= 0.02);

  CHECK_THROWS_AS(Sampler({SamplingKind::Lipschitz, 1}, 3, {1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(Sampler({SamplingKind::Lipschitz, 1}, 2, {1.0, 0.0}), ConfigError);
}

TEST_CASE("minibatch_smoothness examples") {
  CHECK(minibatch_smoothness(10.0, 4.0, 3, 1) == 10.0);
  CHECK(minibatch_smoothness(10.0, 4.0, 3, 3) == 4.0);
  CHECK(minibatch_smoothness(10.0, 4.0, 3, 2) == doctest::Approx(5.5).epsilon(1e-15));
  CHECK(minibatch_smoothness(10.0, 4.0, 1, 1) == 10.0);
  CHECK_THROWS_AS(minibatch_smoothness(10.0, 4.0, 3, 0), ConfigError);
  CHECK_THROWS_AS(minibatch_smoothness(10.0, 4.0, 3, 4), ConfigError);
}

TEST_CASE("minibatch_smoothness is non-increasing in b") {
  RandomSource rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + draw_index(rng, 300);
    const double l = 0.1 + 5.0 * rng.uniform();
    const double lmax = l * (1.0 + static_cast<double>(n - 1) * rng.uniform());
    double prev = kInfinity;
    for (std::size_t b = 1; b <= n; ++b) {
      const double lb = minibatch_smoothness(lmax, l, n, b);
      CHECK(lb <= prev * (1 + 1e-12));
      prev = lb;
    }
  }
}

TEST_CASE("default stepsizes") {
  SmoothnessInfo s;
  s.l_max = 4.0;
  s.l_full = 2.0;
  s.l_mean = 3.0;
  s.l_full_exact = true;
  s.mu_lower = 0.1;
  CHECK(default_stepsize(Method::SAGA, s, {SamplingKind::Uniform, 1}, 10) == 0.25);
  CHECK(default_stepsize(Method::SAGA, s, {SamplingKind::Uniform, 10}, 10) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(default_stepsize(Method::GD, s, {}, 10) == 0.5);
  CHECK(default_stepsize(Method::SAG, s, {SamplingKind::Lipschitz, 1}, 10) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(default_stepsize(Method::SGD, s, {}, 10), ConfigError);

  s.l_full_exact = false;
  s.l_full = s.l_mean;
  std::string warning;
  default_stepsize(Method::GD, s, {}, 10, &warning);
  CHECK_FALSE(warning.empty());
}

TEST_CASE("Armijo backtracking examples") {
  // f_1(x) = 1/2 x^2 as a half-squared loss with a = 1, b = 0
  const auto data = std::make_shared<const Dataset>(std::vector<SparseRow>{SparseRow({0}, {1.0}, 1)},
                                                    std::vector<double>{0.0});
  const GlmObjective obj(data, LossKind::HalfSquared, 0.0);
  Vector x(1);
  x << 1.0;
  Vector dir(1);
  dir << -1.0;
  CHECK(armijo_stochastic(obj, 0, x, dir, StepsizePolicy::armijo(2.0, 0.5, 0.5)) == 0.5);
  Vector zero = Vector::Zero(1);
  CHECK(armijo_stochastic(obj, 0, zero, dir, StepsizePolicy::armijo(2.0, 0.5, 0.5)) == 2.0);
}

TEST_CASE("Armijo output satisfies the sufficient-decrease test") {
  const auto data = std::make_shared<const Dataset>(synthetic::dense_classification(30, 5, 4));
  const GlmObjective obj(data, LossKind::Logistic, 0.01);
  RandomSource rng(77);
  const StepsizePolicy pol = StepsizePolicy::armijo(100.0, 0.5, 0.5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t i = draw_index(rng, obj.n());
    Vector x(5);
    for (auto& v : x) v = 3.0 * rng.normal();
    const Vector g = obj.grad_i(i, x);
    const double gamma = armijo_stochastic(obj, i, x, -g, pol);
    if (g.norm() <= kArmijoSkipNorm) continue;
    if (gamma > kArmijoFloor) {
      CHECK(obj.value_i(i, x - gamma * g) < obj.value_i(i, x) - 0.5 * gamma * g.squaredNorm());
    }
  }
}

TEST_CASE("stepsize policy validation") {
  CHECK_THROWS_AS(StepsizePolicy::fixed(0.0).validate(), ConfigError);
  CHECK_THROWS_AS(StepsizePolicy::armijo(1.0, 1.0, 0.5).validate(), ConfigError);
  CHECK_THROWS_AS(StepsizePolicy::armijo(1.0, 0.5, 1.0).validate(), ConfigError);
  CHECK_NOTHROW(StepsizePolicy::armijo().validate());
}
