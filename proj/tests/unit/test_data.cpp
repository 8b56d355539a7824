#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <sstream>

#include "vropt/data.hpp"
#include "vropt/synthetic.hpp"

using namespace vropt;

namespace {

Dataset parse(const std::string& text, std::optional<std::size_t> dim = std::nullopt) {
  std::istringstream in(text);
  return parse_libsvm(in, dim);
}

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x[k++] = e;
  return x;
}

}  // namespace

TEST_CASE("parse_libsvm reads one row with 1-based indices") {
  const Dataset d = parse("+1 1:0.5 3:-2\n");
  REQUIRE(d.n() == 1);
  CHECK(d.d() == 3);
  CHECK(d.label(0) == 1.0);
  const auto idx = d.row(0).indices();
  const auto val = d.row(0).values();
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 2);
  CHECK(val[0] == 0.5);
  CHECK(val[1] == -2.0);
}

TEST_CASE("parse_libsvm errors") {
  CHECK_THROWS_WITH_AS(parse(""), "empty dataset", ParseError);
  CHECK_THROWS_WITH_AS(parse("# only a comment\n\n"), "empty dataset", ParseError);
  CHECK_THROWS_WITH_AS(parse("1 1:1\n1 3:1 2:1\n"), doctest::Contains("line 2"), ParseError);
  CHECK_THROWS_WITH_AS(parse("1 0:1\n"), doctest::Contains("line 1"), ParseError);
  CHECK_THROWS_AS(parse("1 1:abc\n"), ParseError);
  CHECK_THROWS_AS(parse("1 1-3\n"), ParseError);
  CHECK_THROWS_AS(parse("x 1:1\n"), ParseError);
}

TEST_CASE("parse_libsvm comments, blank lines, explicit zeros and dimension override") {
  const Dataset d = parse("# header\n\n0 2:0 4:1.5\n1 1:1\n", 10);
  CHECK(d.n() == 2);
  CHECK(d.d() == 10);
  CHECK(d.row(0).nnz() == 1);
  CHECK(d.label(0) == 0.0);
  CHECK_THROWS_AS(parse("1 5:1\n", 3), DimensionError);
}

TEST_CASE("libsvm round trip at 17 significant digits") {
  const Dataset a = synthetic::sparse_classification(40, 25, 0.2, 3);
  std::stringstream s;
  write_libsvm(s, a);
  const Dataset b = parse_libsvm(s, a.d());
  REQUIRE(b.n() == a.n());
  CHECK(b.content_hash() == a.content_hash());
  for (std::size_t i = 0; i < a.n(); ++i) CHECK((a.row(i).to_dense() - b.row(i).to_dense()).norm() == 0.0);
}

TEST_CASE("SparseRow construction") {
  const SparseRow r({1, 3}, {2.0, 0.0}, 5);
  CHECK(r.nnz() == 1);
  CHECK_THROWS_AS(SparseRow({3, 1}, {1.0, 1.0}, 5), DimensionError);
  CHECK_THROWS_AS(SparseRow({1, 1}, {1.0, 1.0}, 5), DimensionError);
  CHECK_THROWS_AS(SparseRow({5}, {1.0}, 5), DimensionError);
  const SparseRow f = SparseRow::from_dense(vec({0, 1.5, 0, -2}));
  CHECK(f.nnz() == 2);
  CHECK(f.dim() == 4);
}

TEST_CASE("dot examples") {
  CHECK(dot(SparseRow({0, 2}, {1, 2}, 3), vec({3, 9, 4})) == 11.0);
  CHECK(dot(SparseRow({}, {}, 3), vec({3, 9, 4})) == 0.0);
  CHECK(dot(SparseRow({0}, {1}, 2), vec({1, 0})) == 1.0);
  CHECK_THROWS_AS(dot(SparseRow({0}, {1}, 2), vec({1, 0, 0})), DimensionError);
}

TEST_CASE("axpy_sparse examples") {
  Vector x = vec({5, 5});
  axpy_sparse(2.0, SparseRow({1}, {3}, 2), x);
  CHECK(x == vec({5, 11}));
  axpy_sparse(0.0, SparseRow({0, 1}, {7, 8}, 2), x);
  CHECK(x == vec({5, 11}));
  const Vector dense = vec({1.5, -2, 3});
  Vector y = dense;
  axpy_sparse(-1.0, SparseRow::from_dense(dense), y);
  CHECK(y.norm() == 0.0);
  CHECK_THROWS_AS(axpy_sparse(1.0, SparseRow({0}, {1}, 3), x), DimensionError);
}

TEST_CASE("row_norm_sq examples") {
  CHECK(row_norm_sq(SparseRow({0, 1}, {3, 4}, 2)) == 25.0);
  CHECK(row_norm_sq(SparseRow({}, {}, 2)) == 0.0);
  CHECK(row_norm_sq(SparseRow({1}, {1}, 2)) == 1.0);
}

TEST_CASE("sparse kernels agree with dense arithmetic") {
  RandomSource rng(17);
  for (int t = 0; t < 200; ++t) {
    Vector dense = Vector::Zero(30);
    for (auto& v : dense) {
      if (rng.uniform() < 0.3) v = rng.normal();
    }
    Vector x(30);
    for (auto& v : x) v = rng.normal();
    const SparseRow r = SparseRow::from_dense(dense);
    const double expect = dense.dot(x);
    CHECK(std::abs(dot(r, x) - expect) <= 1e-14 * (1.0 + std::abs(expect)));
    Vector y = x;
    axpy_sparse(0.7, r, y);
    CHECK((y - (x + 0.7 * dense)).norm() <= 1e-14 * (1.0 + y.norm()));
    CHECK(std::abs(row_norm_sq(r) - dense.squaredNorm()) <= 1e-14 * (1.0 + dense.squaredNorm()));
  }
}

TEST_CASE("draw_index") {
  RandomSource one(1);
  for (int k = 0; k < 100; ++k) CHECK(draw_index(one, 1) == 0);
  CHECK_THROWS_AS(draw_index(one, 0), std::invalid_argument);

  RandomSource rng(2024);
  std::array<int, 4> counts{};
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) ++counts[draw_index(rng, 4)];
  for (int c : counts) {
    CHECK(c >= 0.23 * draws);
    CHECK(c <= 0.27 * draws);
  }

  RandomSource a(99);
  RandomSource b(99);
  for (int k = 0; k < 100; ++k) CHECK(draw_index(a, 37) == draw_index(b, 37));
}

TEST_CASE("uniform frequency test for n up to 100") {
  for (std::size_t n : {7u, 50u, 100u}) {
    RandomSource rng(n);
    std::vector<int> counts(n, 0);
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) ++counts[draw_index(rng, n)];
    for (int c : counts) CHECK(std::abs(static_cast<double>(c) / draws - 1.0 / static_cast<double>(n)) <= 0.02);
  }
}

TEST_CASE("RandomSource streams are deterministic and distinct") {
  RandomSource s0 = RandomSource::stream(5, 0);
  RandomSource s1 = RandomSource::stream(5, 1);
  RandomSource s1b = RandomSource::stream(5, 1);
  CHECK(s0.seed() == 5);
  const auto v1 = s1.next_u64();
  CHECK(v1 == s1b.next_u64());
  CHECK(s0.next_u64() != v1);
  RandomSource u(3);
  for (int k = 0; k < 1000; ++k) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("Dataset invariants") {
  CHECK_THROWS_AS(Dataset({SparseRow({0}, {1}, 2)}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(Dataset({SparseRow({0}, {1}, 2), SparseRow({0}, {1}, 3)}, {1.0, 1.0}), DimensionError);
  const Dataset d = synthetic::sparse_classification(10, 5, 0.5, 1);
  CHECK(d.head(4).n() == 4);
  CHECK(d.head(4).d() == 5);
}

TEST_CASE("mushrooms stand-in shape") {
  const Dataset m = synthetic::mushrooms_like();
  CHECK(m.n() == 8124);
  CHECK(m.d() == 112);
  for (std::size_t i = 0; i < m.n(); ++i) REQUIRE(m.row(i).nnz() == 22);
  for (double y : m.labels()) CHECK((y == 1.0 || y == -1.0));
}
