#include "vropt/synthetic.hpp"

#include <array>
#include <cmath>
#include <numeric>

namespace vropt::synthetic {

namespace {

double planted_label(double score, RandomSource& rng) {
  const double p = 1.0 / (1.0 + std::exp(-score));
  return rng.uniform() < p ? 1.0 : -1.0;
}

}  // namespace

Dataset mushrooms_like(std::uint64_t seed) {
  // Cardinalities of the 22 attributes; they sum to 112.
  constexpr std::array<std::uint32_t, 22> kCard = {6, 4, 8, 2, 9, 2, 2, 2, 10, 2, 4,
                                                   4, 4, 9, 9, 1, 4, 3, 5, 9, 6, 7};
  constexpr std::size_t kRows = 8124;
  constexpr std::size_t kSpecies = 23;
  std::array<std::uint32_t, 22> offset{};
  std::uint32_t total = 0;
  for (std::size_t a = 0; a < kCard.size(); ++a) {
    offset[a] = total;
    total += kCard[a];
  }

  RandomSource rng(seed);
  // Each species has a dominant value per attribute and a fixed class.
  std::array<std::array<std::uint32_t, 22>, kSpecies> dominant{};
  std::array<double, kSpecies> species_label{};
  std::array<double, kSpecies> species_weight{};
  for (std::size_t s = 0; s < kSpecies; ++s) {
    for (std::size_t a = 0; a < kCard.size(); ++a) {
      dominant[s][a] = static_cast<std::uint32_t>(draw_index(rng, kCard[a]));
    }
    species_label[s] = (s % 2 == 0) ? 1.0 : -1.0;
    species_weight[s] = 0.2 + rng.uniform();
  }
  std::array<double, kSpecies> cumulative{};
  std::partial_sum(species_weight.begin(), species_weight.end(), cumulative.begin());

  std::vector<SparseRow> rows;
  std::vector<double> labels;
  rows.reserve(kRows);
  labels.reserve(kRows);
  for (std::size_t i = 0; i < kRows; ++i) {
    const double u = rng.uniform() * cumulative.back();
    std::size_t s = 0;
    while (s + 1 < kSpecies && cumulative[s] <= u) ++s;
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    for (std::size_t a = 0; a < kCard.size(); ++a) {
      std::uint32_t v = dominant[s][a];
      if (kCard[a] > 1 && rng.uniform() < 0.25) v = static_cast<std::uint32_t>(draw_index(rng, kCard[a]));
      idx.push_back(offset[a] + v);
      val.push_back(1.0);
    }
    rows.emplace_back(std::move(idx), std::move(val), total);
    // A small fraction of records disagree with their species' class.
    double y = species_label[s];
    if (rng.uniform() < 0.01) y = -y;
    labels.push_back(y);
  }
  return Dataset(std::move(rows), std::move(labels));
}

Dataset sparse_classification(std::size_t n, std::size_t d, double density, std::uint64_t seed) {
  RandomSource rng(seed);
  Vector w(static_cast<Eigen::Index>(d));
  for (auto& wj : w) wj = rng.normal();
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    for (std::size_t j = 0; j < d; ++j) {
      if (rng.uniform() < density) {
        idx.push_back(static_cast<std::uint32_t>(j));
        val.push_back(rng.normal());
      }
    }
    if (idx.empty()) {
      idx.push_back(static_cast<std::uint32_t>(draw_index(rng, d)));
      val.push_back(rng.normal());
    }
    SparseRow row(std::move(idx), std::move(val), d);
    labels.push_back(planted_label(2.0 * dot(row, w), rng));
    rows.push_back(std::move(row));
  }
  return Dataset(std::move(rows), std::move(labels));
}

Dataset dense_classification(std::size_t n, std::size_t d, std::uint64_t seed) {
  RandomSource rng(seed);
  Vector w(static_cast<Eigen::Index>(d));
  for (auto& wj : w) wj = rng.normal();
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    Vector a(static_cast<Eigen::Index>(d));
    for (auto& aj : a) aj = rng.normal();
    a /= a.norm();
    labels.push_back(planted_label(3.0 * a.dot(w) / std::sqrt(static_cast<double>(d)) * 2.0, rng));
    rows.push_back(SparseRow::from_dense(a));
  }
  return Dataset(std::move(rows), std::move(labels));
}

Dataset dense_regression(std::size_t n, std::size_t d, std::uint64_t seed, double noise) {
  RandomSource rng(seed);
  Vector w(static_cast<Eigen::Index>(d));
  for (auto& wj : w) wj = rng.normal();
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    Vector a(static_cast<Eigen::Index>(d));
    for (auto& aj : a) aj = rng.normal();
    labels.push_back(a.dot(w) + noise * rng.normal());
    rows.push_back(SparseRow::from_dense(a));
  }
  return Dataset(std::move(rows), std::move(labels));
}

Dataset two_d_classification(std::size_t n, std::uint64_t seed) {
  RandomSource rng(seed);
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    // Class regions: a tilted band plus an island, so no line separates them.
    const bool band = 0.8 * u + 0.4 * v + 0.15 * std::sin(4.0 * u) > -0.1;
    const bool island = (u + 0.6) * (u + 0.6) + (v - 0.6) * (v - 0.6) < 0.06;
    double y = (band != island) ? 1.0 : -1.0;
    if (rng.uniform() < 0.05) y = -y;
    rows.emplace_back(std::vector<std::uint32_t>{0, 1}, std::vector<double>{u, v}, 2);
    labels.push_back(y);
  }
  return Dataset(std::move(rows), std::move(labels));
}

}  // namespace vropt::synthetic
