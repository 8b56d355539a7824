#pragma once

#include <cstdint>

#include "vropt/data.hpp"

// Deterministic dataset generators used by tests, the validation suite and
// `vropt gen-data`.
namespace vropt::synthetic {

/// Categorical one-hot data shaped like the LIBSVM `mushrooms` set:
/// n = 8124 rows, 22 attributes one-hot encoded into d = 112 columns, labels
/// in {-1, +1} determined by a latent species (so classes are almost
/// separable). Every row has exactly 22 ones.
Dataset mushrooms_like(std::uint64_t seed = 8124);

/// Sparse Gaussian features; each entry is nonzero with probability
/// `density` (every row gets at least one nonzero). Labels are +-1 from a
/// noisy planted linear classifier.
Dataset sparse_classification(std::size_t n, std::size_t d, double density, std::uint64_t seed);

/// Dense Gaussian rows scaled to unit norm, +-1 labels from a noisy planted
/// classifier.
Dataset dense_classification(std::size_t n, std::size_t d, std::uint64_t seed);

/// Dense Gaussian rows, real targets b = a^T w + noise.
Dataset dense_regression(std::size_t n, std::size_t d, std::uint64_t seed, double noise = 0.1);

/// Two-feature binary classification in [-1, 1]^2 with interleaved class
/// regions, in the spirit of LIBSVM `fourclass`.
Dataset two_d_classification(std::size_t n, std::uint64_t seed);

}  // namespace vropt::synthetic
