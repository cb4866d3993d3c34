#pragma once

#include <cstdint>
#include <random>

#include "fdelab/geometry.hpp"

namespace fdelab {

using Rng = std::mt19937_64;

/// e1 * exp(sum of low Fourier terms) with e1 the first Dirichlet
/// eigenvector: smooth, strictly positive inside, zero on the boundary.
Field smooth_positive_field(const GridPtr& grid, Rng& rng, double roughness = 0.3, int terms = 4);

/// Random combination of the lowest `modes` Dirichlet eigenvectors with unit
/// H1_0 norm.
Field random_mode_direction(const GridPtr& grid, Rng& rng, std::size_t modes = 10);

/// Seeds are mixed so that nearby (seed, stream) pairs give unrelated streams.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace fdelab
