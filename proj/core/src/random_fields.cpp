#include "fdelab/random_fields.hpp"

#include <cmath>
#include <numbers>

#include "fdelab/functionals.hpp"

namespace fdelab {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

Field smooth_positive_field(const GridPtr& grid, Rng& rng, double roughness, int terms) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> radial(static_cast<std::size_t>(terms));
    std::vector<double> cosine(static_cast<std::size_t>(terms));
    std::vector<double> sine(static_cast<std::size_t>(terms));
    for (int k = 0; k < terms; ++k) {
        const double amp = roughness / (k + 1);
        radial[static_cast<std::size_t>(k)] = amp * normal(rng);
        cosine[static_cast<std::size_t>(k)] = amp * normal(rng);
        sine[static_cast<std::size_t>(k)] = amp * normal(rng);
    }
    const bool polar = grid->shape() == Shape::Polar2d;
    const double a = grid->a();
    const double len = grid->b() - a;
    Field out = first_eigenvector(grid);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double xi = (grid->radius_of(i) - a) / len;
        const double th = grid->theta_of(i);
        double e = 0.0;
        for (int k = 0; k < terms; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            e += radial[kk] * std::cos((k + 1) * std::numbers::pi * xi);
            if (polar) e += cosine[kk] * std::cos((k + 1) * th) + sine[kk] * std::sin((k + 1) * th);
        }
        out[i] *= std::exp(e);
    }
    return out;
}

Field random_mode_direction(const GridPtr& grid, Rng& rng, std::size_t modes) {
    const auto basis = dirichlet_modes(grid, modes);
    std::normal_distribution<double> normal(0.0, 1.0);
    Field out(grid);
    for (const auto& mode : basis) out += mode.vector * normal(rng);
    const double h = h10_norm(out);
    if (!(h > 0.0)) throw Error(ErrorCode::ZeroField, "degenerate random direction");
    out *= 1.0 / h;
    return out;
}

}  // namespace fdelab
