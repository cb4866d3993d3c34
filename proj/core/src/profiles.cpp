#include "fdelab/profiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace fdelab {

std::string_view to_string(ProfileMethod method) noexcept {
    switch (method) {
        case ProfileMethod::Shooting: return "shooting";
        case ProfileMethod::RayleighMin: return "rayleigh-min";
        case ProfileMethod::RescaledFlowLimit: return "rescaled-flow-limit";
    }
    return "unknown";
}

ProfileResult describe_profile(Field phi, const FdeParams& p, ProfileMethod method) {
    ProfileResult r;
    r.discrete_residual = hminus1_norm(frechet_Jprime(phi, p));
    r.residual = r.discrete_residual;
    r.energy = energy_J(phi, p);
    r.rayleigh = rayleigh_R(phi, p);
    if (phi.grid()->shape() == Shape::Polar2d) {
        r.angular_variance = angular_variance(phi);
        r.is_radial = r.angular_variance < 1e-6;
    }
    r.method = method;
    r.phi = std::move(phi);
    return r;
}

namespace {

// Nodes are start + i * h for i = 0..cells; values at every node.
struct ShotResult {
    std::vector<double> values;
    bool crossed = false;  // φ became negative somewhere in (start, end]
};

ShotResult shoot(double start, double h, std::size_t cells, int dim, double lam, double m, double phi0,
                 double dphi0, int substeps) {
    using State = std::array<double, 2>;
    const double nm1 = static_cast<double>(dim - 1);
    auto rhs = [&](double r, const State& y) -> State {
        const double src = lam * signed_pow(y[0], m - 1.0);
        if (r <= 0.0) return {y[1], -src / static_cast<double>(dim)};
        return {y[1], -nm1 / r * y[1] - src};
    };
    ShotResult out;
    out.values.reserve(cells + 1);
    State y{phi0, dphi0};
    out.values.push_back(y[0]);
    const double k = h / substeps;
    for (std::size_t c = 0; c < cells; ++c) {
        for (int sub = 0; sub < substeps; ++sub) {
            const double r = start + static_cast<double>(c) * h + sub * k;
            const State k1 = rhs(r, y);
            const State k2 = rhs(r + 0.5 * k, {y[0] + 0.5 * k * k1[0], y[1] + 0.5 * k * k1[1]});
            const State k3 = rhs(r + 0.5 * k, {y[0] + 0.5 * k * k2[0], y[1] + 0.5 * k * k2[1]});
            const State k4 = rhs(r + k, {y[0] + k * k3[0], y[1] + k * k3[1]});
            y[0] += k / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += k / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            if (y[0] < 0.0) out.crossed = true;
            if (!std::isfinite(y[0])) {
                out.crossed = true;
                break;
            }
        }
        out.values.push_back(y[0]);
    }
    return out;
}

}  // namespace

ProfileResult shoot_radial(const FdeParams& p, const GridPtr& grid, const ShootingOptions& opts) {
    if (grid->shape() == Shape::Polar2d) throw Error(ErrorCode::WrongGridShape, "shooting needs a 1-D grid");
    const bool ball = grid->shape() == Shape::Radial && grid->a() == 0.0;
    const int dim = grid->shape() == Shape::Interval ? 1 : grid->dim();
    const double lam = opts.lambda.value_or(p.lambda());
    const double m = p.m();
    const double h = grid->h();
    const std::size_t n = grid->n_radial();
    const std::size_t cells = ball ? n : n + 1;
    const double start = ball ? 0.0 : grid->a();

    auto run = [&](double param, int substeps) {
        return ball ? shoot(start, h, cells, dim, lam, m, param, 0.0, substeps)
                    : shoot(start, h, cells, dim, lam, m, 0.0, param, substeps);
    };
    // Too large a parameter makes φ vanish before the outer boundary.
    auto too_big = [&](double param) { return run(param, opts.substeps).crossed; };

    double lo = 1.0;
    double hi = 1.0;
    int expansions = 0;
    if (too_big(1.0)) {
        while (too_big(lo) && ++expansions < 400) lo *= 0.5;
        hi = 2.0 * lo;
    } else {
        while (!too_big(hi) && ++expansions < 400) hi *= 2.0;
        lo = 0.5 * hi;
    }
    if (expansions >= 400 || !(lo > 0.0) || !std::isfinite(hi))
        throw Error(ErrorCode::ShootingBracketFailure, "no sign change found in the shooting bracket");

    std::size_t iterations = 0;
    for (int k = 0; k < opts.max_bisections && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi;
         ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (too_big(mid) ? hi : lo) = mid;
        ++iterations;
    }

    const ShotResult coarse = run(lo, opts.substeps);
    const ShotResult fine = run(lo, 2 * opts.substeps);
    double err = 0.0;
    for (std::size_t i = 0; i < coarse.values.size(); ++i)
        err = std::max(err, std::abs(coarse.values[i] - fine.values[i]));

    std::vector<double> nodal(n);
    for (std::size_t i = 0; i < n; ++i) nodal[i] = coarse.values[ball ? i : i + 1];
    ProfileResult r = describe_profile(Field(grid, std::move(nodal)), p, ProfileMethod::Shooting);
    if (opts.lambda) {
        // The profile solves a different equation; report its own defect.
        r.discrete_residual = std::numeric_limits<double>::quiet_NaN();
    }
    r.boundary_mismatch = std::abs(coarse.values.back());
    r.residual = std::max(r.boundary_mismatch, err);
    r.iterations = iterations;
    return r;
}

Field default_initializer(const GridPtr& grid) {
    Field e1 = first_eigenvector(grid);
    if (grid->shape() == Shape::Polar2d)
        for (std::size_t k = 0; k < e1.size(); ++k) e1[k] *= 1.0 + 0.1 * std::cos(grid->theta_of(k));
    return e1;
}

ProfileResult minimize_rayleigh(const FdeParams& p, const GridPtr& grid, const Field& init,
                                const RayleighOptions& opts) {
    if (init.grid() != grid) throw Error(ErrorCode::GridMismatch, "initializer lives on another grid");
    if (init.is_zero()) throw Error(ErrorCode::ZeroField, "zero initializer");
    const double m = p.m();
    const LaplaceOperator lap(grid);
    auto normalized = [&](Field w) {
        w *= 1.0 / lm_norm(w, m);
        return w;
    };
    auto scale_of = [&](double dirichlet) { return std::pow(dirichlet / p.lambda(), 1.0 / (m - 2.0)); };

    Field w = normalized(init);
    double energy = lap.dirichlet_form(w);
    // Summation noise in the Dirichlet form grows with the node count.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(grid->size());
    std::size_t it = 0;
    bool converged = false;
    for (; it < opts.max_iter; ++it) {
        const Field beta = power_field(w, m - 1.0);
        const Field z = lap.solve_poisson(beta);
        const double alpha = 1.0 / inner(beta, z);
        const Field g = w - z * alpha;
        const double g2 = lap.dirichlet_form(g);
        if (scale_of(energy) * std::sqrt(std::max(g2, 0.0)) <= opts.gradient_tol) {
            converged = true;
            break;
        }
        double tau = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, tau *= 0.5) {
            Field trial = normalized(w - g * tau);
            const double e_trial = lap.dirichlet_form(trial);
            const bool armijo = e_trial <= energy - 2.0 * opts.armijo * tau * g2;
            // Full steps are monotone in exact arithmetic; allow round-off.
            const bool roundoff = tau == 1.0 && e_trial <= energy * (1.0 + noise);
            if (armijo || roundoff) {
                w = std::move(trial);
                energy = e_trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }

    Field phi = w * scale_of(energy);
    double mass = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) mass += grid->weights()[k] * phi[k];
    if (mass < 0.0) phi *= -1.0;
    ProfileResult r = describe_profile(std::move(phi), p, ProfileMethod::RayleighMin);
    r.iterations = it;
    if (!converged && !(r.residual <= kProfileTolerance))
        throw Error(ErrorCode::NonConvergence, "Rayleigh minimization did not converge");
    return r;
}

double estimate_sobolev_constant(const FdeParams& p, const GridPtr& grid) {
    return 1.0 / minimize_rayleigh(p, grid, default_initializer(grid)).rayleigh;
}

ThresholdResult instability_threshold(double a, double b, int dim, double m) {
    if (!(a > 0.0 && a < b)) throw Error(ErrorCode::InvalidGeometry, "need 0 < a < b");
    if (dim < 2) throw Error(ErrorCode::InvalidGeometry, "need N >= 2");
    const double ratio = (b - a) / (std::numbers::pi * a);
    const double value = std::pow(b / a, std::max(dim - 3, 0)) * ratio * ratio;
    return {value, value < (m - 2.0) / (dim - 1.0)};
}

double angular_variance(const Field& phi) {
    const auto& grid = phi.grid();
    if (grid->shape() != Shape::Polar2d) throw Error(ErrorCode::WrongGridShape, "angular variance needs polar2d");
    const auto wts = grid->weights();
    const std::size_t nt = grid->n_theta();
    double var = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < grid->n_radial(); ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < nt; ++j) mean += phi[grid->index(i, j)];
        mean /= static_cast<double>(nt);
        for (std::size_t j = 0; j < nt; ++j) {
            const std::size_t k = grid->index(i, j);
            var += wts[k] * (phi[k] - mean) * (phi[k] - mean);
            total += wts[k] * phi[k] * phi[k];
        }
    }
    return total > 0.0 ? var / total : 0.0;
}

bool is_radial(const Field& phi, double tol) { return angular_variance(phi) < tol; }

Field lift_radial_to_polar(const Field& radial, const GridPtr& polar) {
    if (polar->shape() != Shape::Polar2d) throw Error(ErrorCode::WrongGridShape, "target must be polar2d");
    const auto& src = radial.grid()->descriptor();
    const auto& dst = polar->descriptor();
    if (src.shape != Shape::Radial || src.dim != 2 || src.a != dst.a || src.b != dst.b || src.n != dst.n)
        throw Error(ErrorCode::DescriptorMismatch, "radial grid does not match the polar radial nodes");
    Field out(polar);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = radial[polar->radial_index(k)];
    return out;
}

ProfileResult radial_profile_on_polar(const FdeParams& p, const GridPtr& polar) {
    if (polar->shape() != Shape::Polar2d) throw Error(ErrorCode::WrongGridShape, "target must be polar2d");
    const auto radial = build_grid(GridDescriptor::radial(2, polar->a(), polar->b(), polar->descriptor().n));
    const ProfileResult r1 = minimize_rayleigh(p, radial, default_initializer(radial));
    ProfileResult r = describe_profile(lift_radial_to_polar(r1.phi, polar), p, ProfileMethod::RayleighMin);
    r.iterations = r1.iterations;
    return r;
}

}  // namespace fdelab
