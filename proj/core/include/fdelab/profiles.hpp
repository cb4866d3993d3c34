#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "fdelab/functionals.hpp"
#include "fdelab/geometry.hpp"

namespace fdelab {

enum class ProfileMethod { Shooting, RayleighMin, RescaledFlowLimit };
std::string_view to_string(ProfileMethod method) noexcept;

/// Stationary solution of -Δφ = λ_m |φ|^{m-2}φ with diagnostics.
struct ProfileResult {
    Field phi;
    /// Acceptance residual. For shooting this is the defect of the ODE
    /// solution (boundary mismatch and integrator error); otherwise
    /// ||J'(φ)||_{H^-1} on the grid.
    double residual = 0.0;
    /// ||J'(φ)||_{H^-1} of the nodal samples on the grid.
    double discrete_residual = 0.0;
    double energy = 0.0;
    double rayleigh = 0.0;
    bool is_radial = true;
    double angular_variance = 0.0;
    ProfileMethod method = ProfileMethod::RayleighMin;
    std::size_t iterations = 0;
    double boundary_mismatch = 0.0;
};

/// Residual bound for an accepted profile.
inline constexpr double kProfileTolerance = 1e-8;

struct ShootingOptions {
    /// Replaces λ_m in the equation when set.
    std::optional<double> lambda;
    /// RK4 substeps per grid cell.
    int substeps = 16;
    int max_bisections = 200;
};

/// Positive radial solution sampled at the grid nodes. Bisects on φ'(a) for
/// intervals and annuli, on φ(0) for balls; the ODE is integrated with RK4.
ProfileResult shoot_radial(const FdeParams& p, const GridPtr& grid, const ShootingOptions& opts = {});

struct RayleighOptions {
    double gradient_tol = 1e-9;
    std::size_t max_iter = 50000;
    double armijo = 1e-4;
};

/// Minimizes R by projected gradient descent in the H1_0 metric on the unit
/// L^m sphere, then rescales onto the Nehari manifold.
ProfileResult minimize_rayleigh(const FdeParams& p, const GridPtr& grid, const Field& init,
                                const RayleighOptions& opts = {});

/// First Dirichlet eigenvector; for polar grids multiplied by 1 + cos(θ)/10 so
/// that non-radial minimizers are reachable.
Field default_initializer(const GridPtr& grid);

/// C_m = 1 / min R on the grid.
double estimate_sobolev_constant(const FdeParams& p, const GridPtr& grid);

struct ThresholdResult {
    double value;
    bool satisfied;
};

/// (b/a)^{(N-3)_+} ((b-a)/(π a))^2 compared with (m-2)/(N-1).
ThresholdResult instability_threshold(double a, double b, int dim, double m);

/// Quadrature-weighted θ-variance of a polar field over ||φ||^2_{L2}.
double angular_variance(const Field& phi);
bool is_radial(const Field& phi, double tol = 1e-6);

/// Field on a 2-D radial grid copied to every angle of a polar grid with the
/// same radial nodes.
Field lift_radial_to_polar(const Field& radial, const GridPtr& polar);

/// Radial least-energy profile computed on the matching 2-D radial grid and
/// lifted; an exact discrete stationary point of the polar problem.
ProfileResult radial_profile_on_polar(const FdeParams& p, const GridPtr& polar);

/// Fills residual, energy, Rayleigh quotient and angular data for φ.
ProfileResult describe_profile(Field phi, const FdeParams& p, ProfileMethod method);

}  // namespace fdelab
