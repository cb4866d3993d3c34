#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "fdelab/functionals.hpp"
#include "fdelab/geometry.hpp"

namespace fdelab {

/// Step-control and solver settings shared by the physical and rescaled
/// integrators.
///
/// For the physical flow the step bounds are relative to the data time scale
/// λ_m ||u0||_m^{m-2} / R(u0)^2, which makes the integrator covariant under
/// u0 -> c u0. For the rescaled flow they are absolute increments of s.
/// `drop_*` bound the relative change per accepted step: the relative drop of
/// the L^m norm (physical) or ||v+ - v||_m / ||v||_m (rescaled).
struct EvolutionConfig {
    double dt_init = 1e-3;
    double dt_min = 1e-15;
    double dt_max = 0.5;
    double newton_tol = 1e-12;
    int newton_max_iter = 40;
    double extinction_floor_rel = 1e-6;
    double extinction_norm_floor = 1e-200;
    std::size_t max_steps = 200000;
    double drop_min = 1e-3;
    double drop_target = 5e-3;
    double drop_max = 2e-2;
    /// Keep every k-th field; 0 keeps only the first and last.
    std::size_t snapshot_stride = 0;
    /// Rescaled flow only: Nehari lock engages when the relative residual of
    /// the Nehari-projected state drops below this value. 0 disables,
    /// infinity locks every step.
    double phase_lock_threshold = 1e-2;

    static EvolutionConfig physical();
    static EvolutionConfig rescaled();
    /// Fixed step of size `ds` (rescaled) with the lock disabled.
    static EvolutionConfig fixed_step(double ds);

    void validate() const;
};

enum class ExtinctionMethod { FloorCrossing, PowerLawFit };
std::string_view to_string(ExtinctionMethod method) noexcept;

struct ExtinctionEstimate {
    double t_star = 0.0;
    ExtinctionMethod method = ExtinctionMethod::FloorCrossing;
    double fit_exponent = 0.0;
    double fit_residual = 0.0;
    /// t_star minus the last accepted time, kept separately for precision.
    double tail = 0.0;
    std::size_t window_points = 0;
    double lower_bound = 0.0;
    double upper_bound = std::numeric_limits<double>::infinity();
};

struct Snapshot {
    std::size_t step;
    double time;
    Field field;
};

struct Trajectory {
    std::vector<double> times;
    /// step_sizes[k] = times[k+1] - times[k] as integrated.
    std::vector<double> step_sizes;
    std::vector<EnergyReport> monitors;
    std::vector<Snapshot> snapshots;
    std::size_t rejected_steps = 0;

    std::size_t accepted_steps() const noexcept { return step_sizes.size(); }
    /// t_star - times[k], accumulated backwards from the last step.
    std::vector<double> remaining_times(double tail) const;
};

/// One implicit Euler step of d_t(|u|^{m-2}u) = Δu solved by damped Newton
/// on the nodal values of u+.
Field step_fde(const Field& u, double dt, const FdeParams& p, const EvolutionConfig& cfg);

/// Sees every accepted state (t, u), including the initial one.
using FdeObserver = std::function<void(double t, const Field& u)>;

/// Integrates until the L^m norm crosses the floor and extrapolates the
/// extinction time from ||u||_{H1_0}^{m-2}, linear in t* - t near the end.
/// `sobolev_constant` (C_m on the same grid) enables the upper bound.
std::pair<Trajectory, ExtinctionEstimate> evolve_fde(const Field& u0, const FdeParams& p,
                                                     const EvolutionConfig& cfg,
                                                     std::optional<double> sobolev_constant = {},
                                                     const FdeObserver& observer = {});

/// Least-squares slope of log||u||_{H1_0} against log(t* - t) over the final
/// decade of decay.
double fit_extinction_rate(const Trajectory& traj, const ExtinctionEstimate& est, const FdeParams& p);

/// Extinction time with first-order step bias removed by Richardson
/// extrapolation over two drop targets.
double estimate_extinction_time(const Field& u0, const FdeParams& p, const EvolutionConfig& cfg);

ExtinctionService make_extinction_service(const FdeParams& p, const EvolutionConfig& cfg);

namespace detail {

/// Solves W|x|^{m-2}x + c K x = W g for x by damped Newton from `guess`.
Field solve_monotone(const Field& g, const Field& guess, double c, const FdeParams& p,
                     const EvolutionConfig& cfg, ShiftedSolver& solver);

}  // namespace detail

}  // namespace fdelab
