#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fdelab/evolution.hpp"

namespace fdelab {

/// Nehari rescaling applied after a step of the rescaled flow.
struct LockEvent {
    std::size_t step;
    double s;
    double scale;
};

/// Rescaled flow d_s(|v|^{m-2}v) - Δv = λ_m |v|^{m-2}v sampled at accepted
/// steps. Point-indexed arrays have one entry per s value (including s = 0);
/// step-indexed arrays have one entry per accepted step.
struct RescaledTrajectory {
    std::vector<double> s_times;
    std::vector<EnergyReport> monitors;
    /// ||J'(v)||_{H^-1} per point.
    std::vector<double> jprime_hminus1;

    /// μ_m ||(γ(v+) - γ(v))/ds||^2 with γ(v) = |v|^{(m-2)/2}v, per step.
    std::vector<double> dissipation;
    /// dissipation * ds + J(v+) - J(v) per step, before any Nehari rescaling.
    std::vector<double> ledger;
    /// (1/m')(||v+||_m^m - ||v||_m^m)/ds + ||v||_{H1_0}^2 - λ_m ||v||_m^m per step.
    std::vector<double> lm_identity;
    /// Nodal chain-rule inequality outcome per step.
    std::vector<ChainRuleReport> chain_rule;

    std::vector<Snapshot> snapshots;
    std::vector<LockEvent> locks;
    std::size_t rejected_steps = 0;

    bool converged = false;
    double terminal_residual = 0.0;
    Field terminal;

    std::size_t accepted_steps() const noexcept { return dissipation.size(); }
    /// Largest |scale - 1| over all lock events.
    double max_lock_correction() const noexcept;
};

using RescaledObserver = std::function<void(double s, const Field& v)>;

/// Residual below which a terminal field counts as a stationary candidate.
inline constexpr double kConvergedResidual = 1e-6;

/// One convex-split step W|v+|^{m-2}v+ + ds K v+ = (1 + λ_m ds) W |v|^{m-2}v.
Field step_rescaled(const Field& v, double ds, const FdeParams& p, const EvolutionConfig& cfg);

/// Integrates the rescaled flow to `s_end`. The observer sees every accepted
/// state, including the initial one.
RescaledTrajectory evolve_rescaled(const Field& v0, double s_end, const FdeParams& p,
                                   const EvolutionConfig& cfg, const RescaledObserver& observer = {});

/// v = (t* - t)^{-1/(m-2)} u at s = log(t*/(t* - t)); monitors are rescaled
/// for every accepted time, fields only for the stored snapshots.
RescaledTrajectory rescale_from_physical(const Trajectory& u_traj, const ExtinctionEstimate& est,
                                         const FdeParams& p);

/// Inverse change of variables: u = (t* e^{-s})^{1/(m-2)} v.
Field physical_from_rescaled(const Field& v, double s, double t_star, const FdeParams& p);

/// 2J(v0) + 2R(v0)^{2m/(m-2)} / (m λ_m^{2/(m-2)}): bound for sup_s ||v(s)||^2_{H1_0}
/// along a flow started on the phase set.
double h10_bound_on_phase_set(const Field& v0, const FdeParams& p);

struct UniformLinfReport {
    double s0 = 0.0;
    double sup_linf = 0.0;
    /// (e^{s0} - 1)^{-N/κ} R(v0)^{4m/(κ(m-2))}
    double structural = 0.0;
    double ratio = 0.0;
    bool finite = false;
};

UniformLinfReport check_uniform_linf(const RescaledTrajectory& traj, double s0, const FdeParams& p);

struct ContinuousDependenceReport {
    std::vector<double> s;
    /// ||w1(s) - w2(s)||^2_{H^-1} / (||w1(0) - w2(0)||^2_{H^-1} e^{2 λ_m s})
    std::vector<double> ratio;
    double max_ratio = 0.0;
    bool identical = false;
    bool holds = false;
};

/// Evolves both data with identical fixed steps of size cfg.dt_init and the
/// Nehari lock disabled.
ContinuousDependenceReport check_continuous_dependence(const Field& v0a, const Field& v0b, double s_end,
                                                       const FdeParams& p, const EvolutionConfig& cfg);

}  // namespace fdelab
