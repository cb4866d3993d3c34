#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "fdelab/evolution.hpp"
#include "fdelab/profiles.hpp"
#include "fdelab/rescaled.hpp"

namespace fdelab {

/// Worker count from FDE_LAB_THREADS, else the hardware concurrency.
unsigned default_thread_count();

/// Deviation sizes are relative to ||φ||_{H1_0}.
struct StabilityProbeConfig {
    double delta = 1e-2;
    /// Defaults to 10 * delta when left at zero.
    double epsilon = 0.0;
    std::size_t num_samples = 8;
    double s_horizon = 20.0;
    std::uint64_t seed = 1;
    /// 0 uses default_thread_count().
    unsigned threads = 0;
    std::size_t direction_modes = 10;

    double effective_epsilon() const noexcept { return epsilon > 0.0 ? epsilon : 10.0 * delta; }
    void validate() const;
};

enum class ProbeVerdict { StableEvidence, DepartureObserved };
std::string_view to_string(ProbeVerdict verdict) noexcept;

struct ProbeSample {
    double initial_deviation = 0.0;
    double sup_deviation = 0.0;
    double phase_scale = 1.0;
    double initial_energy = 0.0;
    double terminal_energy = 0.0;
    double terminal_residual = 0.0;
    double terminal_rayleigh = 0.0;
    /// Scale-free residual of the Nehari-rescaled terminal state.
    double shape_residual = 0.0;
    double extinction_time = 0.0;
    /// Last rescaled time actually resolved (<= s_horizon).
    double horizon_reached = 0.0;
    bool converged = false;
    Field terminal;
};

struct ProbeReport {
    std::vector<ProbeSample> samples;
    ProbeVerdict verdict = ProbeVerdict::StableEvidence;
    double phi_energy = 0.0;
    double phi_h10 = 0.0;
    double delta_abs = 0.0;
    double epsilon_abs = 0.0;

    double min_terminal_energy() const noexcept;
};

/// For each sample: w = φ + δ d with d a random low-mode direction. The
/// physical flow from w is run to extinction and read in rescaled variables,
/// v(s) = (t* - t)^{-1/(m-2)} u(t), which starts at x(w) w on the phase set.
/// Tracks sup_s ||v(s) - φ||_{H1_0} up to s_horizon. δ = 0 evolves φ itself.
/// Stepping the rescaled flow directly would amplify the phase-set error like
/// e^s; the physical flow has no such mode.
ProbeReport stability_probe(const ProfileResult& phi, const StabilityProbeConfig& cfg, const FdeParams& p,
                            const EvolutionConfig& evolution_cfg);

struct CertificateEntry {
    int mode;
    double amplitude;
    double phase_scale;
    double energy;
    double gap;  // J(φ) - J(v0)
};

struct CertificateReport {
    std::vector<CertificateEntry> entries;
    bool found = false;
    double best_gap = 0.0;
    int best_mode = 0;
    double best_amplitude = 0.0;
};

/// Tries v0 = x(w) w with w = φ (1 + ε cos kθ) for each k in `modes` and ε in
/// `amplitudes`; `found` when some J(v0) < J(φ).
CertificateReport instability_certificate(const ProfileResult& phi_radial, const FdeParams& p,
                                          const EvolutionConfig& extinction_cfg,
                                          const std::vector<int>& modes = {1, 2, 3},
                                          const std::vector<double>& amplitudes = {0.05, 0.1, 0.2});

struct LojasiewiczPoint {
    double residual;  // ||J'(v)||_{H^-1}
    double gap;       // J(v) - J(φ)
};

struct LojasiewiczWindow {
    double gap_min = 1e-10;
    double gap_max = 1e-2;
    std::size_t min_points = 20;
};

struct LojasiewiczFit {
    double theta = 0.0;
    double omega = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
    std::size_t points = 0;
    /// θ inside (0, 1/2].
    bool in_range = false;
    double theta_clamped = 0.0;
};

/// Fits log gap = k log residual + c; θ = 1 - 1/k, ω = exp(c/k).
LojasiewiczFit fit_lojasiewicz(const std::vector<LojasiewiczPoint>& cloud, const LojasiewiczWindow& window = {});
LojasiewiczFit fit_lojasiewicz(const ProfileResult& phi, const std::vector<RescaledTrajectory>& trajectories,
                               const LojasiewiczWindow& window = {});

/// Points on gap^{1-θ} = ω residual with gaps log-uniform in [gap_lo, gap_hi]
/// and optional multiplicative log-normal noise on the residual.
std::vector<LojasiewiczPoint> synthetic_lojasiewicz_cloud(double theta, double omega, std::size_t count,
                                                          std::uint64_t seed, double noise = 0.0,
                                                          double gap_lo = 1e-9, double gap_hi = 1e-3);

/// Rescaled trajectories started from phase-set projections of φ + δ d.
std::vector<RescaledTrajectory> lojasiewicz_cloud(const ProfileResult& phi, const FdeParams& p,
                                                  const EvolutionConfig& flow_cfg,
                                                  const EvolutionConfig& extinction_cfg, std::size_t count,
                                                  double delta, std::uint64_t seed, double s_end = 20.0);

struct NehariPhaseRow {
    double n = 0.0;
    double x = 0.0;
    /// | ||nw||^2_{H1_0} - λ_m ||nw||_m^m | / ||nw||^2_{H1_0}
    double nehari_residual = 0.0;
    double t_star_projected = 0.0;
    /// |J(nw) - (m-2)/(2m) λ_m^{-2/(m-2)} R(w)^{2m/(m-2)}|
    double identity_error = 0.0;
    bool nehari_ok = false;
    bool phase_ok = false;
    bool ordered = false;
    bool identity_ok = false;

    bool passes() const noexcept { return nehari_ok && phase_ok && ordered && identity_ok; }
};

std::vector<NehariPhaseRow> nehari_vs_phase_check(const std::vector<Field>& samples, const FdeParams& p,
                                                  const EvolutionConfig& extinction_cfg);

/// Runs fn(i) for i in [0, count) on up to `threads` workers; rethrows the
/// first exception after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace fdelab
