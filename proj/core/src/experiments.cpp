#include "fdelab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>

#include "fdelab/fit.hpp"
#include "fdelab/random_fields.hpp"
#include "fdelab/rescaled.hpp"

namespace fdelab {

unsigned default_thread_count() {
    if (const char* env = std::getenv("FDE_LAB_THREADS")) {
        unsigned value = 0;
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
        if (ec == std::errc() && *ptr == '\0' && value > 0) return value;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1u, threads));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(workers, count); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void StabilityProbeConfig::validate() const {
    if (!(delta >= 0.0)) throw Error(ErrorCode::MalformedConfig, "delta must be >= 0");
    if (!(effective_epsilon() > delta)) throw Error(ErrorCode::MalformedConfig, "epsilon must exceed delta");
    if (num_samples < 4) throw Error(ErrorCode::MalformedConfig, "need at least 4 samples");
    if (!(s_horizon > 0.0)) throw Error(ErrorCode::MalformedConfig, "s_horizon must be positive");
    if (direction_modes < 1) throw Error(ErrorCode::MalformedConfig, "need at least one direction mode");
}

std::string_view to_string(ProbeVerdict verdict) noexcept {
    return verdict == ProbeVerdict::DepartureObserved ? "departure-observed" : "stable-evidence";
}

double ProbeReport::min_terminal_energy() const noexcept {
    double out = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) out = std::min(out, s.terminal_energy);
    return out;
}

namespace {

// Phase-set projection of w; ProjectionFailure when t* cannot be estimated.
double project_scale(const Field& w, const FdeParams& p, const EvolutionConfig& extinction_cfg) {
    try {
        return phase_scale(w, p, make_extinction_service(p, extinction_cfg));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ProjectionFailure) throw;
        throw Error(ErrorCode::ProjectionFailure, std::string("extinction estimate failed: ") + e.what());
    }
}

EvolutionConfig with_lock(EvolutionConfig cfg) {
    if (!(cfg.phase_lock_threshold > 0.0)) cfg.phase_lock_threshold = EvolutionConfig{}.phase_lock_threshold;
    return cfg;
}

}  // namespace

ProbeReport stability_probe(const ProfileResult& phi, const StabilityProbeConfig& cfg, const FdeParams& p,
                            const EvolutionConfig& evolution_cfg) {
    cfg.validate();
    if (!(phi.residual <= kProfileTolerance))
        throw Error(ErrorCode::InvalidParams, "profile is not an accepted stationary solution");
    const auto& grid = phi.phi.grid();
    const LaplaceOperator lap(grid);
    const Field neg_lap_phi = lap.apply(phi.phi) * -1.0;

    ProbeReport report;
    report.phi_energy = phi.energy;
    report.phi_h10 = h10_norm(phi.phi);
    report.delta_abs = cfg.delta * report.phi_h10;
    report.epsilon_abs = cfg.effective_epsilon() * report.phi_h10;
    report.samples.resize(cfg.num_samples);

    // ||u|| ~ (t* - t)^{1/(m-2)}, so s = s_horizon sits at this relative
    // level; integrate a decade past it so the tail fit lands beyond.
    const double horizon_level = std::exp(-cfg.s_horizon / (p.m() - 2.0));
    EvolutionConfig ecfg = evolution_cfg;
    ecfg.snapshot_stride = 0;
    ecfg.extinction_floor_rel = std::min(ecfg.extinction_floor_rel, 0.1 * horizon_level);

    const unsigned threads = cfg.threads > 0 ? cfg.threads : default_thread_count();
    parallel_for(cfg.num_samples, threads, [&](std::size_t i) {
        ProbeSample& out = report.samples[i];
        if (cfg.delta == 0.0) {
            // φ is a fixed point of the rescaled step; the physical route
            // would only add its own time-discretization error.
            double sup = 0.0;
            const auto traj = evolve_rescaled(phi.phi, cfg.s_horizon, p, EvolutionConfig::rescaled(),
                                              [&](double, const Field& v) {
                                                  sup = std::max(sup, std::sqrt(std::max(0.0, lap.dirichlet_form(v - phi.phi))));
                                              });
            out.initial_energy = phi.energy;
            out.extinction_time = 1.0;
            out.sup_deviation = sup;
            out.horizon_reached = cfg.s_horizon;
            out.terminal = traj.terminal;
            out.terminal_energy = traj.monitors.back().J;
            out.terminal_rayleigh = traj.monitors.back().R;
            out.terminal_residual = traj.terminal_residual;
            out.shape_residual = traj.terminal_residual / h10_norm(traj.terminal);
            out.converged = traj.converged;
            return;
        }
        Rng rng = make_rng(cfg.seed, i);
        const Field w = phi.phi + random_mode_direction(grid, rng, cfg.direction_modes) * report.delta_abs;
        // v(s) = (t* - t)^{-1/(m-2)} u(t) with s = log(t* / (t* - t)); only
        // scalars are kept per step, fields only near the horizon.
        std::vector<double> norm2, cross;
        std::vector<std::pair<std::size_t, Field>> kept;
        const double keep_level = 100.0 * horizon_level * lm_norm(w, p.m());
        auto observe = [&](double, const Field& u) {
            norm2.push_back(lap.dirichlet_form(u));
            cross.push_back(inner(u, neg_lap_phi));
            if (lm_norm(u, p.m()) <= keep_level) kept.emplace_back(norm2.size() - 1, u);
        };
        std::pair<Trajectory, ExtinctionEstimate> run;
        try {
            run = evolve_fde(w, p, ecfg, {}, observe);
        } catch (const Error& e) {
            throw Error(ErrorCode::ProjectionFailure, std::string("extinction run failed: ") + e.what());
        }
        const auto& [traj, est] = run;
        if (est.method != ExtinctionMethod::PowerLawFit)
            throw Error(ErrorCode::ProjectionFailure, "extinction time fit failed");
        const double t_star = est.t_star;
        const double q = -1.0 / (p.m() - 2.0);
        out.phase_scale = std::pow(t_star, q);
        out.extinction_time = t_star;

        const auto remaining = traj.remaining_times(est.tail);
        const double phi2 = report.phi_h10 * report.phi_h10;
        double sup = 0.0;
        std::size_t last = 0;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            if (std::log(t_star / remaining[k]) > cfg.s_horizon) break;
            const double a = std::pow(remaining[k], q);
            const double dev2 = a * a * norm2[k] - 2.0 * a * cross[k] + phi2;
            sup = std::max(sup, std::sqrt(std::max(0.0, dev2)));
            last = k;
        }
        const Field v0 = w * out.phase_scale;
        out.initial_deviation = h10_norm(v0 - phi.phi);
        out.initial_energy = energy_J(v0, p);
        out.sup_deviation = std::max(sup, out.initial_deviation);
        out.horizon_reached = std::log(t_star / remaining[last]);

        const Field* terminal_u = &w;
        double terminal_rem = remaining[0];
        for (const auto& [k, u] : kept)
            if (k <= last) {
                terminal_u = &u;
                terminal_rem = remaining[k];
            }
        out.terminal = *terminal_u * std::pow(terminal_rem, q);
        const auto rep = energy_report(out.terminal, p);
        out.terminal_energy = rep.J;
        out.terminal_rayleigh = rep.R;
        out.terminal_residual = hminus1_norm(frechet_Jprime(out.terminal, p));
        const Field shaped = out.terminal * nehari_scale(out.terminal, p);
        out.shape_residual = hminus1_norm(frechet_Jprime(shaped, p)) / h10_norm(shaped);
        out.converged = out.shape_residual < 1e-6;
    });

    for (const auto& s : report.samples)
        if (s.sup_deviation >= report.epsilon_abs) report.verdict = ProbeVerdict::DepartureObserved;
    return report;
}

CertificateReport instability_certificate(const ProfileResult& phi_radial, const FdeParams& p,
                                          const EvolutionConfig& extinction_cfg, const std::vector<int>& modes,
                                          const std::vector<double>& amplitudes) {
    const auto& grid = phi_radial.phi.grid();
    if (grid->shape() != Shape::Polar2d) throw Error(ErrorCode::WrongGridShape, "certificate needs polar2d");
    CertificateReport report;
    for (int k : modes)
        for (double eps : amplitudes) report.entries.push_back({k, eps, 1.0, phi_radial.energy, 0.0});

    parallel_for(report.entries.size(), default_thread_count(), [&](std::size_t i) {
        auto& e = report.entries[i];
        if (e.amplitude == 0.0) return;
        Field w = phi_radial.phi;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] *= 1.0 + e.amplitude * std::cos(e.mode * grid->theta_of(j));
        e.phase_scale = project_scale(w, p, extinction_cfg);
        e.energy = energy_J(w * e.phase_scale, p);
        e.gap = phi_radial.energy - e.energy;
    });

    // Gaps at the level of extinction-time noise do not count as descent.
    const double noise = 1e-8 * std::max(1.0, std::abs(phi_radial.energy));
    for (const auto& e : report.entries) {
        if (e.gap > report.best_gap) {
            report.best_gap = e.gap;
            report.best_mode = e.mode;
            report.best_amplitude = e.amplitude;
        }
    }
    report.found = report.best_gap > noise;
    return report;
}

LojasiewiczFit fit_lojasiewicz(const std::vector<LojasiewiczPoint>& cloud, const LojasiewiczWindow& window) {
    std::vector<double> xs, ys;
    for (const auto& pt : cloud) {
        if (!(pt.gap >= window.gap_min && pt.gap <= window.gap_max) || !(pt.residual > 0.0)) continue;
        xs.push_back(std::log(pt.residual));
        ys.push_back(std::log(pt.gap));
    }
    if (xs.size() < window.min_points)
        throw Error(ErrorCode::InsufficientPoints, "too few points inside the fit window");
    const LinearFit lf = linear_fit(xs, ys);
    LojasiewiczFit out;
    out.slope = lf.slope;
    out.intercept = lf.intercept;
    out.rms_residual = lf.rms_residual;
    out.points = xs.size();
    out.theta = 1.0 - 1.0 / lf.slope;
    out.omega = std::exp(lf.intercept / lf.slope);
    out.in_range = out.theta > 0.0 && out.theta <= 0.5 + 1e-9;
    out.theta_clamped = std::clamp(out.theta, 0.0, 0.5);
    return out;
}

LojasiewiczFit fit_lojasiewicz(const ProfileResult& phi, const std::vector<RescaledTrajectory>& trajectories,
                               const LojasiewiczWindow& window) {
    std::vector<LojasiewiczPoint> cloud;
    for (const auto& tr : trajectories)
        for (std::size_t k = 0; k < tr.monitors.size(); ++k)
            cloud.push_back({tr.jprime_hminus1[k], tr.monitors[k].J - phi.energy});
    return fit_lojasiewicz(cloud, window);
}

std::vector<LojasiewiczPoint> synthetic_lojasiewicz_cloud(double theta, double omega, std::size_t count,
                                                          std::uint64_t seed, double noise, double gap_lo,
                                                          double gap_hi) {
    if (!(theta < 1.0 && omega > 0.0 && gap_lo > 0.0 && gap_lo < gap_hi))
        throw Error(ErrorCode::InvalidParams, "invalid synthetic cloud parameters");
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> uniform(std::log(gap_lo), std::log(gap_hi));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<LojasiewiczPoint> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double gap = std::exp(uniform(rng));
        double residual = std::pow(gap, 1.0 - theta) / omega;
        if (noise > 0.0) residual *= std::exp(noise * normal(rng));
        out.push_back({residual, gap});
    }
    return out;
}

std::vector<RescaledTrajectory> lojasiewicz_cloud(const ProfileResult& phi, const FdeParams& p,
                                                  const EvolutionConfig& flow_cfg,
                                                  const EvolutionConfig& extinction_cfg, std::size_t count,
                                                  double delta, std::uint64_t seed, double s_end) {
    const auto& grid = phi.phi.grid();
    const double scale = delta * h10_norm(phi.phi);
    const EvolutionConfig locked = with_lock(flow_cfg);
    std::vector<RescaledTrajectory> out(count);
    parallel_for(count, default_thread_count(), [&](std::size_t i) {
        Rng rng = make_rng(seed, i);
        const Field w = phi.phi + random_mode_direction(grid, rng) * scale;
        const double x = project_scale(w, p, extinction_cfg);
        out[i] = evolve_rescaled(w * x, s_end, p, locked);
    });
    return out;
}

std::vector<NehariPhaseRow> nehari_vs_phase_check(const std::vector<Field>& samples, const FdeParams& p,
                                                  const EvolutionConfig& extinction_cfg) {
    const double m = p.m();
    std::vector<NehariPhaseRow> rows(samples.size());
    parallel_for(samples.size(), default_thread_count(), [&](std::size_t i) {
        const Field& w = samples[i];
        NehariPhaseRow& r = rows[i];
        r.n = nehari_scale(w, p);
        const Field nw = w * r.n;
        const double h2 = LaplaceOperator(nw.grid()).dirichlet_form(nw);
        r.nehari_residual = std::abs(h2 - p.lambda() * std::pow(lm_norm(nw, m), m)) / h2;
        r.nehari_ok = r.nehari_residual <= 1e-10;

        const double predicted = (m - 2.0) / (2.0 * m) * std::pow(p.lambda(), -2.0 / (m - 2.0)) *
                                 std::pow(rayleigh_R(w, p), 2.0 * m / (m - 2.0));
        r.identity_error = std::abs(energy_J(nw, p) - predicted);
        r.identity_ok = r.identity_error <= 1e-8;

        r.x = project_scale(w, p, extinction_cfg);
        // x carries the extinction estimator's error (~1e-5 relative).
        r.ordered = r.x <= r.n * (1.0 + 1e-4);
        r.t_star_projected = estimate_extinction_time(w * r.x, p, extinction_cfg);
        r.phase_ok = std::abs(r.t_star_projected - 1.0) <= 0.02;
    });
    return rows;
}

}  // namespace fdelab
