#include "fdelab/rescaled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdelab {

double RescaledTrajectory::max_lock_correction() const noexcept {
    double out = 0.0;
    for (const auto& e : locks) out = std::max(out, std::abs(e.scale - 1.0));
    return out;
}

namespace {

Field step_with(const Field& v, double ds, const FdeParams& p, const EvolutionConfig& cfg,
                ShiftedSolver& solver) {
    if (!(lm_norm(v, p.m()) >= cfg.extinction_norm_floor))
        throw Error(ErrorCode::ExtinctInput, "input is below the extinction floor");
    Field g = power_field(v, p.m() - 1.0);
    g *= 1.0 + p.lambda() * ds;
    return detail::solve_monotone(g, v, ds, p, cfg, solver);
}

double mth_power_sum(const Field& v, double m) { return std::pow(lm_norm(v, m), m); }

}  // namespace

Field step_rescaled(const Field& v, double ds, const FdeParams& p, const EvolutionConfig& cfg) {
    if (!(ds > 0.0)) throw Error(ErrorCode::MalformedConfig, "ds must be positive");
    ShiftedSolver solver(v.grid());
    return step_with(v, ds, p, cfg, solver);
}

RescaledTrajectory evolve_rescaled(const Field& v0, double s_end, const FdeParams& p,
                                   const EvolutionConfig& cfg, const RescaledObserver& observer) {
    cfg.validate();
    if (v0.is_zero()) throw Error(ErrorCode::ZeroField, "initial data is zero");
    if (!(s_end > 0.0)) throw Error(ErrorCode::MalformedConfig, "s_end must be positive");
    const double m = p.m();
    const double slack = 1e-12 * std::max(1.0, s_end);

    RescaledTrajectory tr;
    auto record_point = [&](double s, const Field& v) {
        tr.s_times.push_back(s);
        tr.monitors.push_back(energy_report(v, p));
        tr.jprime_hminus1.push_back(hminus1_norm(frechet_Jprime(v, p)));
        if (observer) observer(s, v);
    };
    record_point(0.0, v0);
    tr.snapshots.push_back({0, 0.0, v0});

    ShiftedSolver solver(v0.grid());
    Field v = v0;
    double s = 0.0;
    double ds = cfg.dt_init;
    std::size_t step = 0;
    while (s < s_end - slack) {
        if (step >= cfg.max_steps) throw Error(ErrorCode::MaxStepsExceeded, "rescaled integration too long");
        const double h = std::min(ds, s_end - s);
        Field next;
        try {
            next = step_with(v, h, p, cfg, solver);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NewtonDivergence || ds <= cfg.dt_min) throw;
            ds = std::max(0.5 * ds, cfg.dt_min);
            ++tr.rejected_steps;
            continue;
        }
        const double lm = lm_norm(v, m);
        const double change = lm_norm(next - v, m) / lm;
        if (change > cfg.drop_max && ds > cfg.dt_min) {
            ds = std::max(0.5 * ds, cfg.dt_min);
            ++tr.rejected_steps;
            continue;
        }

        // Step bookkeeping on the raw step, before the lock.
        const auto& prev = tr.monitors.back();
        double diss = 0.0;
        const auto wts = v.grid()->weights();
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double d = (signed_pow(next[k], 0.5 * m) - signed_pow(v[k], 0.5 * m)) / h;
            diss += wts[k] * d * d;
        }
        diss *= p.mu_m();
        const double j_next = energy_J(next, p);
        const double pm_next = mth_power_sum(next, m);
        const double pm = std::pow(lm, m);
        tr.dissipation.push_back(diss);
        tr.ledger.push_back(diss * h + j_next - prev.J);
        tr.lm_identity.push_back((pm_next - pm) / (p.m_conj() * h) + prev.h10_norm * prev.h10_norm -
                                 p.lambda() * pm);
        Field v_t = next - v;
        v_t *= 1.0 / h;
        tr.chain_rule.push_back(chain_rule_report(v_t, next, p));

        ++step;
        s += h;
        if (s_end - s <= slack) s = s_end;

        if (cfg.phase_lock_threshold > 0.0) {
            const double n = nehari_scale(next, p);
            const Field projected = next * n;
            const double rel = hminus1_norm(frechet_Jprime(projected, p)) / h10_norm(projected);
            if (rel < cfg.phase_lock_threshold) {
                next = projected;
                tr.locks.push_back({step, s, n});
            }
        }
        v = std::move(next);
        record_point(s, v);
        if (cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0) tr.snapshots.push_back({step, s, v});

        const double factor =
            change < cfg.drop_min ? 2.0 : std::clamp(cfg.drop_target / std::max(change, 1e-300), 0.5, 2.0);
        ds = std::clamp(ds * factor, cfg.dt_min, cfg.dt_max);
    }
    if (tr.snapshots.back().step != step) tr.snapshots.push_back({step, s, v});
    tr.terminal_residual = tr.jprime_hminus1.back();
    tr.converged = tr.terminal_residual < kConvergedResidual;
    tr.terminal = std::move(v);
    return tr;
}

RescaledTrajectory rescale_from_physical(const Trajectory& u_traj, const ExtinctionEstimate& est,
                                         const FdeParams& p) {
    if (u_traj.times.empty() || u_traj.monitors.size() != u_traj.times.size())
        throw Error(ErrorCode::ShapeMismatch, "trajectory arrays are inconsistent");
    const double m = p.m();
    // Far from t* the direct difference is exact at t = 0; near t* the
    // backward sum keeps precision.
    auto remaining = u_traj.remaining_times(est.tail);
    for (std::size_t k = 0; k < remaining.size(); ++k)
        if (u_traj.times[k] < 0.5 * est.t_star) remaining[k] = est.t_star - u_traj.times[k];
    for (double r : remaining)
        if (!(r > 0.0)) throw Error(ErrorCode::TimeBeyondExtinction, "trajectory reaches t*");
    const double e = -1.0 / (m - 2.0);
    const double log_t_star = std::log(est.t_star);

    RescaledTrajectory tr;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
        const double c = std::pow(remaining[k], e);
        const auto& u = u_traj.monitors[k];
        EnergyReport r;
        r.h10_norm = c * u.h10_norm;
        r.lm_norm = c * u.lm_norm;
        r.linf_norm = c * u.linf_norm;
        r.J = 0.5 * r.h10_norm * r.h10_norm - p.lambda() / m * std::pow(r.lm_norm, m);
        r.R = u.R;
        tr.s_times.push_back(log_t_star - std::log(remaining[k]));
        tr.monitors.push_back(r);
    }
    // Residuals are only available where a field was stored.
    tr.jprime_hminus1.assign(tr.s_times.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& snap : u_traj.snapshots) {
        Field v = snap.field * std::pow(remaining[snap.step], e);
        tr.jprime_hminus1[snap.step] = hminus1_norm(frechet_Jprime(v, p));
        tr.snapshots.push_back({snap.step, tr.s_times[snap.step], std::move(v)});
    }
    tr.terminal = tr.snapshots.back().field;
    tr.terminal_residual = tr.jprime_hminus1[tr.snapshots.back().step];
    tr.converged = tr.terminal_residual < kConvergedResidual;
    return tr;
}

Field physical_from_rescaled(const Field& v, double s, double t_star, const FdeParams& p) {
    return v * std::pow(t_star * std::exp(-s), 1.0 / (p.m() - 2.0));
}

double h10_bound_on_phase_set(const Field& v0, const FdeParams& p) {
    const double m = p.m();
    return 2.0 * energy_J(v0, p) +
           2.0 * std::pow(rayleigh_R(v0, p), 2.0 * m / (m - 2.0)) / (m * std::pow(p.lambda(), 2.0 / (m - 2.0)));
}

UniformLinfReport check_uniform_linf(const RescaledTrajectory& traj, double s0, const FdeParams& p) {
    if (!(s0 > 0.0 && s0 < std::log(2.0)))
        throw Error(ErrorCode::InvalidParams, "s0 must lie in (0, log 2)");
    if (traj.s_times.empty() || traj.s_times.back() < s0)
        throw Error(ErrorCode::TrajectoryTooShort, "trajectory ends before s0");
    UniformLinfReport r;
    r.s0 = s0;
    for (std::size_t k = 0; k < traj.s_times.size(); ++k)
        if (traj.s_times[k] >= s0) r.sup_linf = std::max(r.sup_linf, traj.monitors[k].linf_norm);
    const double m = p.m();
    const double kappa = p.kappa();
    r.structural = std::pow(std::expm1(s0), -p.dim() / kappa) *
                   std::pow(traj.monitors.front().R, 4.0 * m / (kappa * (m - 2.0)));
    r.ratio = r.sup_linf / r.structural;
    r.finite = std::isfinite(r.sup_linf) && std::isfinite(r.ratio);
    return r;
}

ContinuousDependenceReport check_continuous_dependence(const Field& v0a, const Field& v0b, double s_end,
                                                       const FdeParams& p, const EvolutionConfig& cfg) {
    require_same_grid(v0a, v0b);
    EvolutionConfig fixed = cfg;
    fixed.dt_min = fixed.dt_max = fixed.dt_init;
    fixed.drop_min = 0.0;
    fixed.drop_max = std::numeric_limits<double>::infinity();
    fixed.phase_lock_threshold = 0.0;

    ContinuousDependenceReport r;
    const double m = p.m();
    const Field d0 = power_field(v0a, m - 1.0) - power_field(v0b, m - 1.0);
    const double base = std::pow(hminus1_norm(d0), 2.0);
    if (base == 0.0) {
        r.identical = true;
        r.holds = true;
        return r;
    }

    std::vector<Field> path_a;
    evolve_rescaled(v0a, s_end, p, fixed, [&](double, const Field& v) { path_a.push_back(v); });
    std::size_t k = 0;
    evolve_rescaled(v0b, s_end, p, fixed, [&](double s, const Field& v) {
        const Field d = power_field(path_a.at(k++), m - 1.0) - power_field(v, m - 1.0);
        const double ratio = std::pow(hminus1_norm(d), 2.0) / (base * std::exp(2.0 * p.lambda() * s));
        r.s.push_back(s);
        r.ratio.push_back(ratio);
        r.max_ratio = std::max(r.max_ratio, ratio);
    });
    r.holds = r.max_ratio <= 1.01;
    return r;
}

}  // namespace fdelab
