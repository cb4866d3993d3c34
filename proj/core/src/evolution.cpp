#include "fdelab/evolution.hpp"

#include <algorithm>
#include <cmath>

#include "fdelab/fit.hpp"

namespace fdelab {

EvolutionConfig EvolutionConfig::physical() { return {}; }

EvolutionConfig EvolutionConfig::rescaled() {
    EvolutionConfig c;
    c.dt_init = 1e-2;
    c.dt_min = 1e-10;
    c.dt_max = 0.25;
    c.drop_min = 1e-3;
    c.drop_target = 1e-2;
    c.drop_max = 5e-2;
    return c;
}

EvolutionConfig EvolutionConfig::fixed_step(double ds) {
    EvolutionConfig c = rescaled();
    c.dt_init = c.dt_min = c.dt_max = ds;
    c.drop_min = 0.0;
    c.drop_max = std::numeric_limits<double>::infinity();
    c.phase_lock_threshold = 0.0;
    return c;
}

void EvolutionConfig::validate() const {
    if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max))
        throw Error(ErrorCode::MalformedConfig, "need 0 < dt_min <= dt_init <= dt_max");
    if (!(newton_tol > 0.0)) throw Error(ErrorCode::MalformedConfig, "newton_tol must be positive");
    if (!(extinction_floor_rel > 0.0 && extinction_norm_floor > 0.0))
        throw Error(ErrorCode::MalformedConfig, "extinction floors must be positive");
    if (!(drop_min <= drop_target && drop_target <= drop_max && drop_target > 0.0))
        throw Error(ErrorCode::MalformedConfig, "need drop_min <= drop_target <= drop_max");
    if (newton_max_iter < 1 || max_steps < 1)
        throw Error(ErrorCode::MalformedConfig, "iteration limits must be positive");
    if (phase_lock_threshold < 0.0)
        throw Error(ErrorCode::MalformedConfig, "phase_lock_threshold must be >= 0");
}

std::string_view to_string(ExtinctionMethod method) noexcept {
    return method == ExtinctionMethod::PowerLawFit ? "power-law-fit" : "floor-crossing";
}

std::vector<double> Trajectory::remaining_times(double tail) const {
    std::vector<double> out(times.size(), tail);
    for (std::size_t k = step_sizes.size(); k-- > 0;) out[k] = out[k + 1] + step_sizes[k];
    return out;
}

namespace detail {

namespace {

double weighted_rms(const Eigen::VectorXd& nodal_times_w, std::span<const double> wts) {
    // sqrt(sum F_k^2 / W_k) for F = W r, i.e. the quadrature norm of r.
    double s = 0.0;
    for (Eigen::Index k = 0; k < nodal_times_w.size(); ++k)
        s += nodal_times_w[k] * nodal_times_w[k] / wts[static_cast<std::size_t>(k)];
    return std::sqrt(s);
}

}  // namespace

Field solve_monotone(const Field& g, const Field& guess, double c, const FdeParams& p,
                     const EvolutionConfig& cfg, ShiftedSolver& solver) {
    const auto& grid = g.grid();
    const auto wts = grid->weights();
    const auto& stiff = grid->stiffness();
    const double m = p.m();
    const std::size_t n = g.size();

    Eigen::VectorXd wg(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) wg[static_cast<Eigen::Index>(k)] = wts[k] * g[k];
    const double ref = std::max(weighted_rms(wg, wts), std::numeric_limits<double>::min());

    auto residual = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd f = c * (stiff * x) - wg;
        for (Eigen::Index k = 0; k < x.size(); ++k)
            f[k] += wts[static_cast<std::size_t>(k)] * signed_pow(x[k], m - 1.0);
        return f;
    };

    Eigen::VectorXd x = guess.vec();
    Eigen::VectorXd f = residual(x);
    double norm = weighted_rms(f, wts);
    std::vector<double> slope(n);
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        if (norm <= cfg.newton_tol * ref) return Field(grid, std::vector<double>(x.data(), x.data() + n));
        for (std::size_t k = 0; k < n; ++k)
            slope[k] = (m - 1.0) * std::pow(std::abs(x[static_cast<Eigen::Index>(k)]), m - 2.0);
        const Eigen::VectorXd delta = solver.solve(c, slope, -f);
        double tau = 1.0;
        Eigen::VectorXd trial = x + delta;
        Eigen::VectorXd f_trial = residual(trial);
        double n_trial = weighted_rms(f_trial, wts);
        for (int halving = 0; halving < 30 && !(n_trial < norm); ++halving) {
            tau *= 0.5;
            trial = x + tau * delta;
            f_trial = residual(trial);
            n_trial = weighted_rms(f_trial, wts);
        }
        if (!(n_trial < norm)) {
            // Stagnation at round-off level counts as converged.
            if (norm <= 1e3 * cfg.newton_tol * ref)
                return Field(grid, std::vector<double>(x.data(), x.data() + n));
            throw Error(ErrorCode::NewtonDivergence, "damped Newton made no progress");
        }
        x = std::move(trial);
        f = std::move(f_trial);
        norm = n_trial;
    }
    if (norm <= cfg.newton_tol * ref) return Field(grid, std::vector<double>(x.data(), x.data() + n));
    throw Error(ErrorCode::NewtonDivergence, "Newton iteration limit reached");
}

}  // namespace detail

namespace {

Field step_fde_with(const Field& u, double dt, const FdeParams& p, const EvolutionConfig& cfg,
                    ShiftedSolver& solver, const Field* guess = nullptr) {
    if (!(lm_norm(u, p.m()) >= cfg.extinction_norm_floor))
        throw Error(ErrorCode::ExtinctInput, "input is below the extinction floor");
    return detail::solve_monotone(power_field(u, p.m() - 1.0), guess ? *guess : u, dt, p, cfg, solver);
}

double data_time_scale(const Field& u0, const FdeParams& p) {
    const double lm = lm_norm(u0, p.m());
    const double r = rayleigh_R(u0, p);
    return p.lambda() * std::pow(lm, p.m() - 2.0) / (r * r);
}

}  // namespace

Field step_fde(const Field& u, double dt, const FdeParams& p, const EvolutionConfig& cfg) {
    if (!(dt >= cfg.dt_min && dt <= cfg.dt_max))
        throw Error(ErrorCode::MalformedConfig, "dt outside [dt_min, dt_max]");
    ShiftedSolver solver(u.grid());
    return step_fde_with(u, dt, p, cfg, solver);
}

std::pair<Trajectory, ExtinctionEstimate> evolve_fde(const Field& u0, const FdeParams& p,
                                                     const EvolutionConfig& cfg,
                                                     std::optional<double> sobolev_constant,
                                                     const FdeObserver& observer) {
    cfg.validate();
    if (u0.is_zero()) throw Error(ErrorCode::ZeroField, "initial data is zero");
    const double m = p.m();
    const double scale = data_time_scale(u0, p);
    const double lm0 = lm_norm(u0, m);
    const double floor = std::max(cfg.extinction_norm_floor, cfg.extinction_floor_rel * lm0);
    const double dt_min = cfg.dt_min * scale;
    const double dt_max = cfg.dt_max * scale;

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.monitors.push_back(energy_report(u0, p));
    traj.snapshots.push_back({0, 0.0, u0});
    if (observer) observer(0.0, u0);

    ShiftedSolver solver(u0.grid());
    Field u = u0;
    double lm = lm0;
    double t = 0.0;
    double dt = cfg.dt_init * scale;
    Field u_prev;
    double dt_prev = 0.0;
    std::size_t step = 0;
    while (lm >= floor) {
        if (step >= cfg.max_steps) throw Error(ErrorCode::MaxStepsExceeded, "FDE integration too long");
        Field next;
        try {
            // Linear extrapolation from the last accepted step seeds Newton.
            std::optional<Field> guess;
            if (dt_prev > 0.0) guess = u + (u - u_prev) * (dt / dt_prev);
            next = step_fde_with(u, dt, p, cfg, solver, guess ? &*guess : nullptr);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NewtonDivergence || dt <= dt_min) throw;
            dt = std::max(0.5 * dt, dt_min);
            ++traj.rejected_steps;
            continue;
        }
        const double lm_next = lm_norm(next, m);
        const double drop = 1.0 - lm_next / lm;
        if (drop > cfg.drop_max && dt > dt_min) {
            dt = std::max(0.5 * dt, dt_min);
            ++traj.rejected_steps;
            continue;
        }
        ++step;
        t += dt;
        traj.times.push_back(t);
        traj.step_sizes.push_back(dt);
        traj.monitors.push_back(energy_report(next, p));
        if (observer) observer(t, next);
        if (cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0)
            traj.snapshots.push_back({step, t, next});
        u_prev = std::move(u);
        dt_prev = dt;
        u = std::move(next);
        lm = lm_next;

        const double factor = drop < cfg.drop_min ? 2.0 : std::clamp(cfg.drop_target / drop, 0.5, 2.0);
        dt = std::clamp(dt * factor, dt_min, dt_max);
    }
    if (traj.snapshots.back().step != step) traj.snapshots.push_back({step, t, u});

    ExtinctionEstimate est;
    est.t_star = t;
    est.method = ExtinctionMethod::FloorCrossing;
    est.tail = 0.0;

    // Power-law extrapolation over the final decade of ||u||_{H1_0}.
    const std::size_t last = traj.monitors.size() - 1;
    const double h_last = traj.monitors[last].h10_norm;
    const double noise_cut = 1e3 * std::numeric_limits<double>::epsilon() * traj.monitors[0].h10_norm;
    const auto sigma = traj.remaining_times(0.0);  // t_last - t_k
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k <= last; ++k) {
        const double h = traj.monitors[k].h10_norm;
        if (h <= 10.0 * h_last && h >= noise_cut) {
            xs.push_back(sigma[k]);
            ys.push_back(std::pow(h, m - 2.0));
        }
    }
    if (xs.size() >= 5) {
        const auto fit = linear_fit(xs, ys);
        if (fit.slope > 0.0 && fit.intercept > 0.0) {
            est.tail = fit.intercept / fit.slope;
            est.t_star = t + est.tail;
            est.method = ExtinctionMethod::PowerLawFit;
            est.window_points = xs.size();
            est.fit_residual = fit.rms_residual / ys.front();
        }
    }
    if (est.method == ExtinctionMethod::PowerLawFit) {
        try {
            est.fit_exponent = fit_extinction_rate(traj, est, p);
        } catch (const Error&) {
            est.fit_exponent = 0.0;
        }
    }

    const double r0 = traj.monitors[0].R;
    est.lower_bound = p.lambda() * std::pow(lm0, m - 2.0) / (r0 * r0);
    if (sobolev_constant)
        est.upper_bound = p.lambda() * (*sobolev_constant) * (*sobolev_constant) * std::pow(lm0, m - 2.0);
    return {std::move(traj), est};
}

double fit_extinction_rate(const Trajectory& traj, const ExtinctionEstimate& est, const FdeParams&) {
    if (traj.monitors.size() != traj.times.size() || traj.step_sizes.size() + 1 != traj.times.size())
        throw Error(ErrorCode::ShapeMismatch, "trajectory arrays are inconsistent");
    if (!(est.tail <= 1e-3 * est.t_star))
        throw Error(ErrorCode::InsufficientDecayWindow, "trajectory stops too far from extinction");
    const std::size_t last = traj.monitors.size() - 1;
    const double h_last = traj.monitors[last].h10_norm;
    const double noise_cut = 1e3 * std::numeric_limits<double>::epsilon() * traj.monitors[0].h10_norm;
    const auto remaining = traj.remaining_times(est.tail);
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k <= last; ++k) {
        const double h = traj.monitors[k].h10_norm;
        if (h <= 10.0 * h_last && h >= noise_cut && remaining[k] > 0.0) {
            xs.push_back(std::log(remaining[k]));
            ys.push_back(std::log(h));
        }
    }
    if (xs.size() < 5) throw Error(ErrorCode::InsufficientDecayWindow, "fewer than 5 points in window");
    return linear_fit(xs, ys).slope;
}

double estimate_extinction_time(const Field& u0, const FdeParams& p, const EvolutionConfig& cfg) {
    EvolutionConfig fine = cfg;
    fine.drop_min *= 0.5;
    fine.drop_target *= 0.5;
    fine.drop_max *= 0.5;
    fine.dt_init *= 0.5;
    fine.snapshot_stride = 0;
    EvolutionConfig coarse = cfg;
    coarse.snapshot_stride = 0;
    const double t_coarse = evolve_fde(u0, p, coarse).second.t_star;
    const double t_fine = evolve_fde(u0, p, fine).second.t_star;
    return richardson(t_coarse, t_fine, 1.0);
}

ExtinctionService make_extinction_service(const FdeParams& p, const EvolutionConfig& cfg) {
    return [p, cfg](const Field& w) { return estimate_extinction_time(w, p, cfg); };
}

}  // namespace fdelab
