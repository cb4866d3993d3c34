#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "fdelab/evolution.hpp"
#include "fdelab/experiments.hpp"
#include "fdelab/io.hpp"
#include "fdelab/profiles.hpp"
#include "fdelab/random_fields.hpp"
#include "fdelab/rescaled.hpp"

#ifndef FDELAB_VERSION
#define FDELAB_VERSION "unknown"
#endif

namespace fdelab::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
    double m = 3.0;
    int dim = 0;  // 0: inferred from the domain
    std::string domain;
    double a = 0.0;
    double b = 1.0;
    std::size_t n = 128;
    std::size_t nr = 0;  // 0: falls back to n
    std::size_t ntheta = 64;
    std::uint64_t seed = 1;
    std::string out = "fdelab-out";

    std::optional<double> dt;
    double s_horizon = 20.0;
    double delta = 1e-2;
    double epsilon = 0.0;
    std::size_t samples = 8;

    std::string init = "random";
    std::string method = "rayleigh";
    std::string profile = "least-energy";
    double scale = 1.0;
    double drop_target = 0.0;
    double floor_rel = 0.0;
    double lock = EvolutionConfig{}.phase_lock_threshold;
    double theta = 0.3;
    bool richardson = false;
};

struct Problem {
    FdeParams params;
    GridPtr grid;
};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::MalformedConfig, what); }

Problem make_problem(const Options& o) {
    GridDescriptor d;
    int dim = o.dim;
    if (o.domain == "interval") {
        if (dim == 0) dim = 1;
        if (dim != 1) config_error("interval requires --N 1");
        d = GridDescriptor::interval(o.a, o.b, o.n);
    } else if (o.domain == "ball" || o.domain == "annulus") {
        if (dim < 2) config_error(o.domain + " requires --N >= 2");
        if (o.domain == "ball" && o.a != 0.0) config_error("ball requires --a 0");
        if (o.domain == "annulus" && !(o.a > 0.0)) config_error("annulus requires --a > 0");
        d = GridDescriptor::radial(dim, o.a, o.b, o.n);
    } else if (o.domain == "polar") {
        if (dim == 0) dim = 2;
        if (dim != 2) config_error("polar requires --N 2");
        d = GridDescriptor::polar2d(o.a, o.b, o.nr ? o.nr : o.n, o.ntheta);
    } else {
        config_error("unknown domain '" + o.domain + "'");
    }
    return {FdeParams(o.m, dim), build_grid(d)};
}

EvolutionConfig physical_config(const Options& o) {
    EvolutionConfig c = EvolutionConfig::physical();
    if (o.dt) c.dt_init = *o.dt;
    if (o.drop_target > 0.0) {
        c.drop_target = o.drop_target;
        c.drop_min = o.drop_target / 5.0;
        c.drop_max = o.drop_target * 4.0;
    }
    if (o.floor_rel > 0.0) c.extinction_floor_rel = o.floor_rel;
    c.dt_min = std::min(c.dt_min, c.dt_init);
    c.dt_max = std::max(c.dt_max, c.dt_init);
    c.validate();
    return c;
}

// Polar problems use a coarser extinction service; Richardson removes the
// leading step bias.
EvolutionConfig extinction_config(const Options& o, const Problem& pr) {
    Options tuned = o;
    if (pr.grid->shape() == Shape::Polar2d) {
        if (tuned.drop_target <= 0.0) tuned.drop_target = 2e-2;
        if (tuned.floor_rel <= 0.0) tuned.floor_rel = 1e-3;
    }
    tuned.dt.reset();
    return physical_config(tuned);
}

EvolutionConfig rescaled_config(const Options& o) {
    EvolutionConfig c = o.dt ? EvolutionConfig::fixed_step(*o.dt) : EvolutionConfig::rescaled();
    if (!o.dt) c.phase_lock_threshold = o.lock;
    c.validate();
    return c;
}

ProfileResult least_energy(const Problem& pr) {
    return minimize_rayleigh(pr.params, pr.grid, default_initializer(pr.grid));
}

ProfileResult reference_profile(const Options& o, const Problem& pr) {
    if (o.profile == "radial") {
        if (pr.grid->shape() != Shape::Polar2d) return least_energy(pr);
        return radial_profile_on_polar(pr.params, pr.grid);
    }
    if (o.profile != "least-energy") config_error("unknown profile '" + o.profile + "'");
    return least_energy(pr);
}

Field initial_field(const Options& o, const Problem& pr) {
    if (o.init == "profile") return least_energy(pr).phi * o.scale;
    if (o.init == "random") {
        Rng rng = make_rng(o.seed);
        return smooth_positive_field(pr.grid, rng) * o.scale;
    }
    config_error("unknown init '" + o.init + "'");
}

json trajectory_stats(const RescaledTrajectory& t) {
    double ledger = 0.0, r_rise = 0.0, lm_id = 0.0;
    for (std::size_t k = 0; k < t.ledger.size(); ++k) {
        ledger = std::max(ledger, t.ledger[k] / std::max(1.0, std::abs(t.monitors[k].J)));
        r_rise = std::max(r_rise, (t.monitors[k + 1].R - t.monitors[k].R) / t.monitors[k].R);
        lm_id = std::max(lm_id, std::abs(t.lm_identity[k]));
    }
    return {{"steps", t.accepted_steps()},
            {"rejected", t.rejected_steps},
            {"locks", t.locks.size()},
            {"max_lock_correction", t.max_lock_correction()},
            {"converged", t.converged},
            {"terminal_residual", t.terminal_residual},
            {"terminal", io::to_json(t.monitors.back())},
            {"max_ledger_excess", ledger},
            {"max_R_rise", r_rise},
            {"max_lm_identity", lm_id}};
}

// --- subcommands ---------------------------------------------------------

json cmd_evolve(const Options& o, const fs::path& out) {
    const Problem pr = make_problem(o);
    const Field u0 = initial_field(o, pr);
    const double cm = estimate_sobolev_constant(pr.params, pr.grid);
    auto cfg = physical_config(o);
    cfg.snapshot_stride = 0;
    const auto [traj, est] = evolve_fde(u0, pr.params, cfg, cm);
    io::write_monitors_csv(out / "monitors.csv", traj);
    io::write_field(out / "initial.bin", u0, 0.0);
    io::write_field(out / "final.bin", traj.snapshots.back().field, traj.snapshots.back().time);
    json s{{"estimate", io::to_json(est)},
           {"sobolev_constant", cm},
           {"steps", traj.accepted_steps()},
           {"rejected", traj.rejected_steps},
           {"initial", io::to_json(traj.monitors.front())}};
    if (o.richardson) s["t_star_richardson"] = estimate_extinction_time(u0, pr.params, cfg);
    return s;
}

json cmd_profile(const Options& o, const fs::path& out) {
    const Problem pr = make_problem(o);
    json s;
    auto emit = [&](const std::string& stem, const ProfileResult& r) {
        io::write_profile(out / stem, r);
        io::write_field_csv(out / (stem + ".csv"), r.phi);
        s[stem] = io::to_json(r);
    };
    if (o.method == "shooting" || o.method == "both") emit("shooting", shoot_radial(pr.params, pr.grid));
    if (o.method == "rayleigh" || o.method == "both") emit("rayleigh", least_energy(pr));
    if (s.empty()) config_error("unknown method '" + o.method + "'");
    if (o.method == "both") {
        s["max_difference"] = linf_norm(io::read_field(out / "shooting.bin", pr.grid) -
                                        io::read_field(out / "rayleigh.bin", pr.grid));
    }
    const auto& primary = s.contains("rayleigh") ? s["rayleigh"] : s["shooting"];
    s["residual"] = primary["residual"];
    s["accepted"] = primary["residual"].get<double>() <= kProfileTolerance;
    return s;
}

json cmd_rescaled(const Options& o, const fs::path& out) {
    const Problem pr = make_problem(o);
    Field w = initial_field(o, pr);
    if (o.init == "profile" && o.delta > 0.0) {
        Rng rng = make_rng(o.seed, 1);
        w += random_mode_direction(pr.grid, rng) * (o.delta * h10_norm(w));
    }
    const double x = phase_scale(w, pr.params, make_extinction_service(pr.params, extinction_config(o, pr)));
    const Field v0 = w * x;
    const auto traj = evolve_rescaled(v0, o.s_horizon, pr.params, rescaled_config(o));
    io::write_rescaled_csv(out / "rescaled.csv", traj);
    io::write_field(out / "initial.bin", v0, 0.0);
    io::write_field(out / "terminal.bin", traj.terminal, traj.s_times.back());
    json s = trajectory_stats(traj);
    s["phase_scale"] = x;
    s["h10_bound"] = h10_bound_on_phase_set(v0, pr.params);
    json locks = json::array();
    for (const auto& l : traj.locks) locks.push_back({{"step", l.step}, {"s", l.s}, {"scale", l.scale}});
    s["lock_events"] = locks;
    return s;
}

StabilityProbeConfig probe_config(const Options& o) {
    StabilityProbeConfig c;
    c.delta = o.delta;
    c.epsilon = o.epsilon;
    c.num_samples = o.samples;
    c.s_horizon = o.s_horizon;
    c.seed = o.seed;
    c.validate();
    return c;
}

json cmd_probe(const Options& o, const fs::path& out) {
    const Problem pr = make_problem(o);
    const ProfileResult phi = reference_profile(o, pr);
    const auto report = stability_probe(phi, probe_config(o), pr.params, extinction_config(o, pr));
    io::write_profile(out / "profile", phi);
    for (std::size_t i = 0; i < report.samples.size(); ++i)
        io::write_field(out / "samples" / ("terminal_" + std::to_string(i) + ".bin"), report.samples[i].terminal,
                        o.s_horizon);
    return {{"profile", io::to_json(phi)}, {"probe", io::to_json(report)}};
}

json cmd_annulus(Options o, const fs::path& out) {
    if (o.domain.empty()) o.domain = "polar";
    if (o.domain != "polar") config_error("annulus runs on the polar grid");
    if (o.dim != 0 && o.dim != 2) config_error("annulus experiment needs --N 2");
    const Problem pr = make_problem(o);
    const auto thr = instability_threshold(o.a, o.b, 2, o.m);
    const ProfileResult radial = radial_profile_on_polar(pr.params, pr.grid);
    const ProfileResult minimizer = least_energy(pr);
    const auto ext = extinction_config(o, pr);
    const auto cert = instability_certificate(radial, pr.params, ext);
    io::write_profile(out / "radial", radial);
    io::write_profile(out / "minimizer", minimizer);
    io::write_field_csv(out / "minimizer.csv", minimizer.phi);
    json s{{"threshold", {{"value", thr.value}, {"satisfied", thr.satisfied}}},
           {"radial", io::to_json(radial)},
           {"minimizer", io::to_json(minimizer)},
           {"energy_gap_minimizer", radial.energy - minimizer.energy},
           {"certificate", io::to_json(cert)}};
    if (o.samples > 0) {
        const auto probe = stability_probe(radial, probe_config(o), pr.params, ext);
        s["probe"] = io::to_json(probe);
    }
    return s;
}

json cmd_ls_fit(const Options& o, const fs::path& out) {
    const Problem pr = make_problem(o);
    const auto synthetic = fit_lojasiewicz(synthetic_lojasiewicz_cloud(o.theta, 1.0, 400, o.seed, 0.05));
    const ProfileResult phi = least_energy(pr);
    const auto trajs = lojasiewicz_cloud(phi, pr.params, rescaled_config(o), extinction_config(o, pr), o.samples,
                                         o.delta, o.seed, o.s_horizon);
    {
        std::ofstream csv(out / "cloud.csv");
        if (!csv) throw Error(ErrorCode::IoFailure, "cannot write cloud.csv");
        csv << "trajectory,s,residual,gap\n" << std::setprecision(17);
        for (std::size_t i = 0; i < trajs.size(); ++i)
            for (std::size_t k = 0; k < trajs[i].s_times.size(); ++k)
                csv << i << ',' << trajs[i].s_times[k] << ',' << trajs[i].jprime_hminus1[k] << ','
                    << trajs[i].monitors[k].J - phi.energy << '\n';
    }
    json s{{"synthetic", {{"planted", o.theta}, {"fit", io::to_json(synthetic)}}}, {"profile", io::to_json(phi)}};
    try {
        s["fit"] = io::to_json(fit_lojasiewicz(phi, trajs));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientPoints) throw;
        s["fit"] = nullptr;
        s["fit_error"] = e.what();
    }
    return s;
}

json cmd_invariants(const Options& o, const fs::path&) {
    const Problem pr = make_problem(o);
    const FdeParams& p = pr.params;
    const double m = p.m();
    double nehari = 0.0;
    for (std::size_t i = 0; i < o.samples; ++i) {
        Rng rng = make_rng(o.seed, i);
        const Field w = smooth_positive_field(pr.grid, rng) + random_mode_direction(pr.grid, rng) * 0.5;
        const Field nw = w * nehari_scale(w, p);
        const double predicted = (m - 2.0) / (2.0 * m) * std::pow(p.lambda(), -2.0 / (m - 2.0)) *
                                 std::pow(rayleigh_R(w, p), 2.0 * m / (m - 2.0));
        nehari = std::max(nehari, std::abs(energy_J(nw, p) - predicted));
    }
    Rng rng = make_rng(o.seed, o.samples);
    const Field w = smooth_positive_field(pr.grid, rng);
    const Field v0 = w * phase_scale(w, p, make_extinction_service(p, extinction_config(o, pr)));
    const auto traj = evolve_rescaled(v0, o.s_horizon, p, rescaled_config(o));
    std::size_t chain_failures = 0;
    for (const auto& c : traj.chain_rule) chain_failures += c.holds ? 0 : 1;
    const json stats = trajectory_stats(traj);
    return {{"nehari_identity_max_error", nehari},
            {"nehari_identity_ok", nehari <= 1e-8},
            {"trajectory", stats},
            {"ledger_ok", stats["max_ledger_excess"].get<double>() < 1e-10},
            {"rayleigh_monotone_ok", stats["max_R_rise"].get<double>() <= 1e-10},
            {"chain_rule_failures", chain_failures}};
}

// --- plumbing ------------------------------------------------------------

void add_grid_options(CLI::App* sub, Options& o, bool domain_required) {
    sub->add_option("--m", o.m, "Nonlinearity exponent m > 2")->capture_default_str();
    sub->add_option("--N", o.dim, "Space dimension (0 infers it from the domain)")->capture_default_str();
    auto* dom = sub->add_option("--domain", o.domain, "interval | ball | annulus | polar")
                    ->check(CLI::IsMember({"interval", "ball", "annulus", "polar"}));
    if (domain_required) dom->required();
    sub->add_option("--a", o.a, "Inner radius or left end")->capture_default_str();
    sub->add_option("--b", o.b, "Outer radius or right end")->capture_default_str();
    sub->add_option("--n", o.n, "Radial or 1-D resolution")->capture_default_str();
    sub->add_option("--nr", o.nr, "Polar radial resolution (defaults to --n)")->capture_default_str();
    sub->add_option("--ntheta", o.ntheta, "Polar angular resolution")->capture_default_str();
    sub->add_option("--seed", o.seed, "Seed for random data and directions")->capture_default_str();
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void add_probe_options(CLI::App* sub, Options& o) {
    sub->add_option("--delta", o.delta, "Perturbation size relative to ||phi||_H")->capture_default_str();
    sub->add_option("--epsilon", o.epsilon, "Departure radius relative to ||phi||_H (0: 10 delta)")
        ->capture_default_str();
    sub->add_option("--samples", o.samples, "Number of samples")->capture_default_str();
    sub->add_option("--s-horizon", o.s_horizon, "Rescaled time horizon")->capture_default_str();
}

json versions() {
    return {{"fdelab", FDELAB_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION},
            {"compiler", __VERSION__}};
}

json csv_columns() {
    return {{"monitors.csv", "t,J,R,h10,lm,linf"},
            {"rescaled.csv", "s,J,R,h10,lm,linf,dissipation,Jprime_hminus1"},
            {"field csv", "index,r,theta,value"},
            {"cloud.csv", "trajectory,s,residual,gap"}};
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidGeometry:
        case ErrorCode::ResolutionTooSmall:
        case ErrorCode::InvalidParams:
        case ErrorCode::MalformedConfig:
        case ErrorCode::UnknownSubcommand:
        case ErrorCode::WrongGridShape: return kExitConfig;
        default: return kExitSolver;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Numerical experiments for the fast diffusion equation d_t(|u|^{m-2}u) = Δu", "fdelab"};
    app.config_formatter(std::make_shared<CLI::ConfigINI>());
    app.set_config("--config", "", "INI file with one [section] per subcommand; flags override it");
    app.require_subcommand(1);

    Options o;
    auto* evolve = app.add_subcommand("evolve", "Physical-time evolution and extinction time");
    add_grid_options(evolve, o, true);
    evolve->add_option("--dt", o.dt, "Initial step relative to the data time scale");
    evolve->add_option("--init", o.init, "random | profile")->capture_default_str();
    evolve->add_option("--scale", o.scale, "Multiplier for the initial data")->capture_default_str();
    evolve->add_option("--drop-target", o.drop_target, "Target relative L^m drop per step");
    evolve->add_option("--floor", o.floor_rel, "Extinction floor relative to ||u0||_m");
    evolve->add_flag("--richardson", o.richardson, "Also report the Richardson-extrapolated t*");

    auto* profile = app.add_subcommand("profile", "Stationary profile by shooting or Rayleigh minimization");
    add_grid_options(profile, o, true);
    profile->add_option("--method", o.method, "rayleigh | shooting | both")->capture_default_str();

    auto* rescaled = app.add_subcommand("rescaled", "Rescaled flow from phase-set data");
    add_grid_options(rescaled, o, true);
    rescaled->add_option("--dt", o.dt, "Fixed step ds (adaptive when omitted)");
    rescaled->add_option("--s-horizon", o.s_horizon, "Rescaled time horizon")->capture_default_str();
    rescaled->add_option("--init", o.init, "random | profile")->capture_default_str();
    rescaled->add_option("--delta", o.delta, "Perturbation of the profile for --init profile")->capture_default_str();
    rescaled->add_option("--lock", o.lock, "Nehari lock threshold (0 disables)")->capture_default_str();

    auto* probe = app.add_subcommand("stability-probe", "Perturb a profile and watch the rescaled flow");
    add_grid_options(probe, o, true);
    add_probe_options(probe, o);
    probe->add_option("--dt", o.dt, "Fixed step ds (adaptive when omitted)");
    probe->add_option("--profile", o.profile, "least-energy | radial")->capture_default_str();

    auto* annulus = app.add_subcommand("annulus", "Thin-annulus symmetry breaking on the polar grid");
    add_grid_options(annulus, o, false);
    add_probe_options(annulus, o);
    annulus->add_option("--dt", o.dt, "Fixed step ds for the probe (adaptive when omitted)");

    auto* ls = app.add_subcommand("ls-fit", "Lojasiewicz exponent near the least-energy profile");
    add_grid_options(ls, o, true);
    ls->add_option("--samples", o.samples, "Number of trajectories")->capture_default_str();
    ls->add_option("--delta", o.delta, "Initial perturbation size")->capture_default_str();
    ls->add_option("--s-horizon", o.s_horizon, "Rescaled time horizon")->capture_default_str();
    ls->add_option("--theta", o.theta, "Planted exponent for the synthetic self-test")->capture_default_str();
    ls->add_option("--dt", o.dt, "Fixed step ds (adaptive when omitted)");

    auto* inv = app.add_subcommand("invariants", "Nehari identity, energy ledger and monotonicity checks");
    add_grid_options(inv, o, true);
    inv->add_option("--samples", o.samples, "Random fields for the Nehari identity")->capture_default_str();
    inv->add_option("--s-horizon", o.s_horizon, "Rescaled time horizon")->capture_default_str();
    inv->add_option("--dt", o.dt, "Fixed step ds (adaptive when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const fs::path out = o.out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fs::create_directories(out);
        // Written first so that even a failed run can be reproduced.
        const std::string config_echo = "[" + name + "]\n" + sub->config_to_str(true, false);
        {
            std::ofstream ini(out / "config.ini");
            ini << config_echo;
        }
        json summary;
        if (sub == evolve) summary = cmd_evolve(o, out);
        else if (sub == profile) summary = cmd_profile(o, out);
        else if (sub == rescaled) summary = cmd_rescaled(o, out);
        else if (sub == probe) summary = cmd_probe(o, out);
        else if (sub == annulus) summary = cmd_annulus(o, out);
        else if (sub == ls) summary = cmd_ls_fit(o, out);
        else summary = cmd_invariants(o, out);
        summary = json{{"subcommand", name}, {"result", summary}};
        io::write_json(out / "summary.json", summary);

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        io::write_json(out / "manifest.json", {{"subcommand", name},
                                               {"config", config_echo},
                                               {"rerun", "fdelab --config config.ini " + name},
                                               {"versions", versions()},
                                               {"threads", default_thread_count()},
                                               {"csv_columns", csv_columns()},
                                               {"wall_time_s", wall}});
        std::cout << name << ": wrote " << (out / "summary.json").string() << '\n';
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "fdelab " << name << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "fdelab " << name << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "fdelab " << name << ": " << e.what() << '\n';
        return kExitSolver;
    }
}

}  // namespace fdelab::cli
