#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fdelab/profiles.hpp"
#include "fdelab/random_fields.hpp"
#include "fdelab/rescaled.hpp"

using namespace fdelab;

namespace {

const FdeParams kP3(3.0, 1);

const ProfileResult& profile_1d() {
    static const ProfileResult phi = [] {
        const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 96));
        return minimize_rayleigh(kP3, g, default_initializer(g));
    }();
    return phi;
}

Field on_phase_set(const Field& w, const FdeParams& p) {
    return w * phase_scale(w, p, make_extinction_service(p, EvolutionConfig::physical()));
}

Field positive_sample(std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return smooth_positive_field(profile_1d().phi.grid(), rng);
}

}  // namespace

TEST(RescaleFromPhysical, SeparableSolutionMapsToProfile) {
    const Field& phi = profile_1d().phi;
    EvolutionConfig cfg = EvolutionConfig::physical();
    cfg.snapshot_stride = 25;
    const auto [traj, est] = evolve_fde(phi, kP3, cfg);
    const auto rt = rescale_from_physical(traj, est, kP3);
    ASSERT_EQ(rt.s_times.size(), traj.times.size());
    EXPECT_EQ(rt.s_times.front(), 0.0);
    for (std::size_t k = 1; k < rt.s_times.size(); ++k) ASSERT_GT(rt.s_times[k], rt.s_times[k - 1]);
    const double ref = h10_norm(phi);
    for (const auto& snap : rt.snapshots) {
        if (snap.time > 8.0) break;
        EXPECT_LT(h10_norm(snap.field - phi), 2e-2 * ref) << "s=" << snap.time;
    }
}

TEST(RescaleFromPhysical, InitialPointAndRoundTrip) {
    const Field u0 = positive_sample(5) * 3.0;
    EvolutionConfig cfg = EvolutionConfig::physical();
    cfg.snapshot_stride = 40;
    const auto [traj, est] = evolve_fde(u0, kP3, cfg);
    const auto rt = rescale_from_physical(traj, est, kP3);
    ASSERT_EQ(rt.snapshots.size(), traj.snapshots.size());
    EXPECT_LT(linf_norm(rt.snapshots[0].field - u0 * std::pow(est.t_star, -1.0)), 1e-14 * linf_norm(u0));
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        const Field back = physical_from_rescaled(rt.snapshots[i].field, rt.snapshots[i].time, est.t_star, kP3);
        const Field& u = traj.snapshots[i].field;
        EXPECT_LE(linf_norm(back - u), 1e-12 * linf_norm(u) + 1e-300) << i;
    }
}

TEST(StepRescaled, ProfileIsStationary) {
    const Field& phi = profile_1d().phi;
    const Field next = step_rescaled(phi, 0.1, kP3, EvolutionConfig::rescaled());
    EXPECT_LT(linf_norm(next - phi), 1e-8 * linf_norm(phi));
}

TEST(StepRescaled, EnergyDoesNotIncrease) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Field v = positive_sample(s) * 4.0;
        const Field next = step_rescaled(v, 0.05, kP3, EvolutionConfig::rescaled());
        EXPECT_LE(energy_J(next, kP3), energy_J(v, kP3) + 1e-12);
    }
}

TEST(EvolveRescaled, ProfileTrajectoryIsConstant) {
    const Field& phi = profile_1d().phi;
    const auto rt = evolve_rescaled(phi, 5.0, kP3, EvolutionConfig::rescaled(), [&](double, const Field& v) {
        EXPECT_LT(linf_norm(v - phi), 1e-7 * linf_norm(phi));
    });
    EXPECT_TRUE(rt.converged);
}

TEST(EvolveRescaled, PhaseSetDataConvergesWithinBounds) {
    const Field v0 = on_phase_set(positive_sample(21), kP3);
    const double bound = h10_bound_on_phase_set(v0, kP3);
    double sup2 = 0.0;
    const auto rt = evolve_rescaled(v0, 20.0, kP3, EvolutionConfig::rescaled(),
                                    [&](double, const Field& v) { sup2 = std::max(sup2, std::pow(h10_norm(v), 2)); });
    EXPECT_TRUE(rt.converged);
    EXPECT_LT(rt.terminal_residual, 1e-6);
    EXPECT_LE(sup2, bound);
    EXPECT_NEAR(energy_J(rt.terminal, kP3), profile_1d().energy, 1e-6 * profile_1d().energy);
}

TEST(EvolveRescaled, LyapunovLedgerAndChainRule) {
    const auto g = build_grid(GridDescriptor::radial(3, 0.0, 1.0, 48));
    const FdeParams p(4.0, 3);
    Rng rng = make_rng(2);
    const Field v0 = smooth_positive_field(g, rng, 0.5) * 2.0 + random_mode_direction(g, rng);
    const auto rt = evolve_rescaled(v0, 3.0, p, EvolutionConfig::fixed_step(0.01));
    ASSERT_EQ(rt.ledger.size(), rt.accepted_steps());
    for (std::size_t k = 0; k < rt.accepted_steps(); ++k) {
        const double scale = std::max(1.0, std::abs(rt.monitors[k].J));
        EXPECT_LE(rt.ledger[k], 1e-10 * scale) << k;
        EXPECT_GE(rt.dissipation[k], -1e-12);
        EXPECT_LE(rt.monitors[k + 1].R, rt.monitors[k].R * (1.0 + 1e-10));
        EXPECT_TRUE(rt.chain_rule[k].holds) << k;
    }
}

TEST(EvolveRescaled, StaysOnPhaseSet) {
    const Field v0 = on_phase_set(positive_sample(8), kP3);
    EvolutionConfig cfg = EvolutionConfig::fixed_step(0.02);
    cfg.snapshot_stride = 50;
    const auto rt = evolve_rescaled(v0, 3.0, kP3, cfg);
    ASSERT_GE(rt.snapshots.size(), 3u);
    const auto service = make_extinction_service(kP3, EvolutionConfig::physical());
    for (std::size_t i = 1; i <= 3; ++i) EXPECT_NEAR(service(rt.snapshots[i].field), 1.0, 0.03) << i;
}

TEST(UniformLinf, SeparableTrajectoryGivesProfileMax) {
    const Field& phi = profile_1d().phi;
    const auto rt = evolve_rescaled(phi, 2.0, kP3, EvolutionConfig::fixed_step(0.05));
    for (double s0 : {0.1, 0.3, 0.6}) {
        const auto rep = check_uniform_linf(rt, s0, kP3);
        EXPECT_TRUE(rep.finite);
        EXPECT_NEAR(rep.sup_linf, linf_norm(phi), 1e-8 * linf_norm(phi));
    }
}

TEST(UniformLinf, RatiosClusterAcrossFamily) {
    std::vector<double> ratios;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Field v0 = on_phase_set(positive_sample(60 + s), kP3);
        const auto rt = evolve_rescaled(v0, 2.0, kP3, EvolutionConfig::rescaled());
        const auto rep = check_uniform_linf(rt, 0.3, kP3);
        ASSERT_TRUE(rep.finite);
        ratios.push_back(rep.ratio);
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    EXPECT_LE(*hi / *lo, 10.0);
}

TEST(UniformLinf, RejectsBadOffsetAndShortTrajectory) {
    const auto rt = evolve_rescaled(profile_1d().phi, 0.05, kP3, EvolutionConfig::fixed_step(0.01));
    EXPECT_THROW(check_uniform_linf(rt, 1.0, kP3), Error);
    try {
        check_uniform_linf(rt, 0.3, kP3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TrajectoryTooShort);
    }
    EXPECT_DOUBLE_EQ(FdeParams(3.0, 2).kappa(), 4.0);
}

TEST(ContinuousDependence, IdenticalDataAreFlagged) {
    const Field v = positive_sample(1);
    const auto rep = check_continuous_dependence(v, v, 1.0, kP3, EvolutionConfig::fixed_step(0.01));
    EXPECT_TRUE(rep.identical);
    EXPECT_TRUE(rep.holds);
}

TEST(ContinuousDependence, GronwallBoundHolds) {
    const Field a = on_phase_set(positive_sample(4), kP3);
    const auto rep = check_continuous_dependence(a, a * (1.0 + 1e-3), 5.0, kP3, EvolutionConfig::fixed_step(0.01));
    ASSERT_FALSE(rep.ratio.empty());
    EXPECT_DOUBLE_EQ(rep.s.front(), 0.0);
    EXPECT_NEAR(rep.ratio.front(), 1.0, 1e-12);
    EXPECT_LE(rep.max_ratio, 1.01);
    EXPECT_TRUE(rep.holds);
}
