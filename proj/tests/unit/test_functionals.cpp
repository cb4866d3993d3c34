#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fdelab/evolution.hpp"
#include "fdelab/fit.hpp"
#include "fdelab/functionals.hpp"
#include "fdelab/profiles.hpp"
#include "fdelab/random_fields.hpp"

using namespace fdelab;

namespace {

constexpr double pi = std::numbers::pi;

// Continuum values for w = sin(pi x) on (0,1), m = 3.
const double kSin3 = 4.0 / (3.0 * pi);
const double kJ = pi * pi / 4.0 - (2.0 / 3.0) * kSin3;
const double kR = (pi / std::sqrt(2.0)) / std::cbrt(kSin3);

Field sine(const GridPtr& g) {
    return Field::from_function(g, [](double x, double) { return std::sin(pi * x); });
}

Field random_signed(const GridPtr& g, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return smooth_positive_field(g, rng) + random_mode_direction(g, rng) * 2.0;
}

}  // namespace

TEST(Params, DerivedConstants) {
    const FdeParams p(3.0, 2);
    EXPECT_DOUBLE_EQ(p.lambda(), 2.0);
    EXPECT_DOUBLE_EQ(p.kappa(), 4.0);
    EXPECT_DOUBLE_EQ(p.kappa_m(), 16.0 / 9.0);
    EXPECT_DOUBLE_EQ(p.m_conj(), 1.5);
}

TEST(Params, RejectsOutOfRangeExponents) {
    EXPECT_THROW(FdeParams(2.0, 1), Error);
    EXPECT_THROW(FdeParams(6.0, 3), Error);  // 2N/(N-2) = 6
    EXPECT_NO_THROW(FdeParams(5.9, 3));
    EXPECT_NO_THROW(FdeParams(40.0, 2));
    EXPECT_THROW(FdeParams(3.0, 0), Error);
}

TEST(Energy, ZeroFieldHasZeroEnergy) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 32));
    EXPECT_EQ(energy_J(Field(g), FdeParams(3.0, 1)), 0.0);
}

TEST(Energy, SineMatchesClosedFormAtSecondOrder) {
    const FdeParams p(3.0, 1);
    double prev_j = 0.0, prev_r = 0.0;
    for (std::size_t n : {63, 127, 255}) {
        const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, n));
        const double ej = std::abs(energy_J(sine(g), p) - kJ);
        const double er = std::abs(rayleigh_R(sine(g), p) - kR);
        if (prev_j > 0.0) {
            EXPECT_NEAR(prev_j / ej, 4.0, 0.5);
            EXPECT_NEAR(prev_r / er, 4.0, 0.5);
        }
        prev_j = ej;
        prev_r = er;
    }
    EXPECT_NEAR(kJ, 2.18446, 1e-5);
    EXPECT_NEAR(kR, 2.95601, 1e-5);
    EXPECT_LT(prev_j, 1e-4);
}

TEST(Energy, NehariFieldsSatisfyReducedFormula) {
    const auto g = build_grid(GridDescriptor::radial(2, 1.0, 2.0, 64));
    const FdeParams p(3.5, 2);
    const Field w = random_signed(g, 3);
    const Field nw = w * nehari_scale(w, p);
    EXPECT_NEAR(energy_J(nw, p), (0.5 - 1.0 / p.m()) * std::pow(h10_norm(nw), 2), 1e-10 * energy_J(nw, p));
}

TEST(Rayleigh, ScaleInvariantAndRejectsZero) {
    const auto g = build_grid(GridDescriptor::polar2d(1.0, 2.0, 12, 16));
    const FdeParams p(3.0, 2);
    const Field w = random_signed(g, 5);
    EXPECT_NEAR(rayleigh_R(w * 2.0, p), rayleigh_R(w, p), 1e-13 * rayleigh_R(w, p));
    EXPECT_NEAR(rayleigh_R(w * -0.3, p), rayleigh_R(w, p), 1e-13 * rayleigh_R(w, p));
    try {
        rayleigh_R(Field(g), p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroField);
    }
}

TEST(Gradient, CentralDifferencesMatchFrechetDerivative) {
    for (const auto& d : {GridDescriptor::interval(0.0, 1.0, 40), GridDescriptor::radial(3, 0.0, 1.0, 30),
                          GridDescriptor::polar2d(1.0, 1.5, 10, 16)}) {
        const auto g = build_grid(d);
        const FdeParams p(3.4, g->dim());
        const Field w = random_signed(g, 7);
        Rng rng = make_rng(8);
        const Field z = random_mode_direction(g, rng);
        const double eps = 1e-5;
        const double fd = (energy_J(w + z * eps, p) - energy_J(w - z * eps, p)) / (2.0 * eps);
        const double exact = inner(frechet_Jprime(w, p), z);
        EXPECT_NEAR(fd, exact, 1e-6 * std::abs(exact)) << to_string(g->shape());
    }
}

TEST(Gradient, VanishesAtZero) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 16));
    EXPECT_EQ(frechet_Jprime(Field(g), FdeParams(3.0, 1)).max(), 0.0);
}

TEST(Hminus1, DualToH10) {
    const auto g = build_grid(GridDescriptor::radial(2, 1.0, 3.0, 50));
    const Field w = random_signed(g, 9);
    const Field f = LaplaceOperator(g).apply(w) * -1.0;
    EXPECT_NEAR(hminus1_norm(f), h10_norm(w), 1e-10 * h10_norm(w));
    EXPECT_EQ(hminus1_norm(Field(g)), 0.0);
}

TEST(Hminus1, SineMatchesEigenExpansion) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 255));
    EXPECT_NEAR(hminus1_norm(sine(g)), 1.0 / (pi * std::sqrt(2.0)), 1e-5);
}

TEST(Nehari, ProjectionIsIdempotentAndHomogeneous) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 64));
    const FdeParams p(4.0, 1);
    const Field w = random_signed(g, 11);
    const double n = nehari_scale(w, p);
    EXPECT_NEAR(nehari_scale(w * n, p), 1.0, 1e-10);
    EXPECT_NEAR(nehari_scale(w * 3.0, p), n / 3.0, 1e-12 * n);
    const Field nw = w * n;
    const double h2 = LaplaceOperator(g).dirichlet_form(nw);
    EXPECT_NEAR(h2, p.lambda() * std::pow(lm_norm(nw, p.m()), p.m()), 1e-10 * h2);
}

TEST(Nehari, EnergyRayleighIdentity) {
    const auto g = build_grid(GridDescriptor::radial(3, 0.0, 1.0, 48));
    const FdeParams p(3.0, 3);
    const double m = p.m();
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Field w = random_signed(g, 100 + s);
        const Field nw = w * nehari_scale(w, p);
        const double predicted = (m - 2.0) / (2.0 * m) * std::pow(p.lambda(), -2.0 / (m - 2.0)) *
                                 std::pow(rayleigh_R(w, p), 2.0 * m / (m - 2.0));
        EXPECT_NEAR(energy_J(nw, p), predicted, 1e-8);
    }
}

TEST(Tartar, EqualityCases) {
    const FdeParams p(3.0, 1);
    EXPECT_EQ(tartar_gap(0.7, 0.7, p), 0.0);
    EXPECT_NEAR(tartar_gap(1.0, -1.0, p), 0.0, 1e-15);
}

TEST(Tartar, NonnegativeOnDenseGrid) {
    for (double m : {2.5, 3.0, 4.0, 6.0}) {
        const FdeParams p(m, 1);
        double worst = 0.0;
        const int n = 1000;
        for (int i = 0; i < n; ++i) {
            const double a = -2.0 + 4.0 * i / (n - 1);
            for (int j = 0; j < n; ++j) {
                const double b = -2.0 + 4.0 * j / (n - 1);
                worst = std::min(worst, tartar_gap(a, b, p));
            }
        }
        EXPECT_GE(worst, -1e-12) << "m=" << m;
    }
}

TEST(ChainRule, TrivialWhenStationary) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 32));
    const Field v = random_signed(g, 1);
    const auto r = chain_rule_report(Field(g), v, FdeParams(3.0, 1));
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_TRUE(r.holds);
}

TEST(ChainRule, HoldsForRandomPairs) {
    const auto g = build_grid(GridDescriptor::polar2d(1.0, 2.0, 10, 16));
    for (double m : {2.5, 3.0, 5.0}) {
        const FdeParams p(m, 2);
        for (std::uint64_t s = 0; s < 20; ++s) {
            EXPECT_TRUE(chain_rule_check(random_signed(g, 2 * s), random_signed(g, 2 * s + 1), p));
        }
    }
}

TEST(ChainRule, RejectsMismatchedSizes) {
    const auto g1 = build_grid(GridDescriptor::interval(0.0, 1.0, 16));
    const auto g2 = build_grid(GridDescriptor::interval(0.0, 1.0, 17));
    try {
        chain_rule_check(Field(g1), Field(g2), FdeParams(3.0, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(Sobolev, ConstantInvertsLeastEnergyRayleigh) {
    const FdeParams p(3.0, 1);
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 128));
    const double cm = estimate_sobolev_constant(p, g);
    const auto phi = minimize_rayleigh(p, g, default_initializer(g));
    EXPECT_NEAR(cm * phi.rayleigh, 1.0, 1e-6);
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Field w = random_signed(g, 1000 + s);
        EXPECT_GE(cm, lm_norm(w, 3.0) / h10_norm(w) * (1.0 - 1e-12));
    }
}

TEST(Sobolev, MatchesFineShootingOracle) {
    // Continuum C_3 on (0,1): R of the shooting profile on fine grids,
    // Richardson-extrapolated; the minimizer value is extrapolated the same way.
    const FdeParams p(3.0, 1);
    auto shoot_R = [&](std::size_t n) {
        return shoot_radial(p, build_grid(GridDescriptor::interval(0.0, 1.0, n))).rayleigh;
    };
    const double r_oracle = richardson(shoot_R(4095), shoot_R(8191), 2.0);
    auto min_C = [&](std::size_t n) {
        return estimate_sobolev_constant(p, build_grid(GridDescriptor::interval(0.0, 1.0, n)));
    };
    const double c = richardson(min_C(255), min_C(511), 2.0);
    EXPECT_NEAR(c * r_oracle, 1.0, 1e-6);
}

TEST(PhaseScale, ProfileHasUnitScale) {
    const FdeParams p(3.0, 1);
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 96));
    const auto phi = minimize_rayleigh(p, g, default_initializer(g));
    const double x = phase_scale(phi.phi, p, make_extinction_service(p, EvolutionConfig::physical()));
    EXPECT_NEAR(x, 1.0, 0.02);
}

TEST(PhaseScale, BelowNehariScaleAndRayInvariant) {
    const FdeParams p(3.0, 1);
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 48));
    const auto service = make_extinction_service(p, EvolutionConfig::physical());
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng = make_rng(s);
        const Field w = smooth_positive_field(g, rng);
        const double x = phase_scale(w, p, service);
        EXPECT_LE(x, nehari_scale(w, p) * (1.0 + 1e-9));
        if (s < 3) {
            const double x2 = phase_scale(w * 2.0, p, service);
            const Field diff = w * x - w * (2.0 * x2);
            EXPECT_LT(linf_norm(diff), 1e-8 * linf_norm(w * x));
        }
    }
}
