#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "dharm/measures.hpp"

using namespace dharm;

namespace {

double oracle_integral(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(f, a, b, 1e-13);
}

}  // namespace

TEST(Interval, RejectsBadShapes) {
    EXPECT_THROW((Interval{1.0, 1.0, false, false}.validate()), Error);
    EXPECT_THROW((Interval{-kInf, 0.0, true, false}.validate()), Error);
    EXPECT_THROW((Interval{0.0, kInf, false, true}.validate()), Error);
    EXPECT_NO_THROW((Interval{0.0, kInf, true, false}.validate()));
    EXPECT_EQ(describe(Interval{0.0, 1.0, true, false}), "[0, 1)");
}

TEST(Stieltjes, LebesgueMassOfInterval) {
    const auto spec = brownian({0.0, kInf}, 1.0);
    const auto one = [](double) { return 1.0; };
    EXPECT_NEAR(stieltjes_integral(one, Integrator::m, spec, 0.25, 1.0), 0.75, 1e-14);
    EXPECT_EQ(stieltjes_integral(one, Integrator::ds, spec, 0.5, 0.5), 0.0);
    EXPECT_NEAR(stieltjes_integral(one, Integrator::m, spec, 1.0, 0.25), -0.75, 1e-14);
}

TEST(Stieltjes, PolynomialAgainstSpeedDensity) {
    const auto spec = custom({0.0, 2.0}, 1.0, Density([](double) { return 1.0; }),
                             Density([](double x) { return x * x; }));
    const auto f = [](double x) { return x; };
    const double expected = oracle_integral([](double x) { return x * x * x; }, 0.0, 1.0);
    EXPECT_NEAR(expected, 0.25, 1e-12);
    EXPECT_NEAR(stieltjes_integral(f, Integrator::m, spec, 0.0, 1.0), expected, 1e-12);
}

TEST(Stieltjes, AtomsAtRightEndOnly) {
    const auto spec = brownian({0.0, 1.0, true, true}, 0.5, {{0.25, 0.3}, {1.0, 0.5}});
    const auto one = [](double) { return 1.0; };
    EXPECT_NEAR(stieltjes_integral(one, Integrator::m, spec, 0.0, 0.25), 0.25 + 0.3, 1e-14);
    EXPECT_NEAR(stieltjes_integral(one, Integrator::m, spec, 0.25, 0.5), 0.25, 1e-14);
    EXPECT_NEAR(stieltjes_integral(one, Integrator::m, spec, 0.5, 1.0), 0.5 + 0.5, 1e-14);
    EXPECT_NEAR(stieltjes_integral(one, Integrator::ds, spec, 0.0, 1.0), 1.0, 1e-14);
}

TEST(Stieltjes, AtomRecoveredAsLimit) {
    const double w = 0.7;
    const auto spec = brownian({0.0, 1.0}, 0.5, {{0.3, w}});
    const auto one = [](double) { return 1.0; };
    for (double eps : {1e-2, 1e-4, 1e-8}) {
        const double jump = stieltjes_integral(one, Integrator::m, spec, 0.1, 0.3) -
                            stieltjes_integral(one, Integrator::m, spec, 0.1, 0.3 - eps);
        EXPECT_NEAR(jump, w + eps, 1e-12);
    }
}

TEST(Stieltjes, AdditivityOnRandomSplits) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 2.9);
    const auto spec = brownian_drift(0.7, {0.0, 3.0}, 1.0, {{0.4, 0.2}, {2.0, 1.5}});
    const auto f = [](double x) { return std::cos(3.0 * x) + 2.0; };
    for (int trial = 0; trial < 200; ++trial) {
        double p[3] = {u(rng), u(rng), u(rng)};
        std::sort(p, p + 3);
        if (trial == 0) p[1] = 0.4;  // split exactly at an atom
        for (auto which : {Integrator::ds, Integrator::m}) {
            const double whole = stieltjes_integral(f, which, spec, p[0], p[2]);
            const double split = stieltjes_integral(f, which, spec, p[0], p[1]) +
                                 stieltjes_integral(f, which, spec, p[1], p[2]);
            EXPECT_NEAR(whole, split, 1e-12 * std::max(1.0, std::abs(whole)));
        }
    }
}

TEST(Stieltjes, Errors) {
    const auto spec = brownian({0.0, 1.0}, 0.5);
    const auto one = [](double) { return 1.0; };
    EXPECT_THROW(stieltjes_integral(one, Integrator::m, spec, -0.1, 0.5), Error);
    const auto b3 = bessel(3.0, {0.0, kInf}, 1.0);
    try {
        stieltjes_integral(one, Integrator::ds, b3, 0.0, 1.0);
        FAIL() << "expected divergence";
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::non_finite);
    }
}

TEST(ClosedForms, FamilyIncrementsMatchQuadrature) {
    struct Case {
        DiffusionSpec spec;
        double a, b;
    };
    const std::vector<Case> cases{
        {brownian_drift(1.0, {-kInf, kInf}, 0.0), -3.0, 2.5},
        {brownian_drift(-2.0, {-kInf, kInf}, 0.0), 0.1, 4.0},
        {ornstein_uhlenbeck(1.0, {-kInf, kInf}, 0.0), -2.0, 3.5},
        {ornstein_uhlenbeck(0.5, {-kInf, kInf}, 0.0), 3.0, 6.0},
        {bessel(1.5, {0.0, kInf}, 1.0), 1e-6, 3.0},
        {bessel(2.0, {0.0, kInf}, 1.0), 0.25, 9.0},
        {bessel(3.0, {0.0, kInf}, 1.0), 0.5, 1.0 + 1e-9},
    };
    for (const auto& c : cases) {
        const auto& sc = c.spec.scale.measure();
        const auto& sp = c.spec.speed.continuous_part();
        const double os = oracle_integral([&](double x) { return sc(x); }, c.a, c.b);
        const double om = oracle_integral([&](double x) { return sp(x); }, c.a, c.b);
        EXPECT_NEAR(sc.integral(c.a, c.b), os, 1e-11 * std::abs(os)) << c.spec.family_tag();
        EXPECT_NEAR(sp.integral(c.a, c.b), om, 1e-11 * std::abs(om)) << c.spec.family_tag();
        EXPECT_NEAR(sc.integral(c.b, c.a), -os, 1e-11 * std::abs(os));
    }
}

TEST(ClosedForms, InfiniteLimits) {
    const auto drift = brownian_drift(1.0, {-kInf, kInf}, 0.0);
    EXPECT_NEAR(drift.scale.increment(0.0, kInf), 0.5, 1e-15);
    EXPECT_EQ(drift.scale.increment(-kInf, 0.0), kInf);
    const auto ou = ornstein_uhlenbeck(1.0, {-kInf, kInf}, 0.0);
    EXPECT_NEAR(ou.speed.mass(-kInf, kInf), std::sqrt(M_PI), 1e-14);
    const auto b3 = bessel(3.0, {0.0, kInf}, 1.0);
    EXPECT_EQ(b3.scale.increment(0.0, 1.0), kInf);
    EXPECT_NEAR(b3.scale.increment(1.0, kInf), 1.0, 1e-15);
}

TEST(Sigma, BrownianHalfLine) {
    const auto spec = brownian({0.0, kInf}, 1.0);
    const double oracle = oracle_integral([](double xi) { return 1.0 - xi; }, 0.0, 1.0);
    EXPECT_NEAR(sigma(spec, 0.0), oracle, 1e-9);
    EXPECT_NEAR(mu(spec, 0.0), oracle, 1e-9);
    EXPECT_EQ(sigma(spec, 1.0), 0.0);
    EXPECT_EQ(mu(spec, 1.0), 0.0);
    EXPECT_EQ(sigma(spec, kInf), kInf);
    EXPECT_EQ(mu(spec, kInf), kInf);
    EXPECT_NEAR(sigma(spec, 3.0), 2.0, 1e-12);
}

TEST(Sigma, BesselThreeAtZero) {
    const auto spec = bessel(3.0, {0.0, kInf}, 1.0);
    const double oracle = oracle_integral([](double xi) { return (1.0 / xi - 1.0) * xi * xi; }, 0.0, 1.0);
    EXPECT_NEAR(oracle, 1.0 / 6.0, 1e-12);
    EXPECT_NEAR(mu(spec, 0.0), oracle, 1e-9);
    EXPECT_EQ(sigma(spec, 0.0), kInf);
}

TEST(Sigma, NonnegativeAndMonotoneAwayFromReference) {
    const auto spec = brownian_drift(-0.8, {-3.0, 4.0}, 0.5, {{-1.0, 0.4}, {2.0, 0.1}});
    double prev_s = 0.0, prev_m = 0.0;
    for (double x = 0.6; x < 4.0; x += 0.25) {
        const double s = sigma(spec, x), m = mu(spec, x);
        EXPECT_GE(s, prev_s);
        EXPECT_GE(m, prev_m);
        prev_s = s;
        prev_m = m;
    }
    prev_s = prev_m = 0.0;
    for (double x = 0.4; x > -3.0; x -= 0.25) {
        const double s = sigma(spec, x), m = mu(spec, x);
        EXPECT_GE(s, prev_s);
        EXPECT_GE(m, prev_m);
        prev_s = s;
        prev_m = m;
    }
}

TEST(Sigma, FubiniAgreesWithIteratedQuadrature) {
    const auto spec = brownian_drift(0.6, {-2.0, 3.0}, 0.0, {{1.0, 0.25}});
    for (double x : {-1.7, -0.3, 0.8, 2.9}) {
        // sigma = int_e^x M(xi) s'(xi) dxi, mu = int_e^x S(xi) m(dxi), both >= 0.
        const double lo = std::min(x, 0.0), hi = std::max(x, 0.0);
        auto cumulative_mass = [&](double xi) {
            const double M = std::abs(spec.speed.continuous_part().integral(0.0, xi)) +
                             (xi >= 1.0 && x > 0 ? 0.25 : 0.0);
            return M * spec.scale.density(xi);
        };
        // Split at the atom so the oracle never integrates across the jump of M.
        const double sig = hi > 1.0 ? oracle_integral(cumulative_mass, lo, 1.0) +
                                          oracle_integral(cumulative_mass, 1.0, hi)
                                    : oracle_integral(cumulative_mass, lo, hi);
        const double mu_cont = oracle_integral(
            [&](double xi) { return std::abs(spec.scale.value(xi)) * spec.speed.density(xi); }, lo, hi);
        const double mu_atom = (x > 1.0) ? 0.25 * spec.scale.value(1.0) : 0.0;
        EXPECT_NEAR(sigma(spec, x), sig, 1e-9 * std::max(1.0, sig)) << x;
        EXPECT_NEAR(mu(spec, x), mu_cont + mu_atom, 1e-9 * std::max(1.0, mu_cont)) << x;
    }
}

TEST(Sigma, AtNodesMatchesPointwise) {
    const auto spec = ornstein_uhlenbeck(1.0, {-kInf, kInf}, 0.0, {{0.5, 0.2}});
    const std::vector<double> nodes{-2.0, -1.0, -0.1, 0.0, 0.3, 0.5, 0.9, 2.2};
    const auto at = sigma_at(spec, nodes);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        EXPECT_NEAR(at[i], sigma(spec, nodes[i]), 1e-11 * std::max(1.0, at[i])) << nodes[i];
}

TEST(Limits, ScaleAtFiniteEndpoint) {
    const auto spec = brownian({0.0, 1.0}, 0.5);
    const auto r = limit_at_boundary([&](double x) { return spec.scale.value(x); }, spec, Side::right);
    ASSERT_TRUE(r.finite());
    EXPECT_NEAR(r.value, 0.5, 1e-9);
}

TEST(Limits, SpeedMassDivergesNearZero) {
    const auto spec = custom({0.0, 2.0}, 1.0, Density([](double) { return 1.0; }),
                             Density([](double x) { return 1.0 / (x * x); }));
    const auto r =
        limit_at_boundary([&](double x) { return spec.speed.continuous_part().integral(x, 1.0); }, spec, Side::left);
    EXPECT_TRUE(r.divergent());
}

TEST(Limits, LogarithmicDivergenceIsCertified) {
    const auto spec = bessel(2.0, {0.0, kInf}, 1.0);
    const auto limits = endpoint_limits(spec, Side::left);
    EXPECT_TRUE(limits.s.divergent());
    EXPECT_TRUE(limits.mass.finite());
    EXPECT_NEAR(limits.mass.value, 0.5, 1e-9);
    EXPECT_TRUE(limits.sigma.divergent());
    EXPECT_TRUE(limits.mu.finite());
    EXPECT_NEAR(limits.mu.value, 0.25, 1e-7);  // int_0^1 x log(1/x) dx
}

TEST(Limits, SlowAlgebraicConvergenceIsFinite) {
    // s' = x^-0.9 near 0: s(0+) = -10 relative to e = 1.
    const auto spec = custom({0.0, 2.0}, 1.0, Density([](double x) { return std::pow(x, -0.9); }),
                             Density([](double) { return 1.0; }));
    const auto limits = endpoint_limits(spec, Side::left);
    ASSERT_TRUE(limits.s.finite());
    EXPECT_NEAR(limits.s.value, 10.0, 1e-4);
}

TEST(Limits, UndecidedSequence) {
    LimitOptions opts;
    opts.max_steps = 10;
    const auto r = limit_at_boundary([](int k) { return static_cast<double>(k); }, opts);
    EXPECT_TRUE(r.divergent());
    const auto osc = limit_at_boundary([](int k) { return std::sqrt(static_cast<double>(k)); }, opts);
    EXPECT_EQ(osc.kind, LimitResult::Kind::undecided);
    EXPECT_THROW(static_cast<void>(osc.extended()), Error);
}

TEST(Tabulated, TablesAndTails) {
    const CumulativeTable scale{{0.0, 0.5, 1.0}, {0.0, 0.3, 1.0}, -0.5, std::nullopt};
    const CumulativeTable speed{{0.0, 0.2, 1.0}, {0.0, 1.0, 2.0}, std::nullopt, -1.5};
    const auto spec = tabulated({0.0, 1.0}, 0.5, scale, speed);
    // Scale with a finite tail at l: s(0+) = -0.3.
    EXPECT_NEAR(spec.scale.value(0.0), -0.3, 1e-14);
    EXPECT_NEAR(spec.scale.value(1.0), 0.7, 1e-14);
    const auto& sd = spec.scale.measure();
    EXPECT_NEAR(oracle_integral([&](double x) { return sd(x); }, 0.0, 0.5), 0.3, 1e-9);
    // Speed tail at r with exponent -1.5 is non-integrable.
    EXPECT_EQ(spec.speed.mass(0.5, 1.0), kInf);
    const auto right = endpoint_limits(spec, Side::right);
    EXPECT_TRUE(right.s.finite());
    EXPECT_TRUE(right.mass.divergent());
    EXPECT_TRUE(right.mu.divergent());
    // a = 0 (linear scale), b = -1.5: a + b + 2 = 0.5 > 0, so sigma finite.
    EXPECT_TRUE(right.sigma.finite());
}

TEST(Tabulated, RejectsNonMonotoneTables) {
    const CumulativeTable bad{{0.0, 0.5, 1.0}, {0.0, 0.3, 0.3}, std::nullopt, std::nullopt};
    EXPECT_THROW(density_from_table(bad), Error);
    const CumulativeTable short_range{{0.0, 0.9}, {0.0, 1.0}, std::nullopt, std::nullopt};
    EXPECT_THROW(tabulated({0.0, 1.0}, 0.5, short_range, short_range), Error);
}
