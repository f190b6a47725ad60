#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dharm/harmonic.hpp"
#include "dharm/oracle.hpp"
#include "support/random_specs.hpp"

using namespace dharm;

namespace {

/// Brownian on (0, 1], alpha: u'' = 2 alpha u with u(0) = 0, u(1) = 1.
double sinh_ratio(double alpha, double x) {
    const double k = std::sqrt(2.0 * alpha);
    return std::sinh(k * x) / std::sinh(k);
}

const DiffusionSpec& half_closed_brownian() {
    static const DiffusionSpec spec = brownian({0.0, 1.0, false, true}, 0.5);
    return spec;
}

/// Target side for a random spec: a finite regular or exit endpoint.
std::optional<Side> pick_target(const BoundaryReport& report, std::mt19937_64& rng) {
    std::vector<Side> sides;
    for (Side side : {Side::left, Side::right}) {
        const auto& end = report.at(side);
        if (end.cls == BoundaryClass::regular || end.cls == BoundaryClass::exit) sides.push_back(side);
    }
    if (sides.empty()) return std::nullopt;
    return sides[std::uniform_int_distribution<std::size_t>(0, sides.size() - 1)(rng)];
}

}  // namespace

TEST(FdExit, BrownianMatchesClosedFormAndHarmonicSpace) {
    const auto est = fd_exit_functional(half_closed_brownian(), 0.5, Side::right, 0.5);
    EXPECT_EQ(est.method, OracleMethod::fd);
    EXPECT_NEAR(est.value, sinh_ratio(0.5, 0.5), 1e-9);
    EXPECT_GE(est.half_width, 0.0);
    EXPECT_GT(est.mesh, 0u);

    const auto basis = harmonic_space(half_closed_brownian(), 0.5);
    ASSERT_TRUE(basis.u_r_norm.has_value());
    EXPECT_NEAR(est.value, basis.u_r_norm->at(0.5), 1e-5);
    EXPECT_NEAR(est.value, 0.4434, 5e-5);
}

TEST(FdExit, TargetEndpointLimitIsOne) {
    const auto& spec = half_closed_brownian();
    EXPECT_EQ(fd_exit_functional(spec, 0.5, Side::right, 1.0).value, 1.0);
    double prev = 0.0;
    for (double x : {0.9, 0.99, 0.999, 0.9999}) {
        const double v = fd_exit_functional(spec, 0.5, Side::right, x).value;
        EXPECT_GT(v, prev);
        EXPECT_NEAR(v, sinh_ratio(0.5, x), 1e-8);
        prev = v;
    }
    EXPECT_GT(prev, 1.0 - 1e-3);
}

TEST(FdExit, HittingProbabilityAtZeroAlpha) {
    const auto spec = brownian({0.0, 1.0, true, true}, 0.5);
    EXPECT_NEAR(fd_exit_functional(spec, 0.0, Side::left, 0.25).value, 0.75, 1e-10);
}

TEST(FdExit, HalfLineExponential) {
    // Brownian on [0, inf), alpha = 1/2, target 0: u = exp(-x).
    const auto spec = brownian({0.0, kInf, true, false}, 1.0);
    const auto est = fd_exit_functional(spec, 0.5, Side::left, 1.0);
    EXPECT_NEAR(est.value, std::exp(-1.0), 1e-5);
    EXPECT_LE(std::abs(est.value - std::exp(-1.0)), est.half_width + 1e-9);
}

TEST(FdExit, RejectsUnreachableTargetAndOutsidePoint) {
    const auto bes = bessel(3.0, {0.0, 1.0, false, true}, 0.5);
    try {
        (void)fd_exit_functional(bes, 0.5, Side::left, 0.5);
        FAIL() << "entrance target accepted";
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::domain_error);
    }
    try {
        (void)fd_exit_functional(half_closed_brownian(), 0.5, Side::right, 1.5);
        FAIL() << "x outside the interval accepted";
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::domain_error);
    }
}

TEST(McExit, BracketsHittingProbability) {
    const auto spec = brownian({0.0, 1.0, true, true}, 0.5);
    const auto est = mc_exit_functional(spec, 0.0, Side::left, 0.25, 100'000, 7);
    EXPECT_EQ(est.method, OracleMethod::mc);
    EXPECT_EQ(est.n_paths, 100'000u);
    EXPECT_LE(std::abs(est.value - 0.75), est.half_width);
}

TEST(McExit, BracketsLaplaceFunctional) {
    const auto est = mc_exit_functional(half_closed_brownian(), 0.5, Side::right, 0.5, 100'000, 11);
    EXPECT_EQ(est.method, OracleMethod::mc);
    EXPECT_LE(std::abs(est.value - 0.4434), est.half_width + est.bias_bound);
    EXPECT_LE(std::abs(est.value - sinh_ratio(0.5, 0.5)), est.half_width + est.bias_bound);
    // Capped paths contribute at most the weight floor; the mesh error estimate
    // is kept below a quarter of the Bernoulli-sized standard error.
    const McSettings defaults;
    const double expected_se = std::sqrt(est.value * (1.0 - est.value) / 100'000.0);
    EXPECT_LE(est.bias_bound, defaults.weight_floor + defaults.discretization_fraction * expected_se);
}

TEST(McExit, StartAtTargetIsExactlyOne) {
    const auto est = mc_exit_functional(half_closed_brownian(), 0.5, Side::right, 1.0, 1000, 1);
    EXPECT_EQ(est.value, 1.0);
    EXPECT_EQ(est.half_width, 0.0);
}

TEST(McExit, RecurrentZeroAlphaUsesChainSolve) {
    // [0, inf) with s(inf) = inf: 0 is hit almost surely, so capped paths
    // would bias the estimate and the chain is solved exactly instead.
    const auto spec = brownian({0.0, kInf, true, false}, 1.0);
    const auto est = mc_exit_functional(spec, 0.0, Side::left, 3.0, 1000, 3);
    EXPECT_EQ(est.method, OracleMethod::fd);
    EXPECT_NEAR(est.value, 1.0, 1e-12);
}

TEST(McExit, ReflectingOtherSideStillAbsorbsAtExit) {
    // tau is the exit time of (0, 1), so the included end 0 stops the path too.
    const auto spec = brownian({0.0, 1.0, true, true}, 0.5);
    const auto est = mc_exit_functional(spec, 0.0, Side::right, 0.3, 100'000, 3);
    EXPECT_EQ(est.method, OracleMethod::mc);
    EXPECT_LE(std::abs(est.value - 0.3), est.half_width);
}

TEST(McExit, RejectsTooFewPaths) {
    try {
        (void)mc_exit_functional(half_closed_brownian(), 0.5, Side::right, 0.5, 999, 1);
        FAIL() << "999 paths accepted";
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::domain_error);
    }
}

TEST(McExit, SameSeedSameBits) {
    const auto& spec = half_closed_brownian();
    McSettings one;
    one.threads = 1;
    McSettings three;
    three.threads = 3;
    const auto a = mc_exit_functional(spec, 0.5, Side::right, 0.5, 5000, 42, one);
    const auto b = mc_exit_functional(spec, 0.5, Side::right, 0.5, 5000, 42, three);
    const auto c = mc_exit_functional(spec, 0.5, Side::right, 0.5, 5000, 43, one);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.half_width, b.half_width);
    EXPECT_NE(a.value, c.value);
}

TEST(McExit, HalfWidthShrinksAsInverseSquareRoot) {
    const auto& spec = half_closed_brownian();
    std::vector<double> log_n, log_hw;
    for (std::size_t n = 2000; n <= 64'000; n *= 2) {
        const auto est = mc_exit_functional(spec, 0.5, Side::right, 0.5, n, 5);
        log_n.push_back(std::log(static_cast<double>(n)));
        log_hw.push_back(std::log(est.half_width));
    }
    // Least-squares slope of log half-width against log n.
    const double k = static_cast<double>(log_n.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
        sx += log_n[i];
        sy += log_hw[i];
        sxx += log_n[i] * log_n[i];
        sxy += log_n[i] * log_hw[i];
    }
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    EXPECT_NEAR(slope, -0.5, 0.05);
}

TEST(PathRng, DependsOnlyOnSeedAndPath) {
    PathRng a(9, 4), b(9, 4), c(9, 5), d(10, 4);
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next();
        EXPECT_EQ(va, b.next());
        EXPECT_NE(va, c.next());
        EXPECT_NE(va, d.next());
    }
    PathRng u(1, 0);
    double sum = 0.0;
    for (int i = 0; i < 100'000; ++i) {
        const double v = u.uniform();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
        sum += v;
    }
    EXPECT_NEAR(sum / 100'000, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100'000));
}

TEST(HittingProbability, CorollaryCases) {
    EXPECT_DOUBLE_EQ(hitting_probability(brownian({0.0, 1.0, true, true}, 0.5), 0.25, Side::left), 0.75);
    EXPECT_DOUBLE_EQ(hitting_probability(brownian({0.0, 1.0, false, true}, 0.5), 0.9, Side::right), 0.9);
    // I_e = [0, inf) with s(inf) = inf: recurrent toward 0.
    EXPECT_EQ(hitting_probability(brownian({0.0, kInf, true, false}, 1.0), 7.0, Side::left), 1.0);
}

TEST(HittingProbability, CaseMismatch) {
    auto expect_mismatch = [](const DiffusionSpec& spec, Side side) {
        try {
            (void)hitting_probability(spec, 0.5, side);
            FAIL() << "no case mismatch";
        } catch (const Error& err) {
            EXPECT_EQ(err.code(), ErrorCode::case_mismatch);
        }
    };
    expect_mismatch(brownian({0.0, 1.0}, 0.5), Side::left);
    expect_mismatch(brownian({0.0, 1.0, false, true}, 0.5), Side::left);
}

TEST(ChainApproximation, MartingaleAndProbabilities) {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto rs = dharm::testing::random_tabulated(rng);
        const auto report = boundary_report(rs.spec);
        const auto target = pick_target(report, rng);
        if (!target) continue;
        const auto chain = build_chain(rs.spec, report, 1.0, *target, rs.spec.e(), ChainSettings{}, 8, 8);
        ASSERT_GE(chain.size(), 3u);
        double s = 0.0;
        std::vector<double> s_node{0.0};
        for (double d : chain.ds) s_node.push_back(s += d);
        for (std::size_t i = 0; i < chain.size(); ++i) {
            ASSERT_GE(chain.p_up[i], 0.0);
            ASSERT_LE(chain.p_up[i], 1.0);
            ASSERT_GE(chain.hold[i], 0.0);
            if (chain.absorbing(i) || i == 0 || i + 1 == chain.size()) continue;
            const double scale = std::max(chain.ds[i - 1], chain.ds[i]);
            EXPECT_LE(std::abs(chain.expected_displacement(i)), 1e-12 * scale);
            // Chain generator on the s-linear function s_node.
            const double q = chain.p_up[i] * s_node[i + 1] + (1.0 - chain.p_up[i]) * s_node[i - 1] - s_node[i];
            EXPECT_LE(std::abs(q), 1e-12 * (std::abs(s_node[i]) + scale));
        }
        ++checked;
    }
    EXPECT_GE(checked, 10);
}

TEST(FdProperties, ComplementarityAtZeroAlpha) {
    std::mt19937_64 rng(77);
    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 15; ++trial) {
        auto rs = dharm::testing::random_tabulated(rng, false);
        if (rs.cls_l != BoundaryClass::regular || rs.cls_r != BoundaryClass::regular) continue;
        auto spec = rs.spec;
        spec.interval.includes_l = spec.interval.includes_r = true;
        const double x = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
        const double hl = hitting_probability(spec, x, Side::left);
        const double hr = hitting_probability(spec, x, Side::right);
        EXPECT_NEAR(hl + hr, 1.0, 2e-16);
        EXPECT_NEAR(fd_exit_functional(spec, 0.0, Side::left, x).value, hl, 1e-9);
        ++checked;
    }
    EXPECT_GE(checked, 5);
}

TEST(FdProperties, MonotoneTowardTarget) {
    std::mt19937_64 rng(31);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 6; ++trial) {
        const auto rs = dharm::testing::random_tabulated(rng);
        const auto report = boundary_report(rs.spec);
        const auto& end = report.at(Side::right);
        if (end.cls != BoundaryClass::regular && end.cls != BoundaryClass::exit) continue;
        double prev = -1.0;
        for (double x = 0.05; x < 1.0; x += 0.1) {
            const double v = fd_exit_functional(rs.spec, 1.0, Side::right, x).value;
            EXPECT_GE(v, prev - 1e-12) << "x = " << x;
            prev = v;
        }
        ++checked;
    }
    EXPECT_GE(checked, 3);
}

TEST(FdProperties, SecondOrderUnderMeshHalving) {
    struct Case {
        DiffusionSpec spec;
        double alpha;
        double x;
    };
    const std::vector<Case> cases = {
        {half_closed_brownian(), 0.5, 0.3},
        {brownian_drift(1.0, {0.0, 1.0, false, true}, 0.5), 2.0, 0.6},
        {ornstein_uhlenbeck(1.0, {-1.0, 1.0, false, true}, 0.0), 0.5, 0.2},
        {bessel(3.0, {0.0, 1.0, false, true}, 0.5), 0.5, 0.4},
    };
    for (const auto& c : cases) {
        const auto basis = harmonic_space(c.spec, c.alpha);
        ASSERT_TRUE(basis.u_r_norm.has_value());
        const double exact = basis.u_r_norm->at(c.x);
        std::vector<double> err;
        for (int sub : {2, 4, 8}) {
            ChainSettings settings;
            settings.subdivisions = sub;
            err.push_back(std::abs(fd_solve(c.spec, c.alpha, Side::right, c.x, settings) - exact));
        }
        for (std::size_t i = 0; i + 1 < err.size(); ++i)
            EXPECT_GE(std::log2(err[i] / err[i + 1]), 1.9) << to_string(c.spec.family) << " err " << err[i] << " -> "
                                                           << err[i + 1];
    }
}

TEST(McProperties, FdInsideMcInterval) {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> x_dist(0.1, 0.9);
    const double alphas[] = {0.0, 0.5, 2.0};
    int trials = 0, covered = 0;
    while (trials < 200) {
        const auto rs = dharm::testing::random_tabulated(rng);
        const auto report = boundary_report(rs.spec);
        const auto target = pick_target(report, rng);
        if (!target) continue;
        const double alpha = alphas[trials % 3];
        const double x = x_dist(rng);
        const double fd = fd_exit_functional(rs.spec, alpha, *target, x).value;
        const auto mc = mc_exit_functional(rs.spec, alpha, *target, x, 20'000, 1000 + trials);
        // 99% interval from the reported 95% half-width.
        const double hw99 = mc.half_width * 2.5758 / 1.96 + mc.bias_bound;
        if (std::abs(fd - mc.value) <= hw99) ++covered;
        ++trials;
    }
    EXPECT_GE(covered, 190) << covered << " of " << trials;
}

TEST(ChainApproximation, WalkMeshKeepsStartAndAtoms) {
    // Start a hair off the shell node at e, with an atom at 0.3.
    const auto spec = brownian({0.0, 1.0, true, true}, 0.5, {{0.3, 0.2}});
    const auto report = boundary_report(spec);
    ChainSettings walk{4, 4, 1e-10, MeshPolicy::walk};
    const double x = 0.5 + 1e-3;
    const auto chain = build_chain(spec, report, 1.0, Side::right, x, walk, 4, 4);
    EXPECT_EQ(chain.x[chain.start], x);
    EXPECT_NE(std::find(chain.x.begin(), chain.x.end(), 0.3), chain.x.end());
    double shortest = kInf, longest = 0.0;
    for (double d : chain.ds) {
        shortest = std::min(shortest, d);
        longest = std::max(longest, d);
    }
    // Shell cells shrink geometrically toward the ends; nothing is a sliver.
    EXPECT_GT(shortest, 1e-3 * longest);
    const auto nested = build_chain(spec, report, 1.0, Side::right, x, ChainSettings{4, 4}, 4, 4);
    EXPECT_NEAR(chain.solve(1.0)[chain.start], nested.solve(1.0)[nested.start], 1e-3);
}
