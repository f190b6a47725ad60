#pragma once

#include <random>

#include "dharm/boundary.hpp"

namespace dharm::testing {

/// Exact class at a power tail with s' ~ d^a, m' ~ d^b (d the distance to the
/// endpoint): sigma ~ int M ds and mu ~ int S dm with M, S the tail masses.
inline BoundaryClass power_tail_class(double a, double b) {
    auto integrable = [](double p) { return p > -1.0; };
    auto iterated_finite = [&](double inner, double outer) {
        // Bounded inner mass when inner > -1, otherwise it grows like d^(inner+1).
        if (integrable(inner)) return integrable(outer);
        return inner + outer + 2.0 > 0.0;
    };
    return classify(iterated_finite(b, a), iterated_finite(a, b));
}

struct RandomSpec {
    DiffusionSpec spec;
    double a_l = 0.0, b_l = 0.0, a_r = 0.0, b_r = 0.0;
    BoundaryClass cls_l = BoundaryClass::regular;
    BoundaryClass cls_r = BoundaryClass::regular;
};

/// Tabulated spec on (0, 1) with random piecewise-linear cumulative tables and
/// power tails kept away from the critical exponents. Regular endpoints are
/// included with probability 1/2 when `allow_include`.
inline RandomSpec random_tabulated(std::mt19937_64& rng, bool allow_include = true, double lo = -2.4,
                                   double hi = 1.5) {
    std::uniform_real_distribution<double> exponent(lo, hi);
    std::uniform_real_distribution<double> incr(0.1, 1.0);
    std::uniform_int_distribution<int> knots_dist(4, 8);
    std::bernoulli_distribution coin(0.5);
    CumulativeTable scale, speed;
    const int knots = knots_dist(rng);
    double cs = 0.0, cm = 0.0;
    for (int i = 0; i < knots; ++i) {
        const double x = static_cast<double>(i) / (knots - 1);
        scale.x.push_back(x);
        speed.x.push_back(x);
        scale.values.push_back(cs);
        speed.values.push_back(cm);
        cs += incr(rng);
        cm += incr(rng);
    }
    auto draw = [&] {
        for (;;) {
            const double v = exponent(rng);
            if (std::abs(v + 1.0) > 0.15) return v;
        }
    };
    RandomSpec out;
    out.a_l = draw();
    out.b_l = draw();
    out.a_r = draw();
    out.b_r = draw();
    while (std::abs(out.a_l + out.b_l + 2.0) < 0.15) out.b_l = draw();
    while (std::abs(out.a_r + out.b_r + 2.0) < 0.15) out.b_r = draw();
    scale.left_exponent = out.a_l;
    scale.right_exponent = out.a_r;
    speed.left_exponent = out.b_l;
    speed.right_exponent = out.b_r;
    out.cls_l = power_tail_class(out.a_l, out.b_l);
    out.cls_r = power_tail_class(out.a_r, out.b_r);
    std::uniform_real_distribution<double> e_dist(0.3, 0.7);
    const double e = e_dist(rng);
    Interval interval{0.0, 1.0};
    if (allow_include) {
        interval.includes_l = out.cls_l == BoundaryClass::regular && coin(rng);
        interval.includes_r = out.cls_r == BoundaryClass::regular && coin(rng);
    }
    out.spec = tabulated(interval, e, scale, speed);
    return out;
}

}  // namespace dharm::testing
