#include "dharm/harmonic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dharm/quadrature.hpp"

namespace dharm {

namespace {

constexpr double kOverflowBudget = 1e250;
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Term {
    std::vector<double> u, vr, vl;
};

/// One application of the iterated-integral operator: returns
/// (int_e^x int_{(e,y]} f dm ds, its right and left ds-derivatives) for the
/// Hermite interpolant f of `t`. Atoms at closed endpoint nodes are skipped.
Term integrate_twice(const Grid& g, const Term& t) {
    const std::size_t n = g.size();
    const auto K = static_cast<std::size_t>(g.K);
    std::vector<double> a(n - 1), b(n - 1), bp(n - 1);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        double sa = 0.0, sb = 0.0, sbp = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t q = c * K + k;
            const auto& h = g.qh[q];
            const double f = h[0] * t.u[c] + h[1] * t.vr[c] + h[2] * t.u[c + 1] + h[3] * t.vl[c + 1];
            const double w = g.qwm[q] * f;
            sa += w;
            sb += w * g.qs_hi[q];
            sbp += w * g.qs_lo[q];
        }
        a[c] = sa;
        b[c] = sb;
        bp[c] = sbp;
    }
    auto atom = [&](std::size_t i) { return g.is_endpoint_node(i) ? 0.0 : g.atom[i]; };
    Term out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    const std::size_t e = g.e_index;
    for (std::size_t i = e; i + 1 < n; ++i) {
        out.vl[i + 1] = out.vr[i] + a[i];
        out.vr[i + 1] = out.vl[i + 1] + atom(i + 1) * t.u[i + 1];
        out.u[i + 1] = out.u[i] + out.vr[i] * g.ds(i) + b[i];
    }
    for (std::size_t i = e; i-- > 0;) {
        out.vl[i + 1] = out.vr[i + 1] - atom(i + 1) * t.u[i + 1];
        out.vr[i] = out.vl[i + 1] - a[i];
        out.u[i] = out.u[i + 1] - out.vl[i + 1] * g.ds(i) + bp[i];
    }
    out.vl[0] = out.vr[0];
    return out;
}

/// Indices of the grid nodes that are approach points toward `side`, ordered
/// outward from e.
std::vector<std::size_t> approach_indices(const Grid& g, Side side) {
    const auto points = approach_points(g.spec.interval, g.spec.e(), side, LimitOptions{}.max_steps);
    std::vector<std::size_t> out;
    for (double p : points) {
        auto it = std::lower_bound(g.x.begin(), g.x.end(), p);
        if (it != g.x.end() && *it == p) out.push_back(static_cast<std::size_t>(it - g.x.begin()));
    }
    return out;
}

/// Aitken extrapolation of the last three values; falls back to the last
/// value when the differences are not geometric.
double aitken(const std::vector<double>& seq) {
    if (seq.empty()) return kInf;
    if (seq.size() < 3) return seq.back();
    const double a0 = seq[seq.size() - 3], a1 = seq[seq.size() - 2], a2 = seq.back();
    const double d1 = a1 - a0, d2 = a2 - a1;
    if (d1 == 0.0 || d2 == 0.0) return a2;
    const double ratio = d2 / d1;
    if (!(ratio > 0.0 && ratio < 1.0)) return a2;
    return a2 - d2 * d2 / (d2 - d1);
}

/// Geometric continuation of int u^-2 ds past the last approach node, from the
/// cumulative integral `partial` (zero at the truncation node) sampled at the
/// approach nodes. Returns (tail, error estimate) when the last segment
/// integrals contract at a stable ratio.
std::optional<std::pair<double, double>> geometric_tail(const std::vector<double>& partial,
                                                       const std::vector<std::size_t>& idx) {
    constexpr std::size_t kSegments = 6;
    if (idx.size() < kSegments + 1) return std::nullopt;
    std::vector<double> seg;
    for (std::size_t k = idx.size() - kSegments - 1; k + 1 < idx.size(); ++k)
        seg.push_back(std::abs(partial[idx[k]] - partial[idx[k + 1]]));
    double lo = kInf, hi = 0.0;
    for (std::size_t k = 0; k + 1 < seg.size(); ++k) {
        if (!(seg[k] > 0.0)) return std::nullopt;
        const double ratio = seg[k + 1] / seg[k];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    if (!(hi <= 0.99) || hi - lo > 0.02) return std::nullopt;
    const double rho = seg.back() / seg[seg.size() - 2];
    const double tail = seg.back() * rho / (1.0 - rho);
    const double spread = seg.back() * (hi / (1.0 - hi) - lo / (1.0 - lo));
    return std::make_pair(tail, std::max(spread, 1e-3 * tail));
}

/// f at an arbitrary point p of cell c, interpolated in s.
double interpolate_in_cell(const GridFunction& f, std::size_t c, double p) {
    const Grid& g = *f.grid;
    const double ds = g.ds(c);
    const double t = std::clamp(g.spec.scale.increment(g.x[c], p) / ds, 0.0, 1.0);
    const auto h = hermite_basis(t);
    return h[0] * f.value[c] + h[1] * ds * f.v_right[c] + h[2] * f.value[c + 1] + h[3] * ds * f.v_left[c + 1];
}

/// int f dm over (a, b] within one cell, continuous part only, by a 15-point rule.
double cell_mass_integral(const GridFunction& f, std::size_t c, double a, double b) {
    if (!(b > a)) return 0.0;
    const auto& rule = gauss_legendre(15);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double sum = 0.0;
    const auto& md = f.grid->spec.speed.continuous_part();
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double p = mid + half * rule.nodes[k];
        sum += rule.weights[k] * md(p) * interpolate_in_cell(f, c, p);
    }
    // At the rounding floor of x a node can land on a singular endpoint; the
    // cell is then too short to resolve and f is taken as constant on it.
    if (!std::isfinite(sum)) return md.integral(a, b) * interpolate_in_cell(f, c, mid);
    return sum * half;
}

double atom_weight(const Grid& g, std::size_t i) { return g.is_endpoint_node(i) ? 0.0 : g.atom[i]; }

/// Verdict on a nondecreasing sequence of partial sums toward a truncated side.
LimitResult partial_sum_verdict(const std::vector<double>& partials) {
    LimitCertifier cert;
    for (double p : partials)
        if (auto verdict = cert.push(p)) return *verdict;
    LimitResult res = cert.result();
    if (res.kind != LimitResult::Kind::undecided || partials.size() < 3) return res;
    const std::size_t n = partials.size();
    const double d1 = partials[n - 2] - partials[n - 3], d2 = partials[n - 1] - partials[n - 2];
    if (d2 <= 1e-6 * std::abs(partials.back())) return LimitResult{LimitResult::Kind::finite, partials.back(), res.steps};
    if (d2 >= d1 && d2 > 0.0) return LimitResult{LimitResult::Kind::divergent, partials.back(), res.steps};
    return res;
}

}  // namespace

GridFunction picard_series(const std::shared_ptr<const Grid>& grid, double alpha, const HarmonicSettings& settings) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::domain_error, "alpha must be >= 0");
    const Grid& g = *grid;
    const double lambda = 2.0 * alpha;
    GridFunction sum(grid);
    std::fill(sum.value.begin(), sum.value.end(), 1.0);
    if (lambda == 0.0) return sum;

    Term term{sum.value, sum.v_right, sum.v_left};
    double lambda_sigma_max = 0.0;
    double prev_rel = kInf;
    std::vector<double> ratios;
    const double log_tol = std::log(settings.series_tol);
    for (int n = 1; n <= settings.max_terms; ++n) {
        term = integrate_twice(g, term);
        double rel = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            term.u[i] *= lambda;
            term.vr[i] *= lambda;
            term.vl[i] *= lambda;
            sum.value[i] += term.u[i];
            sum.v_right[i] += term.vr[i];
            sum.v_left[i] += term.vl[i];
            if (!(sum.value[i] <= kOverflowBudget))
                throw Error(ErrorCode::overflow, "u exceeds the exponent budget at x = " + format_number(g.x[i]));
            rel = std::max({rel, term.u[i] / sum.value[i], std::abs(term.vr[i]) / (1.0 + std::abs(sum.v_right[i])),
                            std::abs(term.vl[i]) / (1.0 + std::abs(sum.v_left[i]))});
        }
        if (n == 1) lambda_sigma_max = *std::max_element(term.u.begin(), term.u.end());
        if (std::isfinite(prev_rel) && prev_rel > 0.0) ratios.push_back(rel / prev_rel);
        prev_rel = rel;
        if (rel >= settings.series_tol) continue;
        // (lambda sigma)^n / n! bounds the n-th term; otherwise a contracting
        // term ratio bounds the remaining tail by the current term.
        const double log_envelope = n * std::log(lambda_sigma_max) - std::lgamma(n + 1.0);
        const bool envelope_ok = lambda_sigma_max == 0.0 || log_envelope < log_tol;
        bool ratio_ok = false;
        if (ratios.size() >= 2) {
            const double r1 = ratios[ratios.size() - 2], r2 = ratios.back();
            ratio_ok = r2 <= r1 && r2 < 0.5;
        }
        if (envelope_ok || ratio_ok || rel == 0.0) return sum;
    }
    throw Error(ErrorCode::convergence_undecided, "series for u did not settle within " +
                                                      std::to_string(settings.max_terms) + " terms");
}

GridFunction picard_series(const DiffusionSpec& spec, double alpha, const HarmonicSettings& settings) {
    const auto report = boundary_report(spec, settings.grid.limits);
    return picard_series(build_grid(spec, report, 2.0 * alpha, settings.grid), alpha, settings);
}

GridFunction march_solution(const std::shared_ptr<const Grid>& grid, double alpha) {
    const Grid& g = *grid;
    const double lambda = 2.0 * alpha;
    GridFunction out(grid);
    const auto& sd = g.spec.scale.measure();
    const auto& md = g.spec.speed.continuous_part();
    const double r3 = std::sqrt(3.0) / 6.0;
    const double c1 = 0.5 - r3, c2 = 0.5 + r3;
    const double a11 = 0.25, a12 = 0.25 - r3, a21 = 0.25 + r3, a22 = 0.25;
    constexpr int kSubsteps = 4;
    constexpr int kMaxSubsteps = 4096;
    constexpr double kStepTol = 1e-12;

    // Two-stage Gauss-Legendre step of y' = A(x) y, A = [[0, s'], [lambda m', 0]].
    auto step = [&](Eigen::Vector2d y, double x0, double h) {
        Eigen::Matrix2d A1, A2;
        A1 << 0.0, sd(x0 + c1 * h), lambda * md(x0 + c1 * h), 0.0;
        A2 << 0.0, sd(x0 + c2 * h), lambda * md(x0 + c2 * h), 0.0;
        Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
        M.block<2, 2>(0, 0) -= h * a11 * A1;
        M.block<2, 2>(0, 2) -= h * a12 * A1;
        M.block<2, 2>(2, 0) -= h * a21 * A2;
        M.block<2, 2>(2, 2) -= h * a22 * A2;
        Eigen::Vector4d rhs;
        rhs << A1 * y, A2 * y;
        const Eigen::Vector4d k = M.partialPivLu().solve(rhs);
        return Eigen::Vector2d(y + 0.5 * h * (k.head<2>() + k.tail<2>()));
    };
    auto fixed = [&](Eigen::Vector2d y, double from, double to, int steps) {
        const double h = (to - from) / steps;
        for (int j = 0; j < steps; ++j) y = step(y, from + j * h, h);
        return y;
    };
    // Step doubling per cell until two successive resolutions agree.
    auto cross = [&](const Eigen::Vector2d& y, double from, double to) {
        int steps = kSubsteps;
        Eigen::Vector2d coarse = fixed(y, from, to, steps);
        for (;;) {
            steps *= 2;
            const Eigen::Vector2d fine = fixed(y, from, to, steps);
            const bool agree = std::abs(fine[0] - coarse[0]) <= kStepTol * std::abs(fine[0]) &&
                               std::abs(fine[1] - coarse[1]) <= kStepTol * (std::abs(fine[1]) + std::abs(fine[0]));
            if (agree || steps >= kMaxSubsteps) return fine;
            coarse = fine;
        }
    };

    // A cell ending at a closed endpoint may carry an integrable singularity of
    // s' or m' that no x-uniform rule resolves. There the march uses the exact
    // measure increments over pieces graded geometrically toward the endpoint.
    auto graded = [&](Eigen::Vector2d y, double from, double to, double end) {
        const double start = end == to ? from : to;
        std::vector<double> cuts{start};
        const double d = end - start;
        for (int k = 1; k <= 200; ++k) {
            const double x = end - d * std::ldexp(1.0, -k);
            if (x == cuts.back() || std::abs(end - x) <= 1024.0 * kEps * std::abs(end)) break;
            const double prev = cuts.back();
            for (int q = 1; q <= 4; ++q) cuts.push_back(prev + (x - prev) * q / 4.0);
        }
        cuts.push_back(end);
        if (end == from) std::reverse(cuts.begin(), cuts.end());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double a = std::min(cuts[k], cuts[k + 1]), b = std::max(cuts[k], cuts[k + 1]);
            if (!(b > a)) continue;
            const double dS = g.spec.scale.increment(a, b);
            const double dM = md.integral(a, b);
            // The last sliver sits at the rounding floor of x, where the weighted
            // masses cannot be resolved; both are within dS dM / 2 of half of dS dM.
            const bool sliver = k + 2 == cuts.size() ? cuts.back() == end : (k == 0 && cuts.front() == end);
            const double wr = sliver ? 0.5 * dS * dM : weighted_mass_to_right(g.spec, a, b);
            const double wl = dS * dM - wr;
            if (cuts[k + 1] > cuts[k]) {
                y = Eigen::Vector2d(y[0] + y[1] * dS + lambda * y[0] * wr, y[1] + lambda * (y[0] * dM + y[1] * wl));
            } else {
                y = Eigen::Vector2d(y[0] - y[1] * dS + lambda * y[0] * wl, y[1] - lambda * (y[0] * dM - y[1] * wr));
            }
        }
        return y;
    };
    auto advance = [&](const Eigen::Vector2d& y, std::size_t cell, double from, double to) {
        if (cell == 0 && g.closed_left) return graded(y, from, to, g.x.front());
        if (cell + 2 == g.size() && g.closed_right) return graded(y, from, to, g.x.back());
        return cross(y, from, to);
    };

    const std::size_t e = g.e_index;
    out.value[e] = 1.0;
    Eigen::Vector2d y(1.0, 0.0);
    for (std::size_t i = e; i + 1 < g.size(); ++i) {
        y = advance(y, i, g.x[i], g.x[i + 1]);
        out.value[i + 1] = y[0];
        out.v_left[i + 1] = y[1];
        y[1] += lambda * atom_weight(g, i + 1) * y[0];
        out.v_right[i + 1] = y[1];
    }
    y = Eigen::Vector2d(1.0, 0.0);
    for (std::size_t i = e; i-- > 0;) {
        y[1] -= lambda * atom_weight(g, i + 1) * y[0];
        if (i + 1 != e) out.v_left[i + 1] = y[1];
        y = advance(y, i, g.x[i + 1], g.x[i]);
        out.value[i] = y[0];
        out.v_right[i] = y[1];
    }
    out.v_left[0] = out.v_right[0];
    return out;
}

double solution_discrepancy(const GridFunction& a, const GridFunction& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.value[i] - b.value[i]) / std::max(std::abs(a.value[i]), 1e-300));
        worst = std::max(worst, std::abs(a.v_right[i] - b.v_right[i]) / (1.0 + std::abs(a.v_right[i])));
        worst = std::max(worst, std::abs(a.v_left[i] - b.v_left[i]) / (1.0 + std::abs(a.v_left[i])));
    }
    return worst;
}

UPair u_pair(const GridFunction& u, double alpha, double tail_tol) {
    const auto grid = u.grid;
    const Grid& g = *grid;
    const std::size_t n = g.size();
    const auto K = static_cast<std::size_t>(g.K);
    std::vector<double> cell(n - 1);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double ug = u.at_gauss(c, static_cast<int>(k));
            sum += g.qws[c * K + k] / (ug * ug);
        }
        cell[c] = sum;
    }
    std::vector<double> t_minus(n, 0.0), t_plus(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) t_minus[i + 1] = t_minus[i] + cell[i];
    for (std::size_t i = n - 1; i-- > 0;) t_plus[i] = t_plus[i + 1] + cell[i];
    UPair out;
    out.C = t_minus.back();

    // Discarded tails beyond truncated sides: bounded with the final u and v
    // when the bound is small enough, otherwise summed as a geometric tail of
    // the per-segment integrals along the approach nodes.
    std::array<double, 2> tail_error{0.0, 0.0};
    std::array<double, 2> tail_added{0.0, 0.0};
    for (Side side : {Side::left, Side::right}) {
        const bool closed = side == Side::left ? g.closed_left : g.closed_right;
        if (closed || alpha == 0.0) continue;
        const std::size_t slot = side == Side::left ? 0 : 1;
        const std::size_t i = side == Side::left ? 0 : n - 1;
        const double uu = u.value[i];
        const double vv = std::abs(side == Side::left ? u.v_right[i] : u.v_left[i]);
        double bound = vv > 0.0 ? 1.0 / (uu * vv) : kInf;
        const auto& end = g.report.at(side);
        if (end.s.finite()) bound = std::min(bound, (end.s.value - std::abs(g.s[i])) / (uu * uu));
        if (bound <= tail_tol * out.C) {
            tail_error[slot] = bound;
            continue;
        }
        const auto geometric = geometric_tail(side == Side::left ? t_minus : t_plus, approach_indices(g, side));
        if (!geometric)
            throw Error(ErrorCode::tail_not_certified,
                        "discarded part of int u^-2 ds toward " + std::string(to_string(side)) + " is bounded by " +
                            format_number(bound) + " against C = " + format_number(out.C) +
                            " and its segments do not decay geometrically");
        tail_added[slot] = geometric->first;
        tail_error[slot] = geometric->second;
    }
    for (std::size_t i = 0; i < n; ++i) {
        t_minus[i] += tail_added[0];
        t_plus[i] += tail_added[1];
    }
    out.C += tail_added[0] + tail_added[1];

    out.u_plus = GridFunction(grid);
    out.u_minus = GridFunction(grid);
    for (std::size_t i = 0; i < n; ++i) {
        const double inv = 1.0 / u.value[i];
        out.u_plus.value[i] = u.value[i] * t_plus[i];
        out.u_plus.v_right[i] = u.v_right[i] * t_plus[i] - inv;
        out.u_plus.v_left[i] = u.v_left[i] * t_plus[i] - inv;
        out.u_minus.value[i] = u.value[i] * t_minus[i];
        out.u_minus.v_right[i] = u.v_right[i] * t_minus[i] + inv;
        out.u_minus.v_left[i] = u.v_left[i] * t_minus[i] + inv;
    }

    // Endpoint limits.
    auto entrance_limit = [&](const GridFunction& f, Side side) {
        const std::size_t last = side == Side::left ? 0 : n - 1;
        const double bound = tail_error[side == Side::left ? 0 : 1];
        std::vector<double> seq;
        for (std::size_t i : approach_indices(g, side)) {
            if (i == last) break;
            if (u.value[i] * bound > 1e-9 * f.value[i]) break;
            seq.push_back(f.value[i]);
        }
        return aitken(seq);
    };
    for (Side side : {Side::left, Side::right}) {
        const bool right = side == Side::right;
        const bool closed = right ? g.closed_right : g.closed_left;
        GridFunction& vanishing = right ? out.u_plus : out.u_minus;
        GridFunction& growing = right ? out.u_minus : out.u_plus;
        const std::size_t i = right ? n - 1 : 0;
        auto& lim = right ? vanishing.limit_r : vanishing.limit_l;
        auto& dlim = right ? vanishing.deriv_limit_r : vanishing.deriv_limit_l;
        if (closed) {
            lim = vanishing.value[i];
            dlim = right ? vanishing.v_left[i] : vanishing.v_right[i];
            (right ? growing.limit_r : growing.limit_l) = growing.value[i];
            (right ? growing.deriv_limit_r : growing.deriv_limit_l) = right ? growing.v_left[i] : growing.v_right[i];
            continue;
        }
        const auto cls = *g.report.at(side).cls;
        lim = cls == BoundaryClass::entrance ? entrance_limit(vanishing, side) : 0.0;
        if (cls == BoundaryClass::entrance || cls == BoundaryClass::natural) dlim = 0.0;
    }
    return out;
}

namespace {

std::string span_description(bool zero, bool l, bool r) {
    const std::string sup = zero ? "0" : "alpha";
    if (l && r) return "span{u_l^" + sup + ", u_r^" + sup + "}";
    if (l) return "span{u_l^" + sup + "}";
    if (r) return "span{u_r^" + sup + "}";
    return "{0}";
}

BoundaryReport decided_report(const DiffusionSpec& spec, const LimitOptions& opts) {
    static_cast<void>(effective_interval(spec, opts));
    auto report = boundary_report(spec, opts);
    if (!report.decided()) throw Error(ErrorCode::convergence_undecided, "boundary classes undecided");
    return report;
}

}  // namespace

HarmonicBasis harmonic_space(const DiffusionSpec& spec, double alpha, const HarmonicSettings& settings) {
    if (alpha == 0.0) return harmonic_space_zero(spec, settings);
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::domain_error, "alpha must be >= 0");
    HarmonicBasis basis;
    basis.alpha = alpha;
    basis.report = decided_report(spec, settings.grid.limits);
    const auto grid = build_grid(spec, basis.report, 2.0 * alpha, settings.grid);
    basis.u = picard_series(grid, alpha, settings);
    if (settings.cross_check) {
        const double gap = solution_discrepancy(basis.u, march_solution(grid, alpha));
        if (gap > settings.cross_check_tol)
            throw Error(ErrorCode::cross_check_failed,
                        "series and IVP march disagree by " + format_number(gap) + " relative");
    }
    auto pair = u_pair(basis.u, alpha, settings.grid.tail_tol);
    basis.u_plus = std::move(pair.u_plus);
    basis.u_minus = std::move(pair.u_minus);
    basis.C = pair.C;
    const bool refl_l = basis.report.left.role == Role::reflecting;
    const bool refl_r = basis.report.right.role == Role::reflecting;
    const std::size_t last = grid->size() - 1;
    if (refl_l) {
        GridFunction ul = basis.u_plus;
        ul.scale(1.0 / basis.u_plus.value[0]);
        basis.u_l_norm = std::move(ul);
        basis.c_l = -basis.u_plus.v_right[0] / basis.u_minus.v_right[0];
    }
    if (refl_r) {
        GridFunction ur = basis.u_minus;
        ur.scale(1.0 / basis.u_minus.value[last]);
        basis.u_r_norm = std::move(ur);
        basis.c_r = -basis.u_plus.v_left[last] / basis.u_minus.v_left[last];
    }
    basis.dim = static_cast<int>(refl_l) + static_cast<int>(refl_r);
    basis.span_desc = span_description(false, refl_l, refl_r);
    return basis;
}

HarmonicBasis harmonic_space_zero(const DiffusionSpec& spec, const HarmonicSettings& settings) {
    HarmonicBasis basis;
    basis.report = decided_report(spec, settings.grid.limits);
    const auto grid = build_grid(spec, basis.report, 0.0, settings.grid);
    const Grid& g = *grid;
    const std::size_t n = g.size();
    const double s_l = basis.report.left.signed_scale();
    const double s_r = basis.report.right.signed_scale();
    const bool fin_l = std::isfinite(s_l), fin_r = std::isfinite(s_r);

    basis.u = GridFunction(grid);
    std::fill(basis.u.value.begin(), basis.u.value.end(), 1.0);
    basis.u.limit_l = basis.u.limit_r = 1.0;
    basis.u.deriv_limit_l = basis.u.deriv_limit_r = 0.0;

    // Affine functions of s with value 1 at one end and 0 at the other.
    auto affine = [&](double slope, double anchor) {
        GridFunction f(grid);
        for (std::size_t i = 0; i < n; ++i) {
            f.value[i] = slope * (g.s[i] - anchor);
            f.v_right[i] = f.v_left[i] = slope;
        }
        f.deriv_limit_l = f.deriv_limit_r = slope;
        return f;
    };
    if (fin_r) {
        basis.u_plus = affine(-1.0, s_r);
        basis.u_plus.limit_r = 0.0;
        if (fin_l) basis.u_plus.limit_l = s_r - s_l;
        if (g.closed_right) basis.u_plus.value[n - 1] = 0.0;
    }
    if (fin_l) {
        basis.u_minus = affine(1.0, s_l);
        basis.u_minus.limit_l = 0.0;
        if (fin_r) basis.u_minus.limit_r = s_r - s_l;
        if (g.closed_left) basis.u_minus.value[0] = 0.0;
    }
    basis.C = s_r - s_l;

    const bool refl_l = basis.report.left.role == Role::reflecting;
    const bool refl_r = basis.report.right.role == Role::reflecting;
    auto normalized_l = [&] {
        GridFunction f = basis.u_plus;
        return f.scale(1.0 / (s_r - s_l));
    };
    auto normalized_r = [&] {
        GridFunction f = basis.u_minus;
        return f.scale(1.0 / (s_r - s_l));
    };
    if (refl_l && refl_r) {
        basis.u_l_norm = normalized_l();
        basis.u_r_norm = normalized_r();
        basis.dim = 2;
        basis.span_desc = span_description(true, true, true);
    } else if (refl_l) {
        basis.dim = 1;
        if (fin_r) {
            basis.u_l_norm = normalized_l();
            basis.span_desc = span_description(true, true, false);
        } else {
            basis.u_l_norm = basis.u;
            basis.span_desc = "span{1}";
        }
    } else if (refl_r) {
        basis.dim = 1;
        if (fin_l) {
            basis.u_r_norm = normalized_r();
            basis.span_desc = span_description(true, false, true);
        } else {
            basis.u_r_norm = basis.u;
            basis.span_desc = "span{1}";
        }
    } else if (fin_l || fin_r) {
        basis.dim = 0;
        basis.span_desc = "{0}";
    } else {
        basis.dim = 1;
        basis.span_desc = "span{1}";
    }
    return basis;
}

double residual_weak_identity(const GridFunction& f, double alpha, double x, double y) {
    const Grid& g = *f.grid;
    if (!(x < y) || x < g.x.front() || y > g.x.back())
        throw Error(ErrorCode::domain_error, "residual needs x < y inside the grid range");
    double integral = 0.0;
    const std::size_t ci = g.locate(x), cj = g.locate(y);
    for (std::size_t c = ci; c <= cj; ++c) {
        const double a = std::max(x, g.x[c]), b = std::min(y, g.x[c + 1]);
        integral += cell_mass_integral(f, c, a, b);
    }
    for (std::size_t i = ci; i <= cj + 1 && i < g.size(); ++i)
        if (g.x[i] > x && g.x[i] <= y) integral += atom_weight(g, i) * f.value[i];
    const double vx = f.derivative_at(x);
    const double vy = y == g.x.back() ? f.v_left.back() : f.derivative_at(y);
    return std::abs(vy - vx - 2.0 * alpha * integral);
}

WeakIdentityCheck::WeakIdentityCheck(const GridFunction& f, double alpha) : f_(&f), lambda_(2.0 * alpha) {
    const Grid& g = *f.grid;
    // Accumulated outward from e so that partial sums stay on the scale of v.
    cumulative_.assign(g.size(), 0.0);
    for (std::size_t i = g.e_index; i + 1 < g.size(); ++i) {
        const double cell = cell_mass_integral(f, i, g.x[i], g.x[i + 1]);
        cumulative_[i + 1] = cumulative_[i] + lambda_ * (cell + atom_weight(g, i + 1) * f.value[i + 1]);
    }
    for (std::size_t i = g.e_index; i-- > 0;) {
        const double cell = cell_mass_integral(f, i, g.x[i], g.x[i + 1]);
        cumulative_[i] = cumulative_[i + 1] - lambda_ * (cell + atom_weight(g, i + 1) * f.value[i + 1]);
    }
}

double WeakIdentityCheck::residual(std::size_t i, std::size_t j) const {
    const auto& f = *f_;
    return std::abs(f.v_right[j] - f.v_right[i] - (cumulative_[j] - cumulative_[i]));
}

double WeakIdentityCheck::max_relative() const {
    const auto& f = *f_;
    double worst = 0.0;
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            worst = std::max(worst, residual(i, j) / (1.0 + std::max(std::abs(f.v_right[i]), std::abs(f.v_right[j]))));
    return worst;
}

EnergyParts energy_norm(const GridFunction& f) {
    const Grid& g = *f.grid;
    const std::size_t n = g.size();
    const auto K = static_cast<std::size_t>(g.K);
    std::vector<double> dir(n - 1), l2(n - 1);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        double d = 0.0, m = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double df = f.derivative_at_gauss(c, static_cast<int>(k));
            const double fv = f.at_gauss(c, static_cast<int>(k));
            d += g.qws[c * K + k] * df * df;
            m += g.qwm[c * K + k] * fv * fv;
        }
        dir[c] = 0.5 * d;
        l2[c] = m + g.atom[c + 1] * f.value[c + 1] * f.value[c + 1];
    }
    l2.front() += g.atom[0] * f.value[0] * f.value[0];

    EnergyParts out;
    for (auto* parts : {&dir, &l2}) {
        double total = 0.0;
        for (double p : *parts) total += p;
        if (!std::isfinite(total)) throw Error(ErrorCode::non_finite, "energy integral is not finite");
        // Divergence toward a truncated side shows in the partials along the
        // geometric approach nodes.
        for (Side side : {Side::left, Side::right}) {
            if (side == Side::left ? g.closed_left : g.closed_right) continue;
            const auto idx = approach_indices(g, side);
            std::vector<double> partials;
            for (std::size_t i : idx) {
                double acc = 0.0;
                if (side == Side::right)
                    for (std::size_t c = g.e_index; c < i; ++c) acc += (*parts)[c];
                else
                    for (std::size_t c = i; c < g.e_index; ++c) acc += (*parts)[c];
                partials.push_back(acc);
            }
            const auto verdict = partial_sum_verdict(partials);
            if (verdict.divergent())
                throw Error(ErrorCode::non_finite, "energy integral diverges toward " + std::string(to_string(side)));
        }
        (parts == &dir ? out.dirichlet : out.l2m) = total;
    }
    return out;
}

bool in_form_domain(const GridFunction& f, double tol) {
    try {
        static_cast<void>(energy_norm(f));
    } catch (const Error& err) {
        if (err.code() == ErrorCode::non_finite) return false;
        throw;
    }
    const Grid& g = *f.grid;
    double scale = 0.0;
    for (double v : f.value) scale = std::max(scale, std::abs(v));
    for (Side side : {Side::left, Side::right}) {
        if (g.report.at(side).role != Role::absorbing) continue;
        const bool right = side == Side::right;
        const auto& lim = right ? f.limit_r : f.limit_l;
        const double value = lim ? *lim : (right ? f.value.back() : f.value.front());
        if (std::abs(value) > tol * std::max(scale, 1.0)) return false;
    }
    return true;
}

double Bump::value(double s) const noexcept {
    const double t = (2.0 * s - s_a - s_b) / (s_b - s_a);
    if (!(std::abs(t) < 1.0)) return 0.0;
    return std::exp(-1.0 / (1.0 - t * t));
}

double Bump::derivative(double s) const noexcept {
    const double t = (2.0 * s - s_a - s_b) / (s_b - s_a);
    if (!(std::abs(t) < 1.0)) return 0.0;
    const double q = 1.0 - t * t;
    return std::exp(-1.0 / q) * (-2.0 * t / (q * q)) * 2.0 / (s_b - s_a);
}

GridFunction Bump::on(const std::shared_ptr<const Grid>& grid) const {
    GridFunction f(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        f.value[i] = value(grid->s[i]);
        f.v_right[i] = f.v_left[i] = derivative(grid->s[i]);
    }
    return f;
}

Bump Bump::between(const DiffusionSpec& spec, double a, double b) {
    return Bump{spec.scale.value(a), spec.scale.value(b)};
}

double orthogonality_residual(const GridFunction& h, double alpha, const Bump& test_fn) {
    const Grid& g = *h.grid;
    const auto& sd = g.spec.scale.measure();
    const auto& md = g.spec.speed.continuous_part();
    const QuadratureOptions opts{1e-300, 1e-11, 400};
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < g.size(); ++c) {
        if (g.s[c + 1] <= test_fn.s_a || g.s[c] >= test_fn.s_b) continue;
        const double ds = g.ds(c);
        auto integrand = [&](double p) {
            const double s_off = g.spec.scale.increment(g.x[c], p);
            const double t = std::clamp(s_off / ds, 0.0, 1.0);
            const double s = g.s[c] + s_off;
            const auto b = hermite_basis(t);
            const auto db = hermite_basis_derivative(t);
            const double hv = b[0] * h.value[c] + b[1] * ds * h.v_right[c] + b[2] * h.value[c + 1] + b[3] * ds * h.v_left[c + 1];
            const double hd = (db[0] * h.value[c] + db[2] * h.value[c + 1]) / ds + db[1] * h.v_right[c] + db[3] * h.v_left[c + 1];
            return 0.5 * hd * test_fn.derivative(s) * sd(p) + alpha * hv * test_fn.value(s) * md(p);
        };
        total += integrate_adaptive(integrand, g.x[c], g.x[c + 1], opts).value;
    }
    for (std::size_t i = 0; i < g.size(); ++i) total += alpha * atom_weight(g, i) * h.value[i] * test_fn.value(g.s[i]);
    return std::abs(total);
}

}  // namespace dharm
