#include "dharm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dharm/quadrature.hpp"

namespace dharm {

namespace {

constexpr int kFineSubdivision = 32;
constexpr int kShellSplit = 8;
constexpr int kMaxExtension = 1100;
constexpr double kNegligible = 1e-13;
constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Past the limit sequence, halves the distance to a closed endpoint until the
/// scale and speed left beyond the last point are negligible against the whole
/// side, or x reaches its rounding floor. Keeps singular densities at a closed
/// endpoint out of any single cell.
void extend_to_endpoint(const DiffusionSpec& spec, Side side, std::vector<double>& points) {
    const double j = spec.interval.endpoint(side);
    const double e = spec.e();
    auto rest = [&](double x, bool scale) {
        const double a = std::min(x, j), b = std::max(x, j);
        return scale ? spec.scale.increment(a, b) : spec.speed.continuous_part().integral(a, b);
    };
    const double s_side = rest(e, true), m_side = rest(e, false);
    double x = points.empty() ? e : points.back();
    for (int k = 0; k < kMaxExtension; ++k) {
        if (rest(x, true) <= kNegligible * s_side && rest(x, false) <= kNegligible * m_side) break;
        const double next = j - 0.5 * (j - x);
        if (next == x || next == j || std::abs(j - next) <= 4.0 * kEps * std::abs(j)) break;
        points.push_back(next);
        x = next;
    }
}

/// Point a fraction t of the way from a to b, geometric in the distance to a
/// finite endpoint j and linear in x toward an infinite one.
void nodes_between(double a, double b, double j, double t, std::vector<double>& out) {
    if (!std::isfinite(j)) {
        out.push_back(a + t * (b - a));
        return;
    }
    const double da = std::abs(j - a), db = std::abs(j - b);
    if (!(da > 0.0) || !(db > 0.0)) return;
    const double d = da * std::pow(db / da, t);
    out.push_back(j > a ? j - d : j + d);
}

bool closed_side(const BoundaryReport& report, const Interval& interval, Side side) {
    const auto& end = report.at(side);
    return std::isfinite(interval.endpoint(side)) && end.cls && *end.cls == BoundaryClass::regular;
}

/// Number of approach points kept on a truncated side for lambda > 0: the
/// first index where the certified bound on int u^-2 ds beyond the point drops
/// below tail_tol times the part accumulated so far on this side; 0 when the
/// approach budget runs out first.
std::size_t certified_depth(const DiffusionSpec& spec, const EndpointReport& end, Side side,
                            const std::vector<double>& points, double lambda, double tail_tol) {
    const double e = spec.e();
    const bool right = side == Side::right;
    const double s_end = end.s.finite() ? end.s.value : kInf;
    // Lower bounds of u, du/ds along the sequence (u and |v| grow away from e).
    double u = 1.0, v = 0.0, abs_s = 0.0, mass = 0.0, sig = 0.0, partial = 0.0;
    double prev = e;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const double x = points[k];
        const double lo = right ? prev : x, hi = right ? x : prev;
        const double ds = spec.scale.increment(lo, hi);
        const double dm = spec.speed.mass(lo, hi);
        const double w_u = right ? weighted_mass_to_right(spec, lo, hi) : weighted_mass_from_left(spec, lo, hi);
        sig += mass * ds + w_u;
        const double u_next = u + v * ds + lambda * u * w_u;
        v += lambda * u * dm;
        u = u_next;
        abs_s += ds;
        mass += dm;
        partial += ds / (u * u);
        if (!std::isfinite(u) || u > 1e250)
            throw Error(ErrorCode::overflow, "u exceeds the exponent budget before the tail toward " +
                                                 std::string(to_string(side)) + " is certified");
        double bound = kInf;
        if (v > 0.0) bound = std::min(bound, 1.0 / (u * v));
        if (std::isfinite(s_end)) bound = std::min(bound, (s_end - abs_s) / (u * u));
        if (mass > 0.0) bound = std::min(bound, 1.0 / (lambda * (1.0 + lambda * sig) * mass));
        if (bound <= tail_tol * partial) return k + 1;
        prev = x;
    }
    return 0;
}

constexpr double kZeroAlphaScaleCap = 1e100;

/// Truncation depth without a tail certificate: the budget, or earlier once
/// the scale increments fall below the resolution of |s| or |s| passes the cap.
std::size_t zero_alpha_depth(const DiffusionSpec& spec, const std::vector<double>& points, std::size_t budget) {
    double prev = spec.e(), abs_s = 0.0;
    const std::size_t limit = std::min(points.size(), budget);
    for (std::size_t k = 0; k < limit; ++k) {
        const double ds = spec.scale.increment(std::min(prev, points[k]), std::max(prev, points[k]));
        if (k > 0 && !(ds > 4.0 * std::numeric_limits<double>::epsilon() * abs_s)) return k;
        // Exponentially growing scales (OU, drift on a half-line) overflow long
        // before the step budget; the s-range is kept well inside the double range.
        if (k > 0 && !(abs_s + ds <= kZeroAlphaScaleCap)) return k;
        abs_s += ds;
        prev = points[k];
    }
    return limit;
}

}  // namespace

std::size_t Grid::locate(double value) const {
    auto it = std::upper_bound(x.begin(), x.end(), value);
    if (it == x.begin()) return 0;
    const auto i = static_cast<std::size_t>(it - x.begin()) - 1;
    return std::min(i, x.size() - 2);
}

double Grid::scale_at(double value) const {
    const std::size_t i = locate(value);
    if (value - x[i] <= x[i + 1] - value) return s[i] + spec.scale.increment(x[i], value);
    return s[i + 1] - spec.scale.increment(value, x[i + 1]);
}

std::shared_ptr<const Grid> build_grid(const DiffusionSpec& spec, const BoundaryReport& report, double lambda,
                                       const GridSettings& settings) {
    if (!report.decided()) throw Error(ErrorCode::convergence_undecided, "boundary classes undecided");
    auto grid = std::make_shared<Grid>();
    grid->spec = spec;
    grid->report = report;
    grid->lambda = lambda;
    grid->K = settings.gauss_points;
    const double e = spec.e();
    const auto& interval = spec.interval;
    grid->closed_left = closed_side(report, interval, Side::left);
    grid->closed_right = closed_side(report, interval, Side::right);

    // Mandatory nodes: geometric approach points, e, closed endpoints.
    std::vector<double> mandatory{e};
    std::vector<double> shell_nodes;
    double lo_range = 0.0, hi_range = 0.0;
    for (Side side : {Side::left, Side::right}) {
        auto points = approach_points(interval, e, side, settings.limits.max_steps);
        const bool closed = side == Side::left ? grid->closed_left : grid->closed_right;
        if (!closed) {
            std::size_t depth = 0;
            if (lambda > 0.0) {
                depth = certified_depth(spec, report.at(side), side, points, lambda, settings.tail_tol);
                if (depth == 0) {
                    depth = points.size();
                    (side == Side::left ? grid->tail_certified_left : grid->tail_certified_right) = false;
                }
            } else {
                depth = zero_alpha_depth(spec, points, static_cast<std::size_t>(settings.zero_alpha_depth));
            }
            points.resize(depth);
            if (points.empty()) throw Error(ErrorCode::tail_not_certified, "empty approach sequence");
        }
        if (closed) extend_to_endpoint(spec, side, points);
        mandatory.insert(mandatory.end(), points.begin(), points.end());
        // Each approach shell is as wide as its distance to the endpoint; split it
        // geometrically in that distance so cells shrink relative to it.
        const double j = interval.endpoint(side);
        double prev = e;
        const std::size_t split = std::min<std::size_t>(points.size(), static_cast<std::size_t>(settings.limits.max_steps));
        for (std::size_t k = 0; k < split; ++k) {
            const double p = points[k];
            for (int q = 1; q < kShellSplit; ++q) {
                const double t = static_cast<double>(q) / kShellSplit;
                nodes_between(prev, p, j, t, shell_nodes);
            }
            prev = p;
        }
        const double edge = closed ? interval.endpoint(side) : points.back();
        if (closed) mandatory.push_back(edge);
        (side == Side::left ? lo_range : hi_range) = edge;
    }
    auto inside = [&](double p) { return p > lo_range && p < hi_range; };
    for (double p : spec.scale.measure().breakpoints())
        if (inside(p)) mandatory.push_back(p);
    for (double p : spec.speed.continuous_part().breakpoints())
        if (inside(p)) mandatory.push_back(p);
    for (const auto& a : spec.speed.atoms())
        if (inside(a.x)) mandatory.push_back(a.x);
    std::sort(mandatory.begin(), mandatory.end());
    mandatory.erase(std::unique(mandatory.begin(), mandatory.end()), mandatory.end());

    // Placement coordinate on a fine pre-grid: half natural scale, half the
    // local oscillation length int sqrt(lambda m' s') dx.
    std::vector<double> fine_x{mandatory.front()};
    std::vector<double> fine_s{0.0}, fine_l{0.0};
    for (std::size_t i = 0; i + 1 < mandatory.size(); ++i) {
        const double a = mandatory[i], b = mandatory[i + 1];
        for (int k = 1; k <= kFineSubdivision; ++k) {
            const double xb = k == kFineSubdivision ? b : a + (b - a) * k / kFineSubdivision;
            const double xa = fine_x.back();
            const double ds = spec.scale.increment(xa, xb);
            const double dm = spec.speed.continuous_part().integral(xa, xb);
            fine_x.push_back(xb);
            fine_s.push_back(fine_s.back() + ds);
            fine_l.push_back(fine_l.back() + (lambda > 0.0 ? std::sqrt(lambda * ds * dm) : 0.0));
        }
    }
    const double s_tot = fine_s.back(), l_tot = fine_l.back();
    if (!std::isfinite(s_tot) || !(s_tot > 0.0))
        throw Error(ErrorCode::non_finite, "scale range of the grid is not finite");
    std::vector<double> xi(fine_x.size());
    for (std::size_t i = 0; i < xi.size(); ++i)
        xi[i] = l_tot > 0.0 ? 0.5 * fine_s[i] / s_tot + 0.5 * fine_l[i] / l_tot : fine_s[i] / s_tot;

    std::vector<double> nodes = mandatory;
    for (double p : shell_nodes)
        if (inside(p)) nodes.push_back(p);
    const int n_place = std::max(settings.grid_points, 2);
    for (int j = 1; j < n_place; ++j) {
        const double target = static_cast<double>(j) / n_place;
        auto it = std::lower_bound(xi.begin(), xi.end(), target);
        if (it == xi.begin() || it == xi.end()) continue;
        const auto k = static_cast<std::size_t>(it - xi.begin());
        const double frac = (target - xi[k - 1]) / (xi[k] - xi[k - 1]);
        nodes.push_back(fine_x[k - 1] + frac * (fine_x[k] - fine_x[k - 1]));
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    // Drop placement nodes that crowd a neighbour to rounding level.
    std::vector<double>& x = grid->x;
    for (double p : nodes) {
        const bool is_mandatory = std::binary_search(mandatory.begin(), mandatory.end(), p);
        if (!x.empty() && !is_mandatory && p - x.back() <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(p))
            continue;
        if (!x.empty() && is_mandatory && p - x.back() <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(p) &&
            !std::binary_search(mandatory.begin(), mandatory.end(), x.back()))
            x.pop_back();
        x.push_back(p);
    }
    const std::size_t n = x.size();
    grid->e_index = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), e) - x.begin());

    // Scale values by cumulative increments outward from e.
    grid->cell_ds.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        grid->cell_ds[i] = spec.scale.increment(x[i], x[i + 1]);
        if (!(grid->cell_ds[i] > 0.0) || !std::isfinite(grid->cell_ds[i]))
            throw Error(ErrorCode::singular_mesh, "grid cell with zero or non-finite scale increment at x = " +
                                                      format_number(x[i]) + ", " + format_number(x[i + 1]));
    }
    grid->s.assign(n, 0.0);
    for (std::size_t i = grid->e_index; i + 1 < n; ++i) grid->s[i + 1] = grid->s[i] + grid->cell_ds[i];
    for (std::size_t i = grid->e_index; i-- > 0;) grid->s[i] = grid->s[i + 1] - grid->cell_ds[i];

    grid->atom.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) grid->atom[i] = spec.speed.atom_at(x[i]);

    // Gauss data.
    const auto& rule = gauss_legendre(static_cast<std::size_t>(grid->K));
    const std::size_t total = (n - 1) * static_cast<std::size_t>(grid->K);
    grid->qx.resize(total);
    grid->qs_lo.resize(total);
    grid->qs_hi.resize(total);
    grid->qwm.resize(total);
    grid->qws.resize(total);
    grid->qh.resize(total);
    const auto& sd = spec.scale.measure();
    const auto& md = spec.speed.continuous_part();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a = x[i], b = x[i + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        const double cell_ds = grid->cell_ds[i];
        const double cell_dm = md.integral(a, b);
        double sum_m = 0.0, sum_s = 0.0;
        for (int k = 0; k < grid->K; ++k) {
            const std::size_t q = i * static_cast<std::size_t>(grid->K) + static_cast<std::size_t>(k);
            const double p = mid + half * rule.nodes[static_cast<std::size_t>(k)];
            grid->qx[q] = p;
            grid->qs_lo[q] = sd.integral(a, p);
            grid->qs_hi[q] = sd.integral(p, b);
            grid->qwm[q] = md(p) * rule.weights[static_cast<std::size_t>(k)] * half;
            grid->qws[q] = sd(p) * rule.weights[static_cast<std::size_t>(k)] * half;
            sum_m += grid->qwm[q];
            sum_s += grid->qws[q];
            const double t = grid->qs_lo[q] / (grid->qs_lo[q] + grid->qs_hi[q]);
            auto h = hermite_basis(t);
            h[1] *= cell_ds;
            h[3] *= cell_ds;
            grid->qh[q] = h;
        }
        // Cells at the rounding floor of x next to a singular endpoint: nodes may
        // land on the end. Spread the exact increments over the rule in t instead.
        if (!std::isfinite(sum_m) || !std::isfinite(sum_s)) {
            sum_m = sum_s = 2.0;
            for (int k = 0; k < grid->K; ++k) {
                const std::size_t q = i * static_cast<std::size_t>(grid->K) + static_cast<std::size_t>(k);
                const double w = rule.weights[static_cast<std::size_t>(k)];
                const double t = 0.5 * (1.0 + rule.nodes[static_cast<std::size_t>(k)]);
                grid->qx[q] = std::clamp(mid + half * rule.nodes[static_cast<std::size_t>(k)], a, b);
                grid->qs_lo[q] = t * cell_ds;
                grid->qs_hi[q] = (1.0 - t) * cell_ds;
                grid->qwm[q] = w;
                grid->qws[q] = w;
                auto h = hermite_basis(t);
                h[1] *= cell_ds;
                h[3] *= cell_ds;
                grid->qh[q] = h;
            }
        }
        // Make the rule exact for constants against both measures.
        for (int k = 0; k < grid->K; ++k) {
            const std::size_t q = i * static_cast<std::size_t>(grid->K) + static_cast<std::size_t>(k);
            if (sum_m > 0.0 && std::isfinite(cell_dm)) grid->qwm[q] *= cell_dm / sum_m;
            if (sum_s > 0.0) grid->qws[q] *= cell_ds / sum_s;
        }
    }
    return grid;
}

GridFunction::GridFunction(std::shared_ptr<const Grid> g) : grid(std::move(g)) {
    const std::size_t n = grid->size();
    value.assign(n, 0.0);
    v_right.assign(n, 0.0);
    v_left.assign(n, 0.0);
}

double GridFunction::at(double x) const {
    const auto& g = *grid;
    if (x < g.x.front() || x > g.x.back()) {
        if (x == g.spec.interval.l && limit_l) return *limit_l;
        if (x == g.spec.interval.r && limit_r) return *limit_r;
        throw Error(ErrorCode::domain_error, "point outside the grid range");
    }
    const std::size_t i = g.locate(x);
    const double ds = g.ds(i);
    const double t = g.spec.scale.increment(g.x[i], x) / ds;
    const auto h = hermite_basis(std::clamp(t, 0.0, 1.0));
    return h[0] * value[i] + h[1] * ds * v_right[i] + h[2] * value[i + 1] + h[3] * ds * v_left[i + 1];
}

double GridFunction::derivative_at(double x) const {
    const auto& g = *grid;
    if (x < g.x.front() || x > g.x.back()) {
        if (x == g.spec.interval.l && deriv_limit_l) return *deriv_limit_l;
        if (x == g.spec.interval.r && deriv_limit_r) return *deriv_limit_r;
        throw Error(ErrorCode::domain_error, "point outside the grid range");
    }
    auto node = std::lower_bound(g.x.begin(), g.x.end(), x);
    if (node != g.x.end() && *node == x) {
        const auto i = static_cast<std::size_t>(node - g.x.begin());
        return i + 1 == g.size() ? v_left[i] : v_right[i];
    }
    const std::size_t i = g.locate(x);
    const double ds = g.ds(i);
    const double t = g.spec.scale.increment(g.x[i], x) / ds;
    const auto h = hermite_basis_derivative(std::clamp(t, 0.0, 1.0));
    return (h[0] * value[i] + h[2] * value[i + 1]) / ds + h[1] * v_right[i] + h[3] * v_left[i + 1];
}

double GridFunction::at_gauss(std::size_t cell, int k) const {
    const auto& h = grid->qh[cell * static_cast<std::size_t>(grid->K) + static_cast<std::size_t>(k)];
    return h[0] * value[cell] + h[1] * v_right[cell] + h[2] * value[cell + 1] + h[3] * v_left[cell + 1];
}

double GridFunction::derivative_at_gauss(std::size_t cell, int k) const {
    const auto& g = *grid;
    const std::size_t q = cell * static_cast<std::size_t>(g.K) + static_cast<std::size_t>(k);
    const double ds = g.ds(cell);
    const double t = g.qs_lo[q] / (g.qs_lo[q] + g.qs_hi[q]);
    const auto h = hermite_basis_derivative(t);
    return (h[0] * value[cell] + h[2] * value[cell + 1]) / ds + h[1] * v_right[cell] + h[3] * v_left[cell + 1];
}

GridFunction GridFunction::from_functions(std::shared_ptr<const Grid> g, const std::function<double(double)>& f,
                                          const std::function<double(double)>& df_ds,
                                          const std::function<double(double)>& df_ds_left) {
    GridFunction out(std::move(g));
    const auto& x = out.grid->x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.value[i] = f(x[i]);
        out.v_right[i] = df_ds(x[i]);
        out.v_left[i] = df_ds_left ? df_ds_left(x[i]) : out.v_right[i];
    }
    return out;
}

GridFunction& GridFunction::scale(double factor) {
    for (auto* column : {&value, &v_right, &v_left})
        for (double& y : *column) y *= factor;
    for (auto* lim : {&limit_l, &limit_r, &deriv_limit_l, &deriv_limit_r})
        if (*lim) **lim *= factor;
    return *this;
}

GridFunction GridFunction::combine(double a, const GridFunction& other, double b) const {
    GridFunction out(grid);
    for (std::size_t i = 0; i < size(); ++i) {
        out.value[i] = a * value[i] + b * other.value[i];
        out.v_right[i] = a * v_right[i] + b * other.v_right[i];
        out.v_left[i] = a * v_left[i] + b * other.v_left[i];
    }
    auto mix = [&](const std::optional<double>& p, const std::optional<double>& q) -> std::optional<double> {
        if (p && q) return a * *p + b * *q;
        return std::nullopt;
    };
    out.limit_l = mix(limit_l, other.limit_l);
    out.limit_r = mix(limit_r, other.limit_r);
    out.deriv_limit_l = mix(deriv_limit_l, other.deriv_limit_l);
    out.deriv_limit_r = mix(deriv_limit_r, other.deriv_limit_r);
    return out;
}

}  // namespace dharm
