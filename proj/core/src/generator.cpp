#include "dharm/generator.hpp"

#include <algorithm>
#include <cmath>

namespace dharm {

namespace {

double max_abs_derivative(const GridFunction& f) {
    double scale = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        scale = std::max({scale, std::abs(f.v_right[i]), std::abs(f.v_left[i])});
    return scale;
}

std::vector<double> cell_masses(const Grid& g) {
    const auto K = static_cast<std::size_t>(g.K);
    std::vector<double> dm(g.cells(), 0.0);
    for (std::size_t c = 0; c < g.cells(); ++c)
        for (std::size_t k = 0; k < K; ++k) dm[c] += g.qwm[c * K + k];
    return dm;
}

bool closed(const Grid& g, Side side) { return side == Side::left ? g.closed_left : g.closed_right; }

double relative_gap(double grid_value, double closed_form, double scale) {
    return std::abs(grid_value - closed_form) / std::max(std::abs(closed_form), scale);
}

}  // namespace

GridFunction generator_apply(const GridFunction& f, const GeneratorSettings& settings) {
    const Grid& g = *f.grid;
    const std::size_t n = g.size();
    const double tol = settings.shape_tol * max_abs_derivative(f);
    const auto dm = cell_masses(g);

    for (std::size_t i = 1; i + 1 < n; ++i)
        if (g.atom[i] == 0.0 && std::abs(f.v_right[i] - f.v_left[i]) > tol)
            throw Error(ErrorCode::not_in_domain_shape,
                        "df/ds jumps by " + format_number(f.v_right[i] - f.v_left[i]) + " at x = " +
                            format_number(g.x[i]) + " where m has no atom");
    // Slope of df/ds against the continuous part of m on each cell.
    std::vector<double> slope(n - 1, 0.0);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        const double dv = f.v_left[c + 1] - f.v_right[c];
        if (dm[c] > 0.0) {
            slope[c] = dv / dm[c];
        } else if (std::abs(dv) > tol) {
            throw Error(ErrorCode::not_in_domain_shape, "df/ds changes by " + format_number(dv) + " on (" +
                                                            format_number(g.x[c]) + ", " + format_number(g.x[c + 1]) +
                                                            "] which m does not charge");
        }
    }

    GridFunction out(f.grid);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        if (i == 0 || i + 1 == n) {
            // Linear extrapolation of the cell slopes, which sit at cell midpoints in m.
            const std::size_t a = i == 0 ? 0 : n - 2, b = i == 0 ? 1 : n - 3;
            d = n < 3 || dm[a] + dm[b] == 0.0 ? slope[a] : slope[a] - (slope[b] - slope[a]) * dm[a] / (dm[a] + dm[b]);
        } else if (g.atom[i] > 0.0) {
            d = (f.v_right[i] - f.v_left[i]) / g.atom[i];
        } else if (dm[i - 1] + dm[i] > 0.0) {
            d = (slope[i - 1] * dm[i] + slope[i] * dm[i - 1]) / (dm[i - 1] + dm[i]);
        }
        out.value[i] = 0.5 * d;
    }
    if (g.closed_left && g.atom[0] > 0.0) out.value[0] = 0.5 * f.v_right[0] / g.atom[0];
    if (g.closed_right && g.atom[n - 1] > 0.0) out.value[n - 1] = -0.5 * f.v_left[n - 1] / g.atom[n - 1];

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1, b = i + 1 == n ? n - 1 : i + 1;
        double span = 0.0;
        for (std::size_t c = a; c < b; ++c) span += g.ds(c);
        const double v = span > 0.0 ? (out.value[b] - out.value[a]) / span : 0.0;
        out.v_right[i] = out.v_left[i] = v;
    }
    return out;
}

double boundary_derivative(const GridFunction& f, Side side) {
    const Grid& g = *f.grid;
    if (!closed(g, side))
        throw Error(ErrorCode::domain_error, "the grid does not reach the " + std::string(to_string(side)) + " endpoint");
    const std::size_t n = g.size();
    if (n < 4) return side == Side::left ? f.v_right[0] : f.v_left[n - 1];
    double t[3], v[3];
    double dist = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        if (side == Side::left) {
            dist += g.ds(k);
            v[k] = f.v_left[k + 1];
        } else {
            dist += g.ds(n - 2 - k);
            v[k] = f.v_right[n - 2 - k];
        }
        t[k] = dist;
    }
    // Lagrange quadratic through (t_k, v_k) evaluated at t = 0.
    double out = 0.0;
    for (int k = 0; k < 3; ++k) {
        double w = 1.0;
        for (int j = 0; j < 3; ++j)
            if (j != k) w *= t[j] / (t[j] - t[k]);
        out += w * v[k];
    }
    return out;
}

DomainCheck in_generator_domain(const GridFunction& f, const GeneratorSettings& settings) {
    const Grid& g = *f.grid;
    DomainCheck out;
    out.in_form_domain = in_form_domain(f);
    if (!out.in_form_domain) out.violations.emplace_back("f is not in the form domain");
    try {
        const GridFunction lf = generator_apply(f, settings);
        out.shape_ok = true;
        out.lf_l2_squared = l2_inner(lf, lf);
        if (!std::isfinite(out.lf_l2_squared)) out.violations.emplace_back("(1/2) d/dm df/ds is not square integrable");
    } catch (const Error& err) {
        if (err.code() != ErrorCode::not_in_domain_shape) throw;
        out.violations.emplace_back(err.what());
    }
    const double scale = max_abs_derivative(f);
    for (Side side : {Side::left, Side::right}) {
        const auto& end = g.report.at(side);
        if (end.role != Role::reflecting || end.atom > 0.0) continue;
        const double d = boundary_derivative(f, side);
        (side == Side::left ? out.neumann_l : out.neumann_r) = d;
        if (std::abs(d) > settings.neumann_tol * scale)
            out.violations.push_back("Neumann condition fails at " + std::string(to_string(side)) +
                                     ": df/ds = " + format_number(d));
    }
    out.in_domain = out.violations.empty();
    return out;
}

BoundaryConstants boundary_constants(const HarmonicBasis& basis, const GeneratorSettings& settings) {
    if (basis.alpha <= 0.0) throw Error(ErrorCode::domain_error, "boundary constants need alpha > 0");
    const Interval& ie = basis.report.effective_interval();
    BoundaryConstants out;
    out.C = basis.C;
    const double C = basis.C;
    auto check = [&](const char* what, double grid_value, double closed_form, double scale) {
        const double gap = relative_gap(grid_value, closed_form, scale);
        out.cross_check_error = std::max(out.cross_check_error, gap);
        if (!(gap <= settings.cross_check_tol))
            throw Error(ErrorCode::cross_check_failed, std::string(what) + ": grid " + format_number(grid_value) +
                                                           " vs closed form " + format_number(closed_form));
    };
    for (Side side : {Side::left, Side::right}) {
        if (!ie.includes(side)) continue;
        const bool left = side == Side::left;
        const std::size_t node = left ? 0 : basis.u.size() - 1;
        const double u = basis.u.value[node];
        const double du = boundary_derivative(basis.u, side);
        const double dplus = boundary_derivative(basis.u_plus, side);
        const double dminus = boundary_derivative(basis.u_minus, side);
        if (left) {
            check("u-(l)", basis.u_minus.value[node], 0.0, C * u);
            check("u+(l)", basis.u_plus.value[node], C * u, C * u);
            check("du-/ds(l)", dminus, 1.0 / u, 1.0 / u);
            check("du+/ds(l)", dplus, C * du - 1.0 / u, 1.0 / u);
        } else {
            check("u+(r)", basis.u_plus.value[node], 0.0, C * u);
            check("u-(r)", basis.u_minus.value[node], C * u, C * u);
            check("du+/ds(r)", dplus, -1.0 / u, 1.0 / u);
            check("du-/ds(r)", dminus, C * du + 1.0 / u, 1.0 / u);
        }
        const double c = -dplus / dminus;
        if (!(c > 0.0) || !std::isfinite(c))
            throw Error(ErrorCode::cross_check_failed,
                        "c_" + std::string(left ? "l" : "r") + " = " + format_number(c) + " is not in (0, inf)");
        (left ? out.du_l : out.du_r) = du;
        (left ? out.du_plus_l : out.du_plus_r) = dplus;
        (left ? out.du_minus_l : out.du_minus_r) = dminus;
        (left ? out.c_l : out.c_r) = c;
    }
    return out;
}

BoundaryConstants boundary_constants(const DiffusionSpec& spec, double alpha, const GeneratorSettings& settings) {
    return boundary_constants(harmonic_space(spec, alpha, settings.harmonic), settings);
}

GeneratorVerdict harmonic_in_domain(const HarmonicBasis& basis, const GeneratorSettings& settings) {
    if (basis.alpha <= 0.0) throw Error(ErrorCode::domain_error, "the generator verdict needs alpha > 0");
    const Interval& ie = basis.report.effective_interval();
    GeneratorVerdict out;
    out.alpha = basis.alpha;
    out.effective = describe(ie);
    out.m_atom_l = ie.includes_l ? basis.report.left.atom : 0.0;
    out.m_atom_r = ie.includes_r ? basis.report.right.atom : 0.0;
    out.constants = boundary_constants(basis, settings);

    auto add_candidate = [&](const char* name, const GridFunction& h) {
        out.candidate_names.emplace_back(name);
        out.candidate_in_domain.push_back(in_generator_domain(h, settings).in_domain);
        const GridFunction lh = generator_apply(h, settings);
        out.atom_values_l.push_back(out.m_atom_l > 0.0 ? lh.value.front() : 0.0);
        out.atom_values_r.push_back(out.m_atom_r > 0.0 ? lh.value.back() : 0.0);
    };
    if (ie.includes_l) add_candidate("u_l", *basis.u_l_norm);
    if (ie.includes_r) add_candidate("u_r", *basis.u_r_norm);

    auto add_member = [&](const char* name, GridFunction h) {
        out.member_names.emplace_back(name);
        out.members.push_back(std::move(h));
    };
    const bool atom_l = out.m_atom_l > 0.0, atom_r = out.m_atom_r > 0.0;
    if (ie.includes_l && ie.includes_r) {
        const auto& k = out.constants;
        out.determinant = *k.du_plus_r * *k.du_minus_l - *k.du_minus_r * *k.du_plus_l;
        if (atom_l && atom_r) {
            out.subspace = "H_alpha = span{u_l, u_r}";
            add_member("u_l", *basis.u_l_norm);
            add_member("u_r", *basis.u_r_norm);
        } else if (atom_l) {
            out.subspace = "span{u_+ + c_r u_-}";
            add_member("u_+ + c_r u_-", basis.u_plus.combine(1.0, basis.u_minus, *k.c_r));
        } else if (atom_r) {
            out.subspace = "span{u_+ + c_l u_-}";
            add_member("u_+ + c_l u_-", basis.u_plus.combine(1.0, basis.u_minus, *k.c_l));
        } else {
            if (!(*out.determinant > 0.0))
                throw Error(ErrorCode::cross_check_failed,
                            "boundary determinant " + format_number(*out.determinant) + " is not positive");
            out.subspace = "{0}";
        }
    } else if (ie.includes_l && atom_l) {
        out.subspace = "H_alpha = span{u_l}";
        add_member("u_l", *basis.u_l_norm);
    } else if (ie.includes_r && atom_r) {
        out.subspace = "H_alpha = span{u_r}";
        add_member("u_r", *basis.u_r_norm);
    } else {
        out.subspace = "{0}";
    }
    out.dim = static_cast<int>(out.members.size());
    return out;
}

GeneratorVerdict harmonic_in_domain(const DiffusionSpec& spec, double alpha, const GeneratorSettings& settings) {
    if (!(alpha > 0.0)) throw Error(ErrorCode::domain_error, "the generator verdict needs alpha > 0");
    return harmonic_in_domain(harmonic_space(spec, alpha, settings.harmonic), settings);
}

double l2_inner(const GridFunction& f, const GridFunction& g) {
    const Grid& grid = *f.grid;
    const auto K = static_cast<std::size_t>(grid.K);
    double sum = 0.0;
    for (std::size_t c = 0; c < grid.cells(); ++c)
        for (std::size_t k = 0; k < K; ++k)
            sum += grid.qwm[c * K + k] * f.at_gauss(c, static_cast<int>(k)) * g.at_gauss(c, static_cast<int>(k));
    for (std::size_t i = 0; i < grid.size(); ++i) sum += grid.atom[i] * f.value[i] * g.value[i];
    return sum;
}

double form_inner(const GridFunction& f, const GridFunction& g) {
    const Grid& grid = *f.grid;
    const auto K = static_cast<std::size_t>(grid.K);
    double sum = 0.0;
    for (std::size_t c = 0; c < grid.cells(); ++c)
        for (std::size_t k = 0; k < K; ++k)
            sum += grid.qws[c * K + k] * f.derivative_at_gauss(c, static_cast<int>(k)) *
                   g.derivative_at_gauss(c, static_cast<int>(k));
    return 0.5 * sum;
}

}  // namespace dharm
