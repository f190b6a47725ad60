#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dharm/boundary.hpp"

namespace dharm {

struct GridSettings {
    /// Nodes equidistributed in the placement coordinate, on top of the
    /// mandatory nodes (e, breakpoints, atoms, geometric endpoint nodes).
    int grid_points = 2048;
    /// Gauss-Legendre points per cell for the measure sums.
    int gauss_points = 8;
    /// Certified bound on the discarded part of int u^-2 ds at a truncated
    /// side, relative to the retained part.
    double tail_tol = 1e-10;
    /// Truncation depth (approach steps) for alpha = 0 grids at sides that are
    /// not closed.
    int zero_alpha_depth = 40;
    LimitOptions limits;
};

/// Strictly increasing nodes covering the closure of the effective domain:
/// a finite regular endpoint is the first/last node itself ("closed" side),
/// any other side is truncated at a geometric approach point.
class Grid {
public:
    DiffusionSpec spec;
    BoundaryReport report;
    double lambda = 0.0;  // series parameter 2 alpha the node placement was tuned for

    std::vector<double> x;
    std::vector<double> s;     // s at nodes
    std::vector<double> cell_ds;  // exact s increments per cell (not differences of s)
    std::vector<double> atom;  // m({x_i}); nonzero only at interior atoms and closed endpoints
    std::size_t e_index = 0;
    bool closed_left = false;
    bool closed_right = false;
    /// False when the pre-march could not certify the discarded tail of
    /// int u^-2 ds on that side; u itself is still valid on the grid.
    bool tail_certified_left = true;
    bool tail_certified_right = true;

    /// Per-cell Gauss data, cell i = (x_i, x_{i+1}), points [i*K, (i+1)*K).
    int K = 8;
    std::vector<double> qx;       // abscissae
    std::vector<double> qs_lo;    // s(xi) - s_i
    std::vector<double> qs_hi;    // s_{i+1} - s(xi)
    std::vector<double> qwm;      // weights of the continuous part of m
    std::vector<double> qws;      // weights of ds
    /// Hermite basis in s at each Gauss point: f(xi) = h[0] f_i + h[1] v_i^+ + h[2] f_{i+1} + h[3] v_{i+1}^-.
    std::vector<std::array<double, 4>> qh;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    [[nodiscard]] std::size_t cells() const noexcept { return x.size() - 1; }
    [[nodiscard]] double ds(std::size_t cell) const noexcept { return cell_ds[cell]; }
    [[nodiscard]] bool is_endpoint_node(std::size_t i) const noexcept {
        return (i == 0 && closed_left) || (i + 1 == x.size() && closed_right);
    }
    /// Cell containing x (x_i <= x < x_{i+1}; the last cell also takes x_N).
    [[nodiscard]] std::size_t locate(double value) const;
    /// s(x) for x inside the grid range, measured from the nearest node.
    [[nodiscard]] double scale_at(double value) const;
};

/// Builds the grid for series parameter lambda = 2 alpha. For lambda > 0 the
/// truncation point of a non-closed side is where the certified bound on
/// int u^-2 ds beyond it (from a lower-bound pre-march of u and du/ds) falls
/// below settings.tail_tol times the retained part. When that does not happen
/// within the approach budget the whole sequence is kept and the side is
/// flagged uncertified. Throws overflow when u leaves the exponent budget first.
std::shared_ptr<const Grid> build_grid(const DiffusionSpec& spec, const BoundaryReport& report,
                                       double lambda, const GridSettings& settings = {});

/// A function on a grid with its right-continuous ds-derivative (v_right) and
/// left limits (v_left); the two differ only at atoms of m.
class GridFunction {
public:
    std::shared_ptr<const Grid> grid;
    std::vector<double> value;
    std::vector<double> v_right;
    std::vector<double> v_left;
    /// Limits at l and r when they exist (value and ds-derivative).
    std::optional<double> limit_l, limit_r, deriv_limit_l, deriv_limit_r;

    GridFunction() = default;
    explicit GridFunction(std::shared_ptr<const Grid> g);

    [[nodiscard]] std::size_t size() const noexcept { return value.size(); }
    /// Hermite interpolation in s; throws domain_error outside the grid range
    /// unless x is an endpoint with a known limit.
    [[nodiscard]] double at(double x) const;
    /// Right-continuous ds-derivative of the interpolant.
    [[nodiscard]] double derivative_at(double x) const;
    /// Value of the interpolant at Gauss point k of cell i.
    [[nodiscard]] double at_gauss(std::size_t cell, int k) const;
    /// ds-derivative of the interpolant at Gauss point k of cell i.
    [[nodiscard]] double derivative_at_gauss(std::size_t cell, int k) const;

    /// Samples f and its ds-derivative at the nodes. df_ds_left defaults to
    /// df_ds (functions without derivative jumps).
    static GridFunction from_functions(std::shared_ptr<const Grid> g, const std::function<double(double)>& f,
                                       const std::function<double(double)>& df_ds,
                                       const std::function<double(double)>& df_ds_left = {});

    GridFunction& scale(double factor);
    [[nodiscard]] GridFunction combine(double a, const GridFunction& other, double b) const;
};

/// Cubic Hermite interpolation on t in [0, 1] with derivatives already scaled
/// by the interval length.
inline std::array<double, 4> hermite_basis(double t) noexcept {
    const double t2 = t * t, t3 = t2 * t;
    return {2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2};
}
inline std::array<double, 4> hermite_basis_derivative(double t) noexcept {
    const double t2 = t * t;
    return {6 * t2 - 6 * t, 3 * t2 - 4 * t + 1, -6 * t2 + 6 * t, 3 * t2 - 2 * t};
}

}  // namespace dharm
