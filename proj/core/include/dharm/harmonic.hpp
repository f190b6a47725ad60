#pragma once

#include <optional>
#include <string>
#include <utility>

#include "dharm/grid.hpp"

namespace dharm {

struct HarmonicSettings {
    GridSettings grid;
    /// Stop once the added series term is below tol relative to u at every node.
    double series_tol = 1e-15;
    int max_terms = 5000;
    /// Agreement required between the series and the independent IVP march.
    double cross_check_tol = 1e-6;
    bool cross_check = true;
};

/// u solving (1/2) d/dm du/ds = alpha u with u(e) = 1, du/ds(e) = 0, summed as
/// the series of iterated integrals u^{n+1}(x) = int_e^x int_{(e,y]} u^n dm ds.
/// Throws overflow when u leaves the exponent budget and
/// convergence_undecided when the series does not settle within max_terms.
GridFunction picard_series(const std::shared_ptr<const Grid>& grid, double alpha,
                           const HarmonicSettings& settings = {});
GridFunction picard_series(const DiffusionSpec& spec, double alpha, const HarmonicSettings& settings = {});

/// Same solution by an implicit Gauss-Legendre march of (u, du/ds) in x,
/// with the atom jumps applied at nodes. Used as an independent cross-check.
GridFunction march_solution(const std::shared_ptr<const Grid>& grid, double alpha);

/// Largest relative disagreement between two solutions on the same grid, over
/// u and both derivative columns (derivatives relative to 1 + |v|).
double solution_discrepancy(const GridFunction& a, const GridFunction& b);

struct UPair {
    GridFunction u_plus;   // u(x) int_x^r u^-2 ds
    GridFunction u_minus;  // u(x) int_l^x u^-2 ds
    double C = 0.0;        // int_l^r u^-2 ds
};

/// Builds u+ and u- from u. The discarded tails of int u^-2 ds beyond a
/// truncated side are re-certified with the final u and du/ds. Endpoint limits:
/// u+(r) = 0 unless r is entrance (then extrapolated), du+/ds(r) = 0 when r is
/// entrance or natural, and the mirrored statements for u- at l.
UPair u_pair(const GridFunction& u, double alpha, double tail_tol = 1e-10);

struct HarmonicBasis {
    double alpha = 0.0;
    BoundaryReport report;
    GridFunction u;
    GridFunction u_plus;   // empty at alpha = 0 when s(r) is infinite
    GridFunction u_minus;  // empty at alpha = 0 when s(l) is infinite
    double C = 0.0;
    std::optional<GridFunction> u_l_norm;
    std::optional<GridFunction> u_r_norm;
    std::optional<double> c_l;
    std::optional<double> c_r;
    int dim = 0;
    std::string span_desc;
};

/// Basis of the alpha-harmonic space for alpha > 0: one normalized member per
/// reflecting endpoint, u_l = u+/u+(l) and u_r = u-/u-(r).
HarmonicBasis harmonic_space(const DiffusionSpec& spec, double alpha, const HarmonicSettings& settings = {});

/// Harmonic functions of the form itself (alpha = 0): affine functions of s
/// selected by the effective interval and the finiteness of s at the ends.
HarmonicBasis harmonic_space_zero(const DiffusionSpec& spec, const HarmonicSettings& settings = {});

/// |v(y) - v(x) - 2 alpha int_{(x,y]} f dm| for grid points x < y.
double residual_weak_identity(const GridFunction& f, double alpha, double x, double y);

/// Weak-identity residuals for all node pairs from cumulative sums.
class WeakIdentityCheck {
public:
    WeakIdentityCheck(const GridFunction& f, double alpha);
    [[nodiscard]] double residual(std::size_t i, std::size_t j) const;
    /// residual / (1 + max(|v(x_i)|, |v(x_j)|)), maximized over all i < j.
    [[nodiscard]] double max_relative() const;

private:
    const GridFunction* f_;
    double lambda_;
    std::vector<double> cumulative_;  // 2 alpha int_{(x_0, x_i]} f dm
};

struct EnergyParts {
    double dirichlet = 0.0;  // (1/2) int (df/ds)^2 ds
    double l2m = 0.0;        // int f^2 dm, endpoint atoms included
};

/// Throws non_finite when either part diverges toward a truncated side.
EnergyParts energy_norm(const GridFunction& f);

/// Finite energy parts and f(j) = 0 at absorbing endpoints.
bool in_form_domain(const GridFunction& f, double tol = 1e-8);

/// Smooth bump phi(s) supported in [s_a, s_b].
struct Bump {
    double s_a = 0.0;
    double s_b = 1.0;
    [[nodiscard]] double value(double s) const noexcept;
    [[nodiscard]] double derivative(double s) const noexcept;
    /// Bump in the natural scale of the grid, sampled as a GridFunction.
    [[nodiscard]] GridFunction on(const std::shared_ptr<const Grid>& grid) const;
    /// Bump whose support is s((a, b)) for a < b inside the interval.
    static Bump between(const DiffusionSpec& spec, double a, double b);
};

/// |(1/2) int (dh/ds) (dphi/ds) ds + alpha int h phi dm|.
double orthogonality_residual(const GridFunction& h, double alpha, const Bump& test_fn);

}  // namespace dharm
