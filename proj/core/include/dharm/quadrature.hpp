#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dharm {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Computes the n-point Gauss-Legendre rule by Newton iteration on P_n.
/// Rules are cached; the returned reference stays valid for the program lifetime.
const GaussRule& gauss_legendre(std::size_t n);

struct QuadratureOptions {
    double abs_tol = 1e-14;
    double rel_tol = 1e-12;
    std::size_t max_intervals = 4000;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    /// True when the integrand produced +inf/NaN or the sum blew up.
    bool non_finite = false;
};

/// Globally adaptive Gauss-Legendre quadrature of f over [a, b] with a < b
/// both finite. The error of a panel is estimated by comparing the rule on the
/// panel with the sum over its two halves; the worst panel is split first.
/// Endpoints are never evaluated, so integrable endpoint singularities are fine.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureOptions& opts = {});

/// Same as integrate_adaptive but accepts infinite limits, mapping the range
/// through t = x / (1 + |x|). Breakpoints (sorted, strictly inside (a, b)) split
/// the range before adaptation.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints = {},
                           const QuadratureOptions& opts = {});

/// Fixed n-point Gauss-Legendre on [a, b].
double integrate_fixed(const std::function<double(double)>& f, double a, double b, std::size_t n);

}  // namespace dharm
