#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dharm/error.hpp"

namespace dharm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { left, right };

constexpr Side opposite(Side side) noexcept { return side == Side::left ? Side::right : Side::left; }
std::string_view to_string(Side side) noexcept;

/// The state-space interval <l, r>. Endpoints may be infinite; an infinite
/// endpoint is never a point of the interval.
struct Interval {
    double l = 0.0;
    double r = 1.0;
    bool includes_l = false;
    bool includes_r = false;

    /// Throws Error(invalid_spec) when l >= r or an infinite endpoint is included.
    void validate() const;

    [[nodiscard]] double endpoint(Side side) const noexcept { return side == Side::left ? l : r; }
    [[nodiscard]] bool includes(Side side) const noexcept {
        return side == Side::left ? includes_l : includes_r;
    }
    [[nodiscard]] bool in_closure(double x) const noexcept { return x >= l && x <= r; }
    [[nodiscard]] bool in_interior(double x) const noexcept { return x > l && x < r; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

std::string describe(const Interval& interval);

/// A nonnegative density on (l, r), optionally with a closed-form increment
/// F(a, b) = int_a^b density. Breakpoints mark kinks where quadrature should split.
class Density {
public:
    using Fn = std::function<double(double)>;
    using IncrementFn = std::function<double(double, double)>;

    Density() = default;
    explicit Density(Fn density, std::vector<double> breakpoints = {}, IncrementFn increment = {});

    [[nodiscard]] double operator()(double x) const { return density_(x); }

    /// int_a^b density(x) dx, oriented (negative for a > b). Returns +/-inf when
    /// the integral diverges.
    [[nodiscard]] double integral(double a, double b) const;

    [[nodiscard]] std::span<const double> breakpoints() const noexcept { return breakpoints_; }
    [[nodiscard]] bool has_closed_form() const noexcept { return static_cast<bool>(increment_); }

private:
    Fn density_;
    std::vector<double> breakpoints_;
    IncrementFn increment_;
};

/// Scale function normalised to s(e) = 0, represented by its density ds/dx.
class ScaleFunction {
public:
    ScaleFunction() = default;
    ScaleFunction(Density density, double e) : density_(std::move(density)), e_(e) {}

    [[nodiscard]] double density(double x) const { return density_(x); }
    [[nodiscard]] double value(double x) const { return density_.integral(e_, x); }
    /// s(b) - s(a)
    [[nodiscard]] double increment(double a, double b) const { return density_.integral(a, b); }
    [[nodiscard]] double reference() const noexcept { return e_; }
    [[nodiscard]] const Density& measure() const noexcept { return density_; }

private:
    Density density_;
    double e_ = 0.0;
};

struct Atom {
    double x = 0.0;
    double mass = 0.0;
};

/// Speed measure: absolutely continuous part plus finitely many atoms.
class SpeedMeasure {
public:
    SpeedMeasure() = default;
    SpeedMeasure(Density density, std::vector<Atom> atoms);

    [[nodiscard]] double density(double x) const { return density_(x); }
    [[nodiscard]] std::span<const Atom> atoms() const noexcept { return atoms_; }
    /// Mass of the atom located exactly at x, or 0.
    [[nodiscard]] double atom_at(double x) const noexcept;
    /// Sum of atom masses in the half-open interval (a, b].
    [[nodiscard]] double atom_mass(double a, double b) const noexcept;
    /// m((a, b]) for a <= b; may be +inf.
    [[nodiscard]] double mass(double a, double b) const;
    [[nodiscard]] const Density& continuous_part() const noexcept { return density_; }

private:
    Density density_;
    std::vector<Atom> atoms_;
};

enum class Family { brownian, brownian_drift, ou, bessel, tabulated, custom };

std::string_view to_string(Family family) noexcept;

/// The (I, s, m) triple plus the reference point carried by the scale function.
struct DiffusionSpec {
    Interval interval;
    ScaleFunction scale;
    SpeedMeasure speed;
    Family family = Family::custom;
    double family_parameter = 0.0;

    [[nodiscard]] double e() const noexcept { return scale.reference(); }
    [[nodiscard]] std::string family_tag() const;
};

// --- built-in families, in the normalisation L = 1/2 d/dm d/ds --------------

DiffusionSpec brownian(Interval interval, double e, std::vector<Atom> atoms = {});
/// s' = exp(-2 mu x), m' = exp(2 mu x)
DiffusionSpec brownian_drift(double mu, Interval interval, double e, std::vector<Atom> atoms = {});
/// s' = exp(theta x^2), m' = exp(-theta x^2)
DiffusionSpec ornstein_uhlenbeck(double theta, Interval interval, double e,
                                 std::vector<Atom> atoms = {});
/// s' = x^(1-delta), m' = x^(delta-1) on a subinterval of (0, inf)
DiffusionSpec bessel(double delta, Interval interval, double e, std::vector<Atom> atoms = {});

/// A cumulative table (x_i, c_i), strictly increasing in both coordinates,
/// interpolated piecewise linearly. The first/last cell may instead carry a
/// power-law density |x - endpoint|^exponent toward the interval endpoint.
struct CumulativeTable {
    std::vector<double> x;
    std::vector<double> values;
    std::optional<double> left_exponent;
    std::optional<double> right_exponent;
};

/// Builds the density of a cumulative table; throws invalid_spec on bad tables.
Density density_from_table(const CumulativeTable& table);

/// Tabulated spec: table x-ranges must span [l, r] exactly (finite endpoints).
DiffusionSpec tabulated(Interval interval, double e, const CumulativeTable& scale_table,
                        const CumulativeTable& speed_cdf, std::vector<Atom> atoms = {});

DiffusionSpec custom(Interval interval, double e, Density scale_density, Density speed_density,
                     std::vector<Atom> atoms = {});

// --- integration -------------------------------------------------------------

enum class Integrator { ds, m };

/// int_{(a,b]} f d(measure); atoms at b counted, at a excluded; a > b gives the
/// negated integral over (b, a]. Throws DomainError if [a,b] is not inside the
/// closed interval and NonFinite if the integral diverges.
double stieltjes_integral(const std::function<double(double)>& f, Integrator measure,
                          const DiffusionSpec& spec, double a, double b);

/// int_{(a,b]} (s(b) - s(eta)) m(d eta), a < b.
double weighted_mass_to_right(const DiffusionSpec& spec, double a, double b);
/// int_{(a,b]} (s(eta) - s(a)) m(d eta), a < b.
double weighted_mass_from_left(const DiffusionSpec& spec, double a, double b);

// --- limits along geometric approach sequences -------------------------------

struct LimitOptions {
    double tol = 1e-9;
    double cap = 1e12;
    int max_steps = 60;
};

struct LimitResult {
    enum class Kind { finite, divergent, undecided };
    Kind kind = Kind::undecided;
    double value = 0.0;  // limit (finite) or last value seen
    int steps = 0;

    [[nodiscard]] bool finite() const noexcept { return kind == Kind::finite; }
    [[nodiscard]] bool divergent() const noexcept { return kind == Kind::divergent; }
    /// Limit as an extended real; throws convergence_undecided when undecided.
    [[nodiscard]] double extended() const;
};

/// Consumes a monotone sequence one value at a time and certifies its limit:
/// Cauchy convergence below tol (finite), magnitude above cap or increment
/// ratios pinned at 1 (divergent). When the budget runs out, a stable
/// contracting increment ratio still certifies a finite geometric tail.
class LimitCertifier {
public:
    explicit LimitCertifier(LimitOptions opts = {}) : opts_(opts) {}

    /// Returns the verdict once decided; further pushes are ignored.
    std::optional<LimitResult> push(double value);
    [[nodiscard]] LimitResult result() const;
    [[nodiscard]] bool decided() const noexcept { return decided_.has_value(); }

private:
    [[nodiscard]] std::vector<double> recent_ratios() const;

    LimitOptions opts_;
    std::vector<double> values_;
    std::optional<LimitResult> decided_;
};

/// Points approaching the endpoint on `side` from e: e + (j - e) (1 - 2^-(k+1))
/// for finite j, e +/- 2^k for infinite j. Stops early once points get within
/// about 2^20 ulps of a finite j.
std::vector<double> approach_points(const Interval& interval, double e, Side side, int max_steps);

/// Certifies lim g(x) as x -> endpoint along approach_points.
LimitResult limit_at_boundary(const std::function<double(double)>& g, const DiffusionSpec& spec,
                              Side side, LimitOptions opts = {});
/// Sequence form: g(k) for k = 0, 1, ...
LimitResult limit_at_boundary(const std::function<double(int)>& g, LimitOptions opts = {});

/// Magnitudes of s, m, sigma and mu accumulated along the approach sequence
/// toward one endpoint. All entries are nonnegative and nondecreasing in k.
struct ApproachProfile {
    Side side = Side::right;
    std::vector<double> x;
    std::vector<double> abs_s;   // |s(x_k)|
    std::vector<double> mass;    // m between e and x_k
    std::vector<double> sigma;   // sigma(x_k)
    std::vector<double> mu;      // mu(x_k)
};

struct EndpointLimits {
    LimitResult s;      // |s(j)|
    LimitResult mass;   // m(j-) or m(l+) relative to e
    LimitResult sigma;
    LimitResult mu;
    ApproachProfile profile;
};

/// Walks the approach sequence toward `side` until |s|, m, sigma and mu are all
/// certified or the step budget runs out.
EndpointLimits endpoint_limits(const DiffusionSpec& spec, Side side, LimitOptions opts = {});

/// sigma(x) on the closed interval; endpoints via limit certification (+inf if
/// divergent). Throws convergence_undecided when the endpoint limit is undecided.
double sigma(const DiffusionSpec& spec, double x, LimitOptions opts = {});
double mu(const DiffusionSpec& spec, double x, LimitOptions opts = {});

/// sigma at every point of a sorted node set by accumulating segment increments
/// outward from e. Nodes must lie in the open interval.
std::vector<double> sigma_at(const DiffusionSpec& spec, std::span<const double> sorted_nodes);

}  // namespace dharm
