#include "dharm/measures.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "dharm/quadrature.hpp"

namespace dharm {

namespace {

/// int_a^b x^p dx for 0 <= a <= b, evaluated without cancellation.
double power_increment(double a, double b, double p) {
    if (a == b) return 0.0;
    const double q = p + 1.0;
    if (a == 0.0) return q > 0.0 ? (std::isinf(b) ? kInf : std::pow(b, q) / q) : kInf;
    if (std::isinf(b)) return q < 0.0 ? -std::pow(a, q) / q : kInf;
    const double log_ratio = std::log1p((b - a) / a);
    if (q == 0.0) return log_ratio;
    return std::pow(a, q) * std::expm1(q * log_ratio) / q;
}

/// int_a^b exp(c x) dx, a <= b, either limit possibly infinite.
double exponential_increment(double a, double b, double c) {
    if (a == b) return 0.0;
    if (c == 0.0) return b - a;
    if (c > 0.0) {
        if (std::isinf(b)) return kInf;
        return std::exp(c * b) * (-std::expm1(-c * (b - a))) / c;
    }
    if (std::isinf(a)) return kInf;
    return std::exp(c * a) * (-std::expm1(c * (b - a))) / (-c);
}

/// int_a^b exp(-theta x^2) dx for theta > 0, choosing erf or erfc by sign.
double gaussian_increment(double a, double b, double theta) {
    const double k = std::sqrt(theta);
    const double scale = 0.5 * std::sqrt(std::numbers::pi / theta);
    if (a >= 0.0) return scale * (std::erfc(k * a) - std::erfc(k * b));
    if (b <= 0.0) return scale * (std::erfc(-k * b) - std::erfc(-k * a));
    return scale * (std::erf(k * b) - std::erf(k * a));
}

constexpr double kEndpointResolution = 0x1p20 * std::numeric_limits<double>::epsilon();

/// An unconverged quadrature is still accepted when its error estimate sits at
/// the rounding-noise level; genuine endpoint singularities leave errors of
/// order 1e-3 or more.
constexpr double kNoiseAcceptance = 1e-5;

bool diverged(const QuadratureResult& r) {
    return r.non_finite || (!r.converged && r.error > kNoiseAcceptance * std::abs(r.value));
}

/// Segment integrals along approach sequences are smooth; a bounded panel count
/// keeps near-endpoint segments (where node rounding sets a noise floor) cheap.
const QuadratureOptions kSegmentOptions{1e-15, 1e-11, 256};

Density::IncrementFn oriented(std::function<double(double, double)> ordered) {
    return [ordered = std::move(ordered)](double a, double b) {
        if (a == b) return 0.0;
        return a < b ? ordered(a, b) : -ordered(b, a);
    };
}

void check_reference(const Interval& interval, double e) {
    interval.validate();
    if (!(e > interval.l && e < interval.r))
        throw Error(ErrorCode::invalid_spec, "reference point e must lie in (l, r)");
}

std::vector<Atom> sorted_atoms(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    for (const auto& atom : atoms) {
        if (!std::isfinite(atom.x) || !(atom.mass > 0.0) || !std::isfinite(atom.mass))
            throw Error(ErrorCode::invalid_spec, "atoms need a finite location and finite mass > 0");
    }
    for (std::size_t i = 1; i < atoms.size(); ++i)
        if (atoms[i].x == atoms[i - 1].x)
            throw Error(ErrorCode::invalid_spec, "duplicate atom location " + format_number(atoms[i].x));
    return atoms;
}

DiffusionSpec assemble(Interval interval, double e, Density scale, Density speed,
                       std::vector<Atom> atoms, Family family, double parameter) {
    check_reference(interval, e);
    DiffusionSpec spec;
    spec.interval = interval;
    spec.scale = ScaleFunction(std::move(scale), e);
    spec.speed = SpeedMeasure(std::move(speed), sorted_atoms(std::move(atoms)));
    spec.family = family;
    spec.family_parameter = parameter;
    return spec;
}

}  // namespace

std::string_view to_string(Side side) noexcept { return side == Side::left ? "l" : "r"; }

void Interval::validate() const {
    if (std::isnan(l) || std::isnan(r)) throw Error(ErrorCode::invalid_spec, "interval endpoint is NaN");
    if (!(l < r)) throw Error(ErrorCode::invalid_spec, "interval needs l < r");
    if (includes_l && std::isinf(l))
        throw Error(ErrorCode::invalid_spec, "an infinite endpoint cannot be included (l)");
    if (includes_r && std::isinf(r))
        throw Error(ErrorCode::invalid_spec, "an infinite endpoint cannot be included (r)");
}

std::string describe(const Interval& interval) {
    return std::string(interval.includes_l ? "[" : "(") + format_number(interval.l) + ", " +
           format_number(interval.r) + (interval.includes_r ? "]" : ")");
}

Density::Density(Fn density, std::vector<double> breakpoints, IncrementFn increment)
    : density_(std::move(density)), breakpoints_(std::move(breakpoints)), increment_(std::move(increment)) {
    std::sort(breakpoints_.begin(), breakpoints_.end());
    breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());
}

double Density::integral(double a, double b) const {
    if (a == b) return 0.0;
    if (increment_) return increment_(a, b);
    const auto r = integrate(density_, a, b, breakpoints_);
    const double sign = a < b ? 1.0 : -1.0;
    return diverged(r) ? sign * kInf : r.value;
}

SpeedMeasure::SpeedMeasure(Density density, std::vector<Atom> atoms)
    : density_(std::move(density)), atoms_(std::move(atoms)) {}

double SpeedMeasure::atom_at(double x) const noexcept {
    for (const auto& atom : atoms_)
        if (atom.x == x) return atom.mass;
    return 0.0;
}

double SpeedMeasure::atom_mass(double a, double b) const noexcept {
    double total = 0.0;
    for (const auto& atom : atoms_)
        if (atom.x > a && atom.x <= b) total += atom.mass;
    return total;
}

double SpeedMeasure::mass(double a, double b) const {
    if (a >= b) return 0.0;
    return density_.integral(a, b) + atom_mass(a, b);
}

std::string_view to_string(Family family) noexcept {
    switch (family) {
        case Family::brownian: return "brownian";
        case Family::brownian_drift: return "brownian_drift";
        case Family::ou: return "ou";
        case Family::bessel: return "bessel";
        case Family::tabulated: return "tabulated";
        case Family::custom: return "custom";
    }
    return "custom";
}

std::string DiffusionSpec::family_tag() const {
    std::ostringstream os;
    os << to_string(family);
    switch (family) {
        case Family::brownian_drift: os << "(mu=" << format_number(family_parameter) << ")"; break;
        case Family::ou: os << "(theta=" << format_number(family_parameter) << ")"; break;
        case Family::bessel: os << "(delta=" << format_number(family_parameter) << ")"; break;
        default: break;
    }
    return os.str();
}

DiffusionSpec brownian(Interval interval, double e, std::vector<Atom> atoms) {
    auto lebesgue = [] {
        return Density([](double) { return 1.0; }, {}, oriented([](double a, double b) { return b - a; }));
    };
    return assemble(interval, e, lebesgue(), lebesgue(), std::move(atoms), Family::brownian, 0.0);
}

DiffusionSpec brownian_drift(double mu, Interval interval, double e, std::vector<Atom> atoms) {
    if (!std::isfinite(mu)) throw Error(ErrorCode::invalid_spec, "drift must be finite");
    Density scale([mu](double x) { return std::exp(-2.0 * mu * x); }, {},
                  oriented([mu](double a, double b) { return exponential_increment(a, b, -2.0 * mu); }));
    Density speed([mu](double x) { return std::exp(2.0 * mu * x); }, {},
                  oriented([mu](double a, double b) { return exponential_increment(a, b, 2.0 * mu); }));
    return assemble(interval, e, std::move(scale), std::move(speed), std::move(atoms),
                    Family::brownian_drift, mu);
}

DiffusionSpec ornstein_uhlenbeck(double theta, Interval interval, double e, std::vector<Atom> atoms) {
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw Error(ErrorCode::invalid_spec, "ou needs a finite theta > 0");
    Density scale([theta](double x) { return std::exp(theta * x * x); }, {0.0});
    Density speed([theta](double x) { return std::exp(-theta * x * x); }, {0.0},
                  oriented([theta](double a, double b) { return gaussian_increment(a, b, theta); }));
    return assemble(interval, e, std::move(scale), std::move(speed), std::move(atoms), Family::ou, theta);
}

DiffusionSpec bessel(double delta, Interval interval, double e, std::vector<Atom> atoms) {
    if (!std::isfinite(delta)) throw Error(ErrorCode::invalid_spec, "bessel dimension must be finite");
    if (interval.l < 0.0) throw Error(ErrorCode::invalid_spec, "bessel interval must lie in [0, inf)");
    if (interval.l == 0.0 && interval.includes_l && delta >= 2.0)
        throw Error(ErrorCode::invalid_spec, "bessel: 0 is not regular for delta >= 2 and cannot be included");
    const double ps = 1.0 - delta;
    const double pm = delta - 1.0;
    Density scale([ps](double x) { return std::pow(x, ps); }, {},
                  oriented([ps](double a, double b) { return power_increment(a, b, ps); }));
    Density speed([pm](double x) { return std::pow(x, pm); }, {},
                  oriented([pm](double a, double b) { return power_increment(a, b, pm); }));
    return assemble(interval, e, std::move(scale), std::move(speed), std::move(atoms), Family::bessel, delta);
}

Density density_from_table(const CumulativeTable& table) {
    const auto& x = table.x;
    const auto& c = table.values;
    const std::size_t n = x.size();
    if (n < 2 || c.size() != n) throw Error(ErrorCode::invalid_spec, "table needs >= 2 (x, value) pairs");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(c[i]))
            throw Error(ErrorCode::invalid_spec, "table entries must be finite");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x[i] > x[i - 1])) throw Error(ErrorCode::invalid_spec, "table x must be strictly increasing");
        if (!(c[i] > c[i - 1]))
            throw Error(ErrorCode::invalid_spec, "table values must be strictly increasing");
    }
    for (const auto& exponent : {table.left_exponent, table.right_exponent})
        if (exponent && !std::isfinite(*exponent))
            throw Error(ErrorCode::invalid_spec, "tail exponent must be finite");

    struct Cell {
        double lo, hi, delta;
        int tail;          // 0 none, -1 toward lo, +1 toward hi
        double exponent;
        double k;          // density scale for tails, slope otherwise
    };
    auto cells = std::make_shared<std::vector<Cell>>();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        Cell cell{x[i], x[i + 1], c[i + 1] - c[i], 0, 0.0, 0.0};
        const double width = cell.hi - cell.lo;
        std::optional<double> exponent;
        if (i == 0 && table.left_exponent) {
            cell.tail = -1;
            exponent = table.left_exponent;
        }
        if (i + 2 == n && table.right_exponent) {
            if (cell.tail != 0)
                throw Error(ErrorCode::invalid_spec, "a single-cell table cannot carry two tails");
            cell.tail = 1;
            exponent = table.right_exponent;
        }
        if (exponent) {
            cell.exponent = *exponent;
            cell.k = cell.exponent > -1.0 ? cell.delta * (cell.exponent + 1.0) / width : cell.delta / width;
        } else {
            cell.k = cell.delta / width;
        }
        cells->push_back(cell);
    }

    auto locate = [cells](double v) {
        auto it = std::upper_bound(cells->begin(), cells->end(), v,
                                   [](double value, const Cell& cell) { return value < cell.hi; });
        if (it == cells->end()) --it;
        return static_cast<std::size_t>(it - cells->begin());
    };
    auto density = [cells, locate](double v) {
        if (v < cells->front().lo || v > cells->back().hi) return 0.0;
        const Cell& cell = (*cells)[locate(v)];
        if (cell.tail == 0) return cell.k;
        const double width = cell.hi - cell.lo;
        const double d = cell.tail < 0 ? (v - cell.lo) / width : (cell.hi - v) / width;
        return cell.k * std::pow(d, cell.exponent);
    };
    // Sum of per-cell pieces, each evaluated in local coordinates so tiny
    // increments near a tail endpoint keep full relative accuracy.
    auto piece = [](const Cell& cell, double a, double b) {
        const double width = cell.hi - cell.lo;
        if (cell.tail == 0) return cell.k * (b - a);
        if (cell.tail < 0)
            return cell.k * width * power_increment((a - cell.lo) / width, (b - cell.lo) / width, cell.exponent);
        return cell.k * width * power_increment((cell.hi - b) / width, (cell.hi - a) / width, cell.exponent);
    };
    auto increment = [cells, locate, piece](double a, double b) {
        a = std::max(a, cells->front().lo);
        b = std::min(b, cells->back().hi);
        if (a >= b) return 0.0;
        double total = 0.0;
        for (std::size_t i = locate(a); i < cells->size(); ++i) {
            const Cell& cell = (*cells)[i];
            if (cell.lo >= b) break;
            total += piece(cell, std::max(a, cell.lo), std::min(b, cell.hi));
        }
        return total;
    };
    std::vector<double> breakpoints(x.begin() + 1, x.end() - 1);
    return Density(density, std::move(breakpoints), oriented(increment));
}

DiffusionSpec tabulated(Interval interval, double e, const CumulativeTable& scale_table,
                        const CumulativeTable& speed_cdf, std::vector<Atom> atoms) {
    interval.validate();
    if (std::isinf(interval.l) || std::isinf(interval.r))
        throw Error(ErrorCode::invalid_spec, "tabulated specs need finite endpoints");
    for (const auto* table : {&scale_table, &speed_cdf}) {
        if (table->x.empty() || table->x.front() != interval.l || table->x.back() != interval.r)
            throw Error(ErrorCode::invalid_spec, "table x-range must span [l, r] exactly");
    }
    return assemble(interval, e, density_from_table(scale_table), density_from_table(speed_cdf),
                    std::move(atoms), Family::tabulated, 0.0);
}

DiffusionSpec custom(Interval interval, double e, Density scale_density, Density speed_density,
                     std::vector<Atom> atoms) {
    return assemble(interval, e, std::move(scale_density), std::move(speed_density), std::move(atoms),
                    Family::custom, 0.0);
}

double stieltjes_integral(const std::function<double(double)>& f, Integrator measure,
                          const DiffusionSpec& spec, double a, double b) {
    const auto& interval = spec.interval;
    if (std::isnan(a) || std::isnan(b) || !interval.in_closure(a) || !interval.in_closure(b))
        throw Error(ErrorCode::domain_error, "integration range outside the closed interval");
    if (a == b) return 0.0;
    if (a > b) return -stieltjes_integral(f, measure, spec, b, a);

    const Density& density =
        measure == Integrator::ds ? spec.scale.measure() : spec.speed.continuous_part();
    std::vector<double> cuts(density.breakpoints().begin(), density.breakpoints().end());
    if (measure == Integrator::m)
        for (const auto& atom : spec.speed.atoms()) cuts.push_back(atom.x);
    std::sort(cuts.begin(), cuts.end());
    auto integrand = [&](double x) {
        const double w = density(x);
        return w == 0.0 ? 0.0 : f(x) * w;
    };
    const auto r = integrate(integrand, a, b, cuts);
    if (diverged(r))
        throw Error(ErrorCode::non_finite, "integral over (" + format_number(a) + ", " + format_number(b) +
                                               "] diverges");
    double total = r.value;
    if (measure == Integrator::m) {
        for (const auto& atom : spec.speed.atoms())
            if (atom.x > a && atom.x <= b) total += f(atom.x) * atom.mass;
    }
    if (!std::isfinite(total)) throw Error(ErrorCode::non_finite, "integral is not finite");
    return total;
}

double weighted_mass_to_right(const DiffusionSpec& spec, double a, double b) {
    if (!(a < b)) return 0.0;
    const auto& scale = spec.scale;
    const auto& speed = spec.speed;
    auto integrand = [&](double eta) {
        const double w = speed.density(eta);
        return w == 0.0 ? 0.0 : w * scale.increment(eta, b);
    };
    const auto r = integrate(integrand, a, b, speed.continuous_part().breakpoints(), kSegmentOptions);
    if (diverged(r)) return kInf;
    double total = r.value;
    for (const auto& atom : speed.atoms())
        if (atom.x > a && atom.x < b) total += atom.mass * scale.increment(atom.x, b);
    return total;
}

double weighted_mass_from_left(const DiffusionSpec& spec, double a, double b) {
    if (!(a < b)) return 0.0;
    const auto& scale = spec.scale;
    const auto& speed = spec.speed;
    auto integrand = [&](double eta) {
        const double w = speed.density(eta);
        return w == 0.0 ? 0.0 : w * scale.increment(a, eta);
    };
    const auto r = integrate(integrand, a, b, speed.continuous_part().breakpoints(), kSegmentOptions);
    if (diverged(r)) return kInf;
    double total = r.value;
    for (const auto& atom : speed.atoms())
        if (atom.x > a && atom.x <= b) total += atom.mass * scale.increment(a, atom.x);
    return total;
}

double LimitResult::extended() const {
    switch (kind) {
        case Kind::finite: return value;
        case Kind::divergent: return kInf;
        case Kind::undecided: break;
    }
    throw Error(ErrorCode::convergence_undecided,
                "limit neither converged nor diverged within " + std::to_string(steps) + " steps");
}

std::optional<LimitResult> LimitCertifier::push(double value) {
    if (decided_) return decided_;
    values_.push_back(value);
    const int steps = static_cast<int>(values_.size());
    auto decide = [&](LimitResult::Kind kind, double v) {
        decided_ = LimitResult{kind, v, steps};
        return decided_;
    };
    if (std::isnan(value)) return decide(LimitResult::Kind::undecided, value);
    if (std::isinf(value) || std::abs(value) > opts_.cap) return decide(LimitResult::Kind::divergent, value);
    const std::size_t n = values_.size();
    if (n < 3) return std::nullopt;

    const double d1 = std::abs(values_[n - 1] - values_[n - 2]);
    const double d0 = std::abs(values_[n - 2] - values_[n - 3]);
    const double scale = std::max(std::abs(value), std::numeric_limits<double>::min());
    if (d1 <= opts_.tol * scale && d0 <= opts_.tol * scale * 2.0) {
        // Add the geometric tail when the increments are visibly contracting.
        const double r = d0 > 0.0 ? d1 / d0 : 0.0;
        const double sign = values_[n - 1] >= values_[n - 2] ? 1.0 : -1.0;
        return decide(LimitResult::Kind::finite, r < 0.9 ? value + sign * d1 * r / (1.0 - r) : value);
    }
    const auto ratios = recent_ratios();
    if (!ratios.empty() && *std::min_element(ratios.begin(), ratios.end()) >= 0.999)
        return decide(LimitResult::Kind::divergent, value);
    return std::nullopt;
}

std::vector<double> LimitCertifier::recent_ratios() const {
    constexpr std::size_t kWindow = 6;
    const std::size_t n = values_.size();
    if (n < kWindow + 2) return {};
    std::vector<double> ratios;
    for (std::size_t i = n - kWindow; i < n; ++i) {
        const double prev = std::abs(values_[i - 1] - values_[i - 2]);
        const double cur = std::abs(values_[i] - values_[i - 1]);
        if (prev == 0.0) return {};
        ratios.push_back(cur / prev);
    }
    return ratios;
}

LimitResult LimitCertifier::result() const {
    if (decided_) return *decided_;
    // Budget exhausted: a stable contracting increment ratio still certifies a
    // geometric tail, whose sum is added to the last value.
    const auto ratios = recent_ratios();
    if (!ratios.empty()) {
        const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
        if (*hi <= 0.99 && *hi - *lo <= 0.02) {
            const std::size_t n = values_.size();
            const double d = values_[n - 1] - values_[n - 2];
            const double q = ratios.back();
            return LimitResult{LimitResult::Kind::finite, values_.back() + d * q / (1.0 - q),
                               static_cast<int>(n)};
        }
    }
    LimitResult r;
    r.kind = LimitResult::Kind::undecided;
    r.value = values_.empty() ? 0.0 : values_.back();
    r.steps = static_cast<int>(values_.size());
    return r;
}

std::vector<double> approach_points(const Interval& interval, double e, Side side, int max_steps) {
    const double j = interval.endpoint(side);
    std::vector<double> points;
    double previous = e;
    for (int k = 0; k < max_steps; ++k) {
        double x;
        if (std::isinf(j)) {
            x = e + (side == Side::right ? 1.0 : -1.0) * std::ldexp(1.0, k);
        } else {
            x = j - (j - e) * std::ldexp(1.0, -(k + 1));
        }
        if (x == previous || x == j) break;
        // Closer than this, rounding of quadrature nodes perturbs the distance
        // to j by more than about 1e-6 relative.
        if (std::isfinite(j) && std::abs(j - x) < kEndpointResolution * std::abs(j)) break;
        points.push_back(x);
        previous = x;
    }
    return points;
}

LimitResult limit_at_boundary(const std::function<double(double)>& g, const DiffusionSpec& spec, Side side,
                              LimitOptions opts) {
    const auto points = approach_points(spec.interval, spec.e(), side, opts.max_steps);
    LimitCertifier certifier(opts);
    for (double x : points)
        if (certifier.push(g(x))) break;
    return certifier.result();
}

LimitResult limit_at_boundary(const std::function<double(int)>& g, LimitOptions opts) {
    LimitCertifier certifier(opts);
    for (int k = 0; k < opts.max_steps; ++k)
        if (certifier.push(g(k))) break;
    return certifier.result();
}

EndpointLimits endpoint_limits(const DiffusionSpec& spec, Side side, LimitOptions opts) {
    EndpointLimits out;
    out.profile.side = side;
    const double e = spec.e();
    const auto points = approach_points(spec.interval, e, side, opts.max_steps);
    LimitCertifier cs(opts), cm(opts), csig(opts), cmu(opts);

    double prev = e, abs_s = 0.0, mass = 0.0, sig = 0.0, mu_acc = 0.0;
    for (double x : points) {
        const double lo = side == Side::right ? prev : x;
        const double hi = side == Side::right ? x : prev;
        const double ds = spec.scale.increment(lo, hi);
        const double dm = spec.speed.mass(lo, hi);
        // sigma gains M ds on the new segment plus the mass inside it weighted by
        // its scale distance to the far end; mu symmetrically.
        const double w_sigma = side == Side::right ? weighted_mass_to_right(spec, lo, hi)
                                                   : weighted_mass_from_left(spec, lo, hi);
        const double w_mu = side == Side::right ? weighted_mass_from_left(spec, lo, hi)
                                                : weighted_mass_to_right(spec, lo, hi);
        sig += mass * ds + w_sigma;
        mu_acc += abs_s * dm + w_mu;
        abs_s += ds;
        mass += dm;
        out.profile.x.push_back(x);
        out.profile.abs_s.push_back(abs_s);
        out.profile.mass.push_back(mass);
        out.profile.sigma.push_back(sig);
        out.profile.mu.push_back(mu_acc);
        cs.push(abs_s);
        cm.push(mass);
        csig.push(sig);
        cmu.push(mu_acc);
        prev = x;
        if (cs.decided() && cm.decided() && csig.decided() && cmu.decided()) break;
    }
    out.s = cs.result();
    out.mass = cm.result();
    out.sigma = csig.result();
    out.mu = cmu.result();
    return out;
}

namespace {

double iterated(const DiffusionSpec& spec, double x, LimitOptions opts, bool want_sigma) {
    const auto& interval = spec.interval;
    if (std::isnan(x) || !interval.in_closure(x))
        throw Error(ErrorCode::domain_error, "point outside the closed interval");
    const double e = spec.e();
    if (x == e) return 0.0;
    if (x == interval.l || x == interval.r) {
        const auto limits = endpoint_limits(spec, x == interval.l ? Side::left : Side::right, opts);
        return (want_sigma ? limits.sigma : limits.mu).extended();
    }
    if (x > e) return want_sigma ? weighted_mass_to_right(spec, e, x) : weighted_mass_from_left(spec, e, x);
    return want_sigma ? weighted_mass_from_left(spec, x, e) : weighted_mass_to_right(spec, x, e);
}

}  // namespace

double sigma(const DiffusionSpec& spec, double x, LimitOptions opts) { return iterated(spec, x, opts, true); }

double mu(const DiffusionSpec& spec, double x, LimitOptions opts) { return iterated(spec, x, opts, false); }

std::vector<double> sigma_at(const DiffusionSpec& spec, std::span<const double> sorted_nodes) {
    const double e = spec.e();
    std::vector<double> out(sorted_nodes.size(), 0.0);
    const auto first_right = static_cast<std::size_t>(
        std::lower_bound(sorted_nodes.begin(), sorted_nodes.end(), e) - sorted_nodes.begin());

    double prev = e, mass = 0.0, acc = 0.0;
    for (std::size_t i = first_right; i < sorted_nodes.size(); ++i) {
        const double x = sorted_nodes[i];
        if (!spec.interval.in_interior(x)) throw Error(ErrorCode::domain_error, "node outside (l, r)");
        acc += mass * spec.scale.increment(prev, x) + weighted_mass_to_right(spec, prev, x);
        mass += spec.speed.mass(prev, x);
        out[i] = acc;
        prev = x;
    }
    prev = e;
    mass = 0.0;
    acc = 0.0;
    for (std::size_t i = first_right; i-- > 0;) {
        const double x = sorted_nodes[i];
        if (!spec.interval.in_interior(x)) throw Error(ErrorCode::domain_error, "node outside (l, r)");
        acc += mass * spec.scale.increment(x, prev) + weighted_mass_from_left(spec, x, prev);
        mass += spec.speed.mass(x, prev);
        out[i] = acc;
        prev = x;
    }
    return out;
}

}  // namespace dharm
