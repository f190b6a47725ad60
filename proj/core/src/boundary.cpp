#include "dharm/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace dharm {

std::string_view to_string(BoundaryClass cls) noexcept {
    switch (cls) {
        case BoundaryClass::regular: return "Regular";
        case BoundaryClass::exit: return "Exit";
        case BoundaryClass::entrance: return "Entrance";
        case BoundaryClass::natural: return "Natural";
    }
    return "Natural";
}

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::absorbing: return "Absorbing";
        case Role::reflecting: return "Reflecting";
        case Role::none: return "None";
    }
    return "None";
}

BoundaryClass classify(bool sigma_finite, bool mu_finite) noexcept {
    if (sigma_finite) return mu_finite ? BoundaryClass::regular : BoundaryClass::exit;
    return mu_finite ? BoundaryClass::entrance : BoundaryClass::natural;
}

double EndpointReport::signed_scale() const {
    const double magnitude = s.extended();
    return side == Side::left ? -magnitude : magnitude;
}

bool EndpointReport::approachable() const { return std::isfinite(s.extended()); }

const Interval& BoundaryReport::effective_interval() const {
    if (!effective) throw Error(ErrorCode::convergence_undecided, "endpoint class undecided");
    return *effective;
}

EndpointReport analyze_endpoint(const DiffusionSpec& spec, Side side, LimitOptions opts) {
    EndpointReport report;
    report.side = side;
    report.location = spec.interval.endpoint(side);
    report.included = spec.interval.includes(side);
    report.atom = report.included ? spec.speed.atom_at(report.location) : 0.0;
    const auto limits = endpoint_limits(spec, side, opts);
    report.sigma = limits.sigma;
    report.mu = limits.mu;
    report.s = limits.s;
    report.mass = limits.mass;
    const bool decided = report.sigma.kind != LimitResult::Kind::undecided &&
                         report.mu.kind != LimitResult::Kind::undecided;
    if (decided) {
        report.cls = classify(report.sigma.finite(), report.mu.finite());
        if (*report.cls == BoundaryClass::regular)
            report.role = report.included ? Role::reflecting : Role::absorbing;
    }
    return report;
}

BoundaryReport boundary_report(const DiffusionSpec& spec, LimitOptions opts) {
    BoundaryReport report;
    report.left = analyze_endpoint(spec, Side::left, opts);
    report.right = analyze_endpoint(spec, Side::right, opts);
    if (report.decided()) {
        Interval ie = spec.interval;
        ie.includes_l = report.left.role == Role::reflecting;
        ie.includes_r = report.right.role == Role::reflecting;
        report.effective = ie;
    }
    return report;
}

BoundaryClass classify_endpoint(const DiffusionSpec& spec, Side side, LimitOptions opts) {
    const auto report = analyze_endpoint(spec, side, opts);
    if (!report.cls)
        throw Error(ErrorCode::convergence_undecided,
                    "sigma/mu limit at " + std::string(to_string(side)) + " undecided");
    return *report.cls;
}

Role endpoint_role(const DiffusionSpec& spec, Side side, LimitOptions opts) {
    const auto cls = classify_endpoint(spec, side, opts);
    if (cls != BoundaryClass::regular) return Role::none;
    return spec.interval.includes(side) ? Role::reflecting : Role::absorbing;
}

bool is_approachable(const DiffusionSpec& spec, Side side, LimitOptions opts) {
    const auto limits = endpoint_limits(spec, side, opts);
    return std::isfinite(limits.s.extended());
}

Interval effective_interval(const DiffusionSpec& spec, LimitOptions opts) {
    for (const auto& atom : spec.speed.atoms()) {
        const bool at_l = atom.x == spec.interval.l, at_r = atom.x == spec.interval.r;
        if ((at_l && !spec.interval.includes_l) || (at_r && !spec.interval.includes_r))
            throw Error(ErrorCode::inconsistent_spec, "atom at an excluded endpoint");
    }
    const auto report = boundary_report(spec, opts);
    const Interval& ie = report.effective_interval();
    for (Side side : {Side::left, Side::right}) {
        const auto& end = report.at(side);
        if (!end.included || end.role == Role::reflecting) continue;
        if (end.approachable())
            throw Error(ErrorCode::inconsistent_spec,
                        "endpoint " + std::string(to_string(side)) +
                            " is in I but not reflecting, yet has finite scale");
        if (end.atom > 0.0)
            throw Error(ErrorCode::inconsistent_spec,
                        "endpoint " + std::string(to_string(side)) + " is in I \\ I_e but carries an atom");
    }
    return ie;
}

std::optional<BoundaryClass> family_classification(const DiffusionSpec& spec, Side side) {
    const double j = spec.interval.endpoint(side);
    switch (spec.family) {
        case Family::brownian:
        case Family::brownian_drift:
        case Family::ou:
            return std::isinf(j) ? BoundaryClass::natural : BoundaryClass::regular;
        case Family::bessel: {
            if (std::isinf(j)) return BoundaryClass::natural;
            if (j > 0.0) return BoundaryClass::regular;
            const double delta = spec.family_parameter;
            if (delta <= 0.0) return BoundaryClass::exit;
            return delta < 2.0 ? BoundaryClass::regular : BoundaryClass::entrance;
        }
        case Family::tabulated:
        case Family::custom:
            break;
    }
    return std::nullopt;
}

namespace {

ValidationReport fail(std::string invariant, std::string message) {
    return ValidationReport{false, std::move(invariant), std::move(message)};
}

/// Geometric sample toward both endpoints, each gap subdivided.
std::vector<double> probe_points(const DiffusionSpec& spec) {
    std::vector<double> pts;
    auto left = approach_points(spec.interval, spec.e(), Side::left, 40);
    auto right = approach_points(spec.interval, spec.e(), Side::right, 40);
    pts.insert(pts.end(), left.rbegin(), left.rend());
    pts.push_back(spec.e());
    pts.insert(pts.end(), right.begin(), right.end());
    std::vector<double> fine;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        for (int k = 0; k < 8; ++k) fine.push_back(pts[i] + (pts[i + 1] - pts[i]) * k / 8.0);
    }
    fine.push_back(pts.back());
    return fine;
}

}  // namespace

ValidationReport validate_spec(const DiffusionSpec& spec, LimitOptions opts) {
    try {
        spec.interval.validate();
    } catch (const Error& err) {
        return fail("interval", err.what());
    }
    const double e = spec.e();
    if (!spec.interval.in_interior(e)) return fail("reference-point", "e must lie in (l, r)");

    try {
        const auto pts = probe_points(spec);
        const auto mid = static_cast<std::size_t>(std::find(pts.begin(), pts.end(), e) - pts.begin());
        // Cells are visited outward from e. Toward an infinite endpoint the probe
        // stops once an increment leaves the double range: overflow of s or
        // underflow of m there says nothing about the spec.
        auto check_cell = [&](std::size_t i, bool infinite_side) -> std::optional<ValidationReport> {
            const double ds = spec.scale.increment(pts[i], pts[i + 1]);
            const double dm = spec.speed.mass(pts[i], pts[i + 1]);
            if (infinite_side && (ds == kInf || dm == 0.0 || dm == kInf)) return ValidationReport{};
            if (!(ds > 0.0) || !std::isfinite(ds))
                return fail("scale-monotone", "s is not strictly increasing and finite on (" +
                                                  std::to_string(pts[i]) + ", " + std::to_string(pts[i + 1]) + ")");
            if (!(dm > 0.0))
                return fail("full-support", "m puts no mass on (" + std::to_string(pts[i]) + ", " +
                                                std::to_string(pts[i + 1]) + ")");
            if (!std::isfinite(dm)) return fail("radon", "m is infinite on a compact subinterval");
            return std::nullopt;
        };
        for (std::size_t i = mid; i + 1 < pts.size(); ++i)
            if (auto r = check_cell(i, std::isinf(spec.interval.r))) {
                if (!r->ok) return *r;
                break;
            }
        for (std::size_t i = mid; i-- > 0;)
            if (auto r = check_cell(i, std::isinf(spec.interval.l))) {
                if (!r->ok) return *r;
                break;
            }
    } catch (const Error& err) {
        return fail("scale-monotone", err.what());
    }

    for (const auto& atom : spec.speed.atoms()) {
        const bool inside = spec.interval.in_interior(atom.x) ||
                            (atom.x == spec.interval.l && spec.interval.includes_l) ||
                            (atom.x == spec.interval.r && spec.interval.includes_r);
        if (!inside) return fail("atom-location", "atom at " + std::to_string(atom.x) + " is not in I");
        if (atom.x == e) return fail("reference-atom", "m({e}) must be 0");
    }

    for (Side side : {Side::left, Side::right}) {
        if (!spec.interval.includes(side)) continue;
        const auto limits = endpoint_limits(spec, side, opts);
        if (limits.mass.kind == LimitResult::Kind::undecided || limits.s.kind == LimitResult::Kind::undecided)
            return fail("undecided", "limits at included endpoint " + std::string(to_string(side)) +
                                         " could not be certified");
        if (limits.mass.divergent())
            return fail("radon", "m is infinite near included endpoint " + std::string(to_string(side)));
        const double atom = spec.speed.atom_at(spec.interval.endpoint(side));
        if (atom > 0.0 && limits.s.divergent())
            return fail("s-tilde", "included endpoint " + std::string(to_string(side)) +
                                       " carries an atom but |s| is infinite there");
    }
    return {};
}

}  // namespace dharm
