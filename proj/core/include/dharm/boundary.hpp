#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dharm/measures.hpp"

namespace dharm {

enum class BoundaryClass { regular, exit, entrance, natural };
enum class Role { absorbing, reflecting, none };

std::string_view to_string(BoundaryClass cls) noexcept;
std::string_view to_string(Role role) noexcept;

/// Class from the finiteness of sigma and mu at the endpoint.
BoundaryClass classify(bool sigma_finite, bool mu_finite) noexcept;

struct EndpointReport {
    Side side = Side::left;
    double location = 0.0;
    bool included = false;
    double atom = 0.0;  // m({j}) for an included endpoint
    LimitResult sigma;
    LimitResult mu;
    LimitResult s;     // |s(j)|
    LimitResult mass;  // m(l+) / m(r-) measured from e
    std::optional<BoundaryClass> cls;  // empty when a limit is undecided
    Role role = Role::none;

    [[nodiscard]] bool decided() const noexcept { return cls.has_value(); }
    /// s(j) with its sign; +/-inf when divergent.
    [[nodiscard]] double signed_scale() const;
    [[nodiscard]] bool approachable() const;
};

struct BoundaryReport {
    EndpointReport left;
    EndpointReport right;
    std::optional<Interval> effective;  // empty when either endpoint is undecided

    [[nodiscard]] const EndpointReport& at(Side side) const noexcept {
        return side == Side::left ? left : right;
    }
    [[nodiscard]] bool decided() const noexcept { return left.decided() && right.decided(); }
    /// I_e; throws convergence_undecided when a class is undecided.
    [[nodiscard]] const Interval& effective_interval() const;
};

/// Never throws on undecided limits; they are carried in the report.
EndpointReport analyze_endpoint(const DiffusionSpec& spec, Side side, LimitOptions opts = {});
BoundaryReport boundary_report(const DiffusionSpec& spec, LimitOptions opts = {});

/// Throws convergence_undecided when sigma or mu cannot be certified.
BoundaryClass classify_endpoint(const DiffusionSpec& spec, Side side, LimitOptions opts = {});
Role endpoint_role(const DiffusionSpec& spec, Side side, LimitOptions opts = {});
bool is_approachable(const DiffusionSpec& spec, Side side, LimitOptions opts = {});

/// (l, r) plus the reflecting endpoints. Throws inconsistent_spec when an
/// endpoint in I but outside I_e has finite scale or an atom, or when an
/// excluded endpoint carries an atom.
Interval effective_interval(const DiffusionSpec& spec, LimitOptions opts = {});

/// Known classes of the built-in families; empty for tabulated/custom specs or
/// parameters without a shortcut.
std::optional<BoundaryClass> family_classification(const DiffusionSpec& spec, Side side);

struct ValidationReport {
    bool ok = true;
    /// Name of the first violated invariant: interval, reference-point,
    /// scale-monotone, full-support, atom-location, reference-atom, radon,
    /// s-tilde, undecided.
    std::string invariant;
    std::string message;
};

ValidationReport validate_spec(const DiffusionSpec& spec, LimitOptions opts = {});

}  // namespace dharm
