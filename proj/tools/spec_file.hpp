#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dharm/measures.hpp"

namespace dharm::cli {

struct Tolerances {
    /// Allowed |FD - analytic| in verify.
    double fd = 1e-4;
    /// Series vs IVP march, and generator closed-form checks.
    double cross_check = 1e-6;
    double series = 1e-15;
};

struct SpecSettings {
    int grid_points = 2048;
    Tolerances tolerances;
    std::uint64_t seed = 1;
};

/// A parsed spec file. `document` is the normalized JSON form: defaults filled
/// in, the scale table shifted so that s(e) = 0. Parsing `document` again
/// reproduces it exactly.
struct SpecFile {
    DiffusionSpec spec;
    std::vector<double> alpha;
    SpecSettings settings;
    nlohmann::json document;
};

/// Invalid spec files. The message starts with the JSON path of the offending
/// field ("speed.atoms[1].mass: ...") or with "line L, column C" for syntax errors.
class SpecError : public Error {
public:
    explicit SpecError(const std::string& what) : Error(ErrorCode::invalid_spec, what) {}
};

SpecFile parse_spec(const nlohmann::json& document);
SpecFile parse_spec_text(const std::string& text);
SpecFile load_spec_file(const std::string& path);

/// Family options as given on the command line.
struct FamilyOptions {
    std::string name;
    std::optional<double> parameter;  // mu, theta or delta
    std::optional<std::string> interval;  // "l,r", with inf allowed
    bool open_l = false;
    bool open_r = false;
    std::optional<double> e;
    std::vector<std::string> atoms;  // "x:mass"
};

/// The spec document of a built-in family; finite endpoints are included
/// unless opened. Defaults: (-inf, inf) with e = 0, and (0, inf) with e = 1 for
/// bessel, both open.
nlohmann::json family_document(const FamilyOptions& options);

/// Parses "inf", "-inf", "+inf" or a decimal number with '.' as separator.
double parse_real(const std::string& text);

}  // namespace dharm::cli
