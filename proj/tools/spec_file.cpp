#include "spec_file.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dharm/boundary.hpp"

namespace dharm::cli {

using nlohmann::json;

namespace {

/// The message of an Error without its leading code name.
std::string detail(const Error& err) {
    const std::string what = err.what();
    const std::string code(to_string(err.code()));
    return what.rfind(code + ": ", 0) == 0 ? what.substr(code.size() + 2) : what;
}

struct Node {
    const json& j;
    std::string path;

    [[noreturn]] void fail(const std::string& message) const {
        throw SpecError((path.empty() ? std::string("(document)") : path) + ": " + message);
    }
    Node child(const std::string& key) const { return {j.at(key), path.empty() ? key : path + "." + key}; }
    Node item(std::size_t i) const { return {j.at(i), path + "[" + std::to_string(i) + "]"}; }
    bool has(const std::string& key) const { return j.contains(key) && !j.at(key).is_null(); }

    void expect_object(std::initializer_list<const char*> allowed) const {
        if (!j.is_object()) fail("expected an object");
        for (const auto& [key, value] : j.items())
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
                child(key).fail("unknown field");
    }
    Node required(const std::string& key) const {
        if (!has(key)) fail("missing field '" + key + "'");
        return child(key);
    }
    double real() const {
        if (j.is_number()) return j.get<double>();
        if (j.is_string()) {
            try {
                return parse_real(j.get<std::string>());
            } catch (const SpecError&) {
            }
        }
        fail("expected a number (or \"inf\", \"-inf\")");
    }
    bool boolean() const {
        if (!j.is_boolean()) fail("expected true or false");
        return j.get<bool>();
    }
    const json& array() const {
        if (!j.is_array()) fail("expected an array");
        return j;
    }
    std::string string() const {
        if (!j.is_string()) fail("expected a string");
        return j.get<std::string>();
    }
};

json real_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double default_e(double l, double r) {
    if (std::isfinite(l) && std::isfinite(r)) return 0.5 * (l + r);
    if (std::isfinite(l)) return l + 1.0;
    if (std::isfinite(r)) return r - 1.0;
    return 0.0;
}

struct FamilyRef {
    std::string name;
    std::optional<double> parameter;
    friend bool operator==(const FamilyRef&, const FamilyRef&) = default;
};

FamilyRef family_ref(const Node& owner) {
    const Node name = owner.required("family");
    FamilyRef ref{name.string(), std::nullopt};
    static const char* known[] = {"brownian", "brownian_drift", "ou", "bessel"};
    if (std::find(std::begin(known), std::end(known), ref.name) == std::end(known))
        name.fail("unknown family '" + ref.name + "' (brownian, brownian_drift, ou, bessel)");
    if (ref.name == "brownian") {
        if (owner.has("parameter")) owner.child("parameter").fail("brownian takes no parameter");
    } else {
        ref.parameter = owner.required("parameter").real();
    }
    return ref;
}

json family_json(const FamilyRef& ref) {
    json out = {{"family", ref.name}};
    if (ref.parameter) out["parameter"] = *ref.parameter;
    return out;
}

DiffusionSpec build_family(const FamilyRef& ref, const Interval& interval, double e, std::vector<Atom> atoms,
                           const std::string& path) {
    try {
        if (ref.name == "brownian") return brownian(interval, e, std::move(atoms));
        if (ref.name == "brownian_drift") return brownian_drift(*ref.parameter, interval, e, std::move(atoms));
        if (ref.name == "ou") return ornstein_uhlenbeck(*ref.parameter, interval, e, std::move(atoms));
        return bessel(*ref.parameter, interval, e, std::move(atoms));
    } catch (const Error& err) {
        throw SpecError(path + ": " + detail(err));
    }
}

CumulativeTable parse_table(const Node& node) {
    node.expect_object({"x", "values", "left_exponent", "right_exponent"});
    CumulativeTable table;
    for (const char* key : {"x", "values"}) {
        const Node column = node.required(key);
        auto& out = std::string(key) == "x" ? table.x : table.values;
        for (std::size_t i = 0; i < column.array().size(); ++i) out.push_back(column.item(i).real());
    }
    if (table.x.size() != table.values.size())
        node.child("values").fail("needs as many entries as x (" + std::to_string(table.x.size()) + ")");
    if (node.has("left_exponent")) table.left_exponent = node.child("left_exponent").real();
    if (node.has("right_exponent")) table.right_exponent = node.child("right_exponent").real();
    try {
        (void)density_from_table(table);
    } catch (const Error& err) {
        node.fail(detail(err));
    }
    return table;
}

json table_json(const CumulativeTable& table) {
    json out = {{"x", table.x}, {"values", table.values}};
    if (table.left_exponent) out["left_exponent"] = *table.left_exponent;
    if (table.right_exponent) out["right_exponent"] = *table.right_exponent;
    return out;
}

/// Shifts the table so that its value at e is 0. When e falls inside a linear
/// cell it is inserted as a node first, so a second pass shifts by exactly 0.
/// A table with e inside a power-law end cell is left as it is.
void normalize_scale_table(CumulativeTable& table, double e) {
    const auto& x = table.x;
    auto it = std::lower_bound(x.begin(), x.end(), e);
    if (it == x.end()) return;
    auto k = static_cast<std::size_t>(it - x.begin());
    if (*it != e) {
        const std::size_t cell = k - 1;
        const bool tail = (cell == 0 && table.left_exponent) || (cell + 2 == x.size() && table.right_exponent);
        if (tail) return;
        const double t = (e - x[cell]) / (x[k] - x[cell]);
        const double v = table.values[cell] + t * (table.values[k] - table.values[cell]);
        table.x.insert(table.x.begin() + static_cast<std::ptrdiff_t>(k), e);
        table.values.insert(table.values.begin() + static_cast<std::ptrdiff_t>(k), v);
    }
    const double shift = table.values[k];
    for (double& v : table.values) v -= shift;
}

std::string invariant_path(const std::string& invariant) {
    if (invariant == "interval") return "interval";
    if (invariant == "reference-point") return "e";
    if (invariant == "scale-monotone" || invariant == "s-tilde") return "scale";
    if (invariant == "atom-location" || invariant == "reference-atom") return "speed.atoms";
    return "speed";
}

}  // namespace

double parse_real(const std::string& text) {
    if (text == "inf" || text == "+inf") return kInf;
    if (text == "-inf") return -kInf;
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    const auto [end, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || end != last || first == last || !std::isfinite(v))
        throw SpecError("'" + text + "' is not a number");
    return v;
}

SpecFile parse_spec(const json& document) {
    const Node root{document, ""};
    root.expect_object({"interval", "e", "scale", "speed", "alpha", "settings"});
    SpecFile out;
    json& doc = out.document;

    const Node iv = root.required("interval");
    iv.expect_object({"l", "r", "includes_l", "includes_r"});
    Interval interval;
    interval.l = iv.required("l").real();
    interval.r = iv.required("r").real();
    if (iv.has("includes_l")) interval.includes_l = iv.child("includes_l").boolean();
    if (iv.has("includes_r")) interval.includes_r = iv.child("includes_r").boolean();
    try {
        interval.validate();
    } catch (const Error& err) {
        iv.fail(detail(err));
    }
    doc["interval"] = {{"l", real_json(interval.l)},
                       {"r", real_json(interval.r)},
                       {"includes_l", interval.includes_l},
                       {"includes_r", interval.includes_r}};

    const double e = root.has("e") ? root.child("e").real() : default_e(interval.l, interval.r);
    if (!interval.in_interior(e)) (root.has("e") ? root.child("e") : root).fail("e must lie inside (l, r)");
    doc["e"] = e;

    const Node speed = root.required("speed");
    speed.expect_object({"density", "table", "atoms"});
    std::vector<Atom> atoms;
    json atoms_json = json::array();
    if (speed.has("atoms")) {
        const Node list = speed.child("atoms");
        for (std::size_t i = 0; i < list.array().size(); ++i) {
            const Node a = list.item(i);
            a.expect_object({"x", "mass"});
            const Atom atom{a.required("x").real(), a.required("mass").real()};
            if (!interval.in_closure(atom.x) || std::isinf(atom.x)) a.child("x").fail("atom outside the interval");
            if (!(atom.mass > 0.0) || std::isinf(atom.mass)) a.child("mass").fail("mass must be positive and finite");
            atoms.push_back(atom);
            atoms_json.push_back({{"x", atom.x}, {"mass", atom.mass}});
        }
    }

    const Node scale = root.required("scale");
    scale.expect_object({"family", "parameter", "table"});
    std::optional<FamilyRef> scale_family;
    std::optional<CumulativeTable> scale_table;
    if (scale.has("family") == scale.has("table")) scale.fail("needs exactly one of 'family' or 'table'");
    if (scale.has("family")) {
        scale_family = family_ref(scale);
        doc["scale"] = family_json(*scale_family);
    } else {
        if (scale.has("parameter")) scale.child("parameter").fail("only a family takes a parameter");
        scale_table = parse_table(scale.child("table"));
        normalize_scale_table(*scale_table, e);
        doc["scale"] = {{"table", table_json(*scale_table)}};
    }

    std::optional<FamilyRef> speed_family;
    std::optional<CumulativeTable> speed_table;
    json speed_json;
    if (speed.has("density") && speed.has("table")) speed.fail("needs one of 'density' or 'table', not both");
    if (speed.has("table")) {
        speed_table = parse_table(speed.child("table"));
        speed_json["table"] = table_json(*speed_table);
    } else {
        const bool named = speed.has("density") && speed.child("density").j.is_object();
        if (named) {
            const Node d = speed.child("density");
            d.expect_object({"family", "parameter"});
            speed_family = family_ref(d);
        } else {
            if (speed.has("density") && speed.child("density").string() != "family")
                speed.child("density").fail("expected \"family\" or {family, parameter}");
            if (!scale_family) speed.fail("a tabulated scale needs a speed density or table");
            speed_family = scale_family;
        }
        speed_json["density"] = speed_family == scale_family ? json("family") : family_json(*speed_family);
    }
    speed_json["atoms"] = atoms_json;
    doc["speed"] = speed_json;

    // Matching families keep their tag (and with it the known classifications).
    if (scale_family && speed_family == scale_family) {
        out.spec = build_family(*scale_family, interval, e, atoms, "scale.family");
    } else if (scale_table && speed_table) {
        if (scale_table->x.front() != interval.l || scale_table->x.back() != interval.r)
            scale.child("table").child("x").fail("must span [l, r] exactly");
        if (speed_table->x.front() != interval.l || speed_table->x.back() != interval.r)
            speed.child("table").child("x").fail("must span [l, r] exactly");
        try {
            out.spec = tabulated(interval, e, *scale_table, *speed_table, atoms);
        } catch (const Error& err) {
            root.fail(detail(err));
        }
    } else {
        const Density scale_density = scale_table ? density_from_table(*scale_table)
                                                  : build_family(*scale_family, interval, e, {}, "scale.family")
                                                        .scale.measure();
        const Density speed_density = speed_table ? density_from_table(*speed_table)
                                                  : build_family(*speed_family, interval, e, {}, "speed.density")
                                                        .speed.continuous_part();
        try {
            out.spec = custom(interval, e, scale_density, speed_density, atoms);
        } catch (const Error& err) {
            root.fail(detail(err));
        }
    }
    const auto check = validate_spec(out.spec);
    if (!check.ok) {
        if (check.invariant == "undecided") throw Error(ErrorCode::convergence_undecided, check.message);
        throw SpecError(invariant_path(check.invariant) + ": " + check.message);
    }

    doc["alpha"] = json::array();
    if (root.has("alpha")) {
        const Node list = root.child("alpha");
        for (std::size_t i = 0; i < list.array().size(); ++i) {
            const double a = list.item(i).real();
            if (!(a >= 0.0) || std::isinf(a)) list.item(i).fail("alpha must be finite and >= 0");
            out.alpha.push_back(a);
            doc["alpha"].push_back(a);
        }
    }

    if (root.has("settings")) {
        const Node s = root.child("settings");
        s.expect_object({"grid_points", "tolerances", "seed"});
        if (s.has("grid_points")) {
            const Node g = s.child("grid_points");
            if (!g.j.is_number_integer() || g.j.get<long long>() < 16 || g.j.get<long long>() > 10'000'000)
                g.fail("expected an integer in [16, 10000000]");
            out.settings.grid_points = g.j.get<int>();
        }
        if (s.has("tolerances")) {
            const Node t = s.child("tolerances");
            t.expect_object({"fd", "cross_check", "series"});
            auto positive = [&](const char* key, double& target) {
                if (!t.has(key)) return;
                const double v = t.child(key).real();
                if (!(v > 0.0) || std::isinf(v)) t.child(key).fail("tolerance must be positive and finite");
                target = v;
            };
            positive("fd", out.settings.tolerances.fd);
            positive("cross_check", out.settings.tolerances.cross_check);
            positive("series", out.settings.tolerances.series);
        }
        if (s.has("seed")) {
            const Node seed = s.child("seed");
            if (!seed.j.is_number_unsigned() && !(seed.j.is_number_integer() && seed.j.get<long long>() >= 0))
                seed.fail("expected a nonnegative integer");
            out.settings.seed = seed.j.get<std::uint64_t>();
        }
    }
    doc["settings"] = {{"grid_points", out.settings.grid_points},
                       {"tolerances",
                        {{"fd", out.settings.tolerances.fd},
                         {"cross_check", out.settings.tolerances.cross_check},
                         {"series", out.settings.tolerances.series}}},
                       {"seed", out.settings.seed}};
    return out;
}

SpecFile parse_spec_text(const std::string& text) {
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& err) {
        std::size_t line = 1, column = 1;
        const std::size_t end = std::min(err.byte == 0 ? 0 : err.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        std::string message = err.what();
        if (const auto pos = message.find("column "); pos != std::string::npos)
            if (const auto colon = message.find(": ", pos); colon != std::string::npos) message = message.substr(colon + 2);
        throw SpecError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message);
    }
    return parse_spec(document);
}

SpecFile load_spec_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError(path + ": cannot open the spec file");
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_spec_text(text.str());
    } catch (const SpecError& err) {
        throw SpecError(path + ": " + detail(err));
    }
}

json family_document(const FamilyOptions& options) {
    // Finite endpoints of an explicit interval are included unless opened; the
    // default intervals are open.
    double l = -kInf, r = kInf;
    bool closed = false;
    if (options.name == "bessel") l = 0.0;
    if (options.interval) {
        closed = true;
        const auto comma = options.interval->find(',');
        if (comma == std::string::npos) throw SpecError("--interval: expected l,r");
        l = parse_real(options.interval->substr(0, comma));
        r = parse_real(options.interval->substr(comma + 1));
    }
    json source = {{"family", options.name}};
    if (options.parameter) source["parameter"] = *options.parameter;
    json atoms = json::array();
    for (const auto& text : options.atoms) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) throw SpecError("--atom: expected x:mass, got '" + text + "'");
        atoms.push_back({{"x", parse_real(text.substr(0, colon))}, {"mass", parse_real(text.substr(colon + 1))}});
    }
    return {{"interval",
             {{"l", real_json(l)},
              {"r", real_json(r)},
              {"includes_l", closed && std::isfinite(l) && !options.open_l},
              {"includes_r", closed && std::isfinite(r) && !options.open_r}}},
            {"e", options.e ? *options.e : default_e(l, r)},
            {"scale", source},
            {"speed", {{"density", "family"}, {"atoms", atoms}}}};
}

}  // namespace dharm::cli
