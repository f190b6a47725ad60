#include "commands.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dharm/boundary.hpp"
#include "dharm/generator.hpp"
#include "dharm/harmonic.hpp"
#include "dharm/oracle.hpp"

namespace dharm::cli {

using nlohmann::json;

namespace {

constexpr double kZ99 = 2.5758293035489004;

json number(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

json limit_json(const LimitResult& r) {
    if (r.finite()) return number(r.value);
    if (r.divergent()) return "inf";
    return nullptr;
}

HarmonicSettings harmonic_settings(const SpecFile& spec, const CommandOptions& options) {
    HarmonicSettings hs;
    hs.grid.grid_points = options.grid_points.value_or(spec.settings.grid_points);
    hs.series_tol = spec.settings.tolerances.series;
    hs.cross_check_tol = spec.settings.tolerances.cross_check;
    return hs;
}

std::vector<double> alphas(const SpecFile& spec, const CommandOptions& options) {
    auto list = options.alpha.empty() ? spec.alpha : options.alpha;
    if (list.empty()) throw SpecError("alpha: no value given (use --alpha or the spec's alpha list)");
    for (double a : list)
        if (!(a >= 0.0) || std::isinf(a)) throw SpecError("alpha: " + format_number(a) + " is not finite and >= 0");
    return list;
}

std::filesystem::path out_path(const CommandOptions& options, const std::string& name) {
    std::filesystem::create_directories(*options.out_dir);
    return std::filesystem::path(*options.out_dir) / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::domain_error, "cannot write " + path.string());
}

std::string alpha_tag(double alpha) { return "alpha_" + format_csv_number(alpha); }

const GridFunction* present(const GridFunction& f) { return f.grid && f.size() > 0 ? &f : nullptr; }
const GridFunction* present(const std::optional<GridFunction>& f) { return f ? present(*f) : nullptr; }

std::string csv_cell(const GridFunction* f, std::size_t i) {
    return f ? format_csv_number(f->value[i]) : std::string();
}

std::string role_word(const EndpointReport& e) {
    return e.cls ? std::string(to_string(*e.cls)) : std::string("undecided");
}

Side parse_side(const std::string& text) {
    if (text == "l" || text == "left") return Side::left;
    if (text == "r" || text == "right") return Side::right;
    throw SpecError("--target: expected l or r, got '" + text + "'");
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_spec:
        case ErrorCode::inconsistent_spec:
        case ErrorCode::case_mismatch:
        case ErrorCode::domain_error: return ExitCode::invalid_spec;
        case ErrorCode::convergence_undecided:
        case ErrorCode::tail_not_certified: return ExitCode::undecided;
        default: return ExitCode::computation_failure;
    }
}

std::string format_csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

Report cmd_classify(const SpecFile& spec, const CommandOptions& options) {
    const BoundaryReport report = boundary_report(spec.spec);
    Report out;
    json endpoints = json::array();
    std::ostringstream text;
    text << "spec " << spec.spec.family_tag() << " on " << describe(spec.spec.interval) << ", e = "
         << format_csv_number(spec.spec.e()) << "\n";
    bool undecided = false;
    for (Side side : {Side::left, Side::right}) {
        const EndpointReport& e = report.at(side);
        undecided = undecided || !e.decided();
        json approachable = nullptr;
        if (e.decided()) approachable = e.approachable();
        endpoints.push_back({{"side", to_string(side)},
                             {"location", number(e.location)},
                             {"sigma", limit_json(e.sigma)},
                             {"mu", limit_json(e.mu)},
                             {"class", role_word(e)},
                             {"role", to_string(e.role)},
                             {"approachable", approachable}});
        text << to_string(side) << " endpoint " << format_csv_number(e.location) << ": class " << role_word(e)
             << ", role " << to_string(e.role) << ", sigma " << limit_json(e.sigma).dump() << ", mu "
             << limit_json(e.mu).dump() << ", approachable "
             << (e.decided() ? (e.approachable() ? "yes" : "no") : "undecided") << "\n";
    }
    out.record = {{"command", "classify"},
                  {"spec", spec.spec.family_tag()},
                  {"interval", describe(spec.spec.interval)},
                  {"endpoints", endpoints},
                  {"effective", report.effective ? json(describe(*report.effective)) : json(nullptr)}};
    text << "effective interval " << (report.effective ? describe(*report.effective) : "undecided") << "\n";
    out.summary = text.str();
    if (options.out_dir) {
        write_file(out_path(options, "boundary.json"), out.record.dump(2) + "\n");
        write_file(out_path(options, "boundary.txt"), out.summary);
    }
    if (undecided) out.exit_code = ExitCode::undecided;
    return out;
}

Report cmd_harmonic(const SpecFile& spec, const CommandOptions& options) {
    const auto hs = harmonic_settings(spec, options);
    Report out;
    json headers = json::array();
    std::ostringstream text;
    for (double alpha : alphas(spec, options)) {
        const HarmonicBasis basis = harmonic_space(spec.spec, alpha, hs);
        json header = {{"alpha", alpha},
                       {"C", number(basis.C)},
                       {"c_l", optional_number(basis.c_l)},
                       {"c_r", optional_number(basis.c_r)},
                       {"dim", basis.dim},
                       {"span_desc", basis.span_desc},
                       {"effective", describe(basis.report.effective_interval())}};
        text << "alpha " << format_csv_number(alpha) << ": dim " << basis.dim << ", " << basis.span_desc << ", C "
             << format_csv_number(basis.C);
        if (basis.c_l) text << ", c_l " << format_csv_number(*basis.c_l);
        if (basis.c_r) text << ", c_r " << format_csv_number(*basis.c_r);
        text << "\n";
        if (options.out_dir) {
            std::string csv = "x,s(x),u,du_ds,u_plus,u_minus,u_l_norm,u_r_norm\n";
            if (basis.dim > 0) {
                const Grid& g = *basis.u.grid;
                const GridFunction* cols[] = {present(basis.u_plus), present(basis.u_minus),
                                              present(basis.u_l_norm), present(basis.u_r_norm)};
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double du = i + 1 == g.size() ? basis.u.v_left[i] : basis.u.v_right[i];
                    csv += format_csv_number(g.x[i]) + "," + format_csv_number(g.s[i]) + "," +
                           format_csv_number(basis.u.value[i]) + "," + format_csv_number(du);
                    for (const auto* f : cols) csv += "," + csv_cell(f, i);
                    csv += "\n";
                }
            }
            const auto csv_path = out_path(options, "harmonic_" + alpha_tag(alpha) + ".csv");
            write_file(csv_path, csv);
            header["csv_path"] = csv_path.string();
            write_file(out_path(options, "harmonic_" + alpha_tag(alpha) + ".json"), header.dump(2) + "\n");
        }
        headers.push_back(header);
    }
    out.record = {{"command", "harmonic"}, {"spec", spec.spec.family_tag()}, {"results", headers}};
    out.summary = text.str();
    if (options.out_dir) write_file(out_path(options, "harmonic.txt"), out.summary);
    return out;
}

Report cmd_verify(const SpecFile& spec, const CommandOptions& options) {
    const auto hs = harmonic_settings(spec, options);
    const std::uint64_t seed = options.seed.value_or(spec.settings.seed);
    const double fd_tol = spec.settings.tolerances.fd;
    const BoundaryReport report = boundary_report(spec.spec);
    std::vector<Side> targets;
    if (options.target) {
        targets.push_back(parse_side(*options.target));
    } else {
        for (Side side : {Side::left, Side::right})
            if (report.at(side).role == Role::reflecting) targets.push_back(side);
        if (targets.empty())
            throw Error(ErrorCode::case_mismatch, "no reflecting endpoint to target; pass --target l or r");
    }
    Report out;
    json results = json::array();
    std::ostringstream text;
    for (double alpha : alphas(spec, options)) {
        std::optional<HarmonicBasis> basis;
        if (alpha > 0.0) basis = harmonic_space(spec.spec, alpha, hs);
        for (Side side : targets) {
            double analytic = 0.0;
            if (alpha == 0.0) {
                analytic = hitting_probability(spec.spec, options.x, side);
            } else {
                const auto& norm = side == Side::left ? basis->u_l_norm : basis->u_r_norm;
                if (!norm)
                    throw Error(ErrorCode::case_mismatch,
                                std::string("target ") + std::string(to_string(side)) + " is not a reflecting endpoint");
                analytic = norm->at(options.x);
            }
            const OracleEstimate fd = fd_exit_functional(spec.spec, alpha, side, options.x);
            const OracleEstimate mc = mc_exit_functional(spec.spec, alpha, side, options.x, options.paths, seed);
            const double half = (mc.method == OracleMethod::mc ? kZ99 * mc.std_error : mc.half_width) + mc.bias_bound;
            const double lo = mc.value - half, hi = mc.value + half;
            const bool pass = analytic >= lo && analytic <= hi && std::abs(fd.value - analytic) <= fd_tol;
            const std::string target(side == Side::left ? "l" : "r");
            results.push_back({{"quantity", "E_x[exp(-alpha tau); X_tau = " + target + "]"},
                               {"alpha", alpha},
                               {"x", options.x},
                               {"target", target},
                               {"analytic", number(analytic)},
                               {"fd", number(fd.value)},
                               {"fd_error_estimate", number(fd.half_width)},
                               {"fd_tolerance", fd_tol},
                               {"mc", number(mc.value)},
                               {"mc_method", to_string(mc.method)},
                               {"paths", options.paths},
                               {"seed", seed},
                               {"ci", {number(lo), number(hi)}},
                               {"ci_level", 0.99},
                               {"verdict", pass ? "PASS" : "FAIL"}});
            text << "alpha " << format_csv_number(alpha) << ", x " << format_csv_number(options.x) << ", target "
                 << target << ": analytic " << format_csv_number(analytic) << ", fd " << format_csv_number(fd.value)
                 << ", mc " << format_csv_number(mc.value) << " in [" << format_csv_number(lo) << ", "
                 << format_csv_number(hi) << "] -> " << (pass ? "PASS" : "FAIL") << "\n";
        }
    }
    out.record = results.size() == 1 ? results[0] : results;
    out.summary = text.str();
    if (options.out_dir) {
        write_file(out_path(options, "verify.json"), out.record.dump(2) + "\n");
        write_file(out_path(options, "verify.txt"), out.summary);
    }
    return out;
}

Report cmd_generator(const SpecFile& spec, const CommandOptions& options) {
    GeneratorSettings gs;
    gs.harmonic = harmonic_settings(spec, options);
    gs.cross_check_tol = spec.settings.tolerances.cross_check;
    Report out;
    json results = json::array();
    std::ostringstream text;
    for (double alpha : alphas(spec, options)) {
        if (!(alpha > 0.0)) throw SpecError("alpha: the generator verdict needs alpha > 0");
        const GeneratorVerdict v = harmonic_in_domain(spec.spec, alpha, gs);
        json candidates = json::array();
        for (std::size_t k = 0; k < v.candidate_names.size(); ++k)
            candidates.push_back({{"name", v.candidate_names[k]}, {"in_domain", static_cast<bool>(v.candidate_in_domain[k])}});
        json record = {{"case", v.effective},
                       {"alpha", alpha},
                       {"m_atom_l", v.m_atom_l},
                       {"m_atom_r", v.m_atom_r},
                       {"c_l", optional_number(v.constants.c_l)},
                       {"c_r", optional_number(v.constants.c_r)},
                       {"determinant", optional_number(v.determinant)},
                       {"subspace", v.subspace},
                       {"dim", v.dim},
                       {"candidates", candidates},
                       {"members_csv_path", nullptr}};
        if (options.out_dir && !v.members.empty()) {
            const Grid& g = *v.members.front().grid;
            std::string csv = "x,s(x)";
            for (const auto& name : v.member_names) csv += "," + name;
            csv += "\n";
            for (std::size_t i = 0; i < g.size(); ++i) {
                csv += format_csv_number(g.x[i]) + "," + format_csv_number(g.s[i]);
                for (const auto& m : v.members) csv += "," + format_csv_number(m.value[i]);
                csv += "\n";
            }
            const auto path = out_path(options, "generator_members_" + alpha_tag(alpha) + ".csv");
            write_file(path, csv);
            record["members_csv_path"] = path.string();
        }
        text << "alpha " << format_csv_number(alpha) << ", I_e " << v.effective << ", atoms m({l}) "
             << format_csv_number(v.m_atom_l) << " m({r}) " << format_csv_number(v.m_atom_r) << ": " << v.subspace;
        if (v.constants.c_l) text << ", c_l " << format_csv_number(*v.constants.c_l);
        if (v.constants.c_r) text << ", c_r " << format_csv_number(*v.constants.c_r);
        if (v.determinant) text << ", determinant " << format_csv_number(*v.determinant);
        text << "\n";
        results.push_back(record);
    }
    out.record = results.size() == 1 ? results[0] : results;
    out.summary = text.str();
    if (options.out_dir) {
        write_file(out_path(options, "generator.json"), out.record.dump(2) + "\n");
        write_file(out_path(options, "generator.txt"), out.summary);
    }
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"dharm: one-dimensional diffusions given by a scale function and a speed measure"};
    app.require_subcommand(1);
    std::string spec_path;
    FamilyOptions family;
    CommandOptions options;
    std::optional<double> param;
    std::optional<std::string> interval;
    std::optional<double> e;

    auto common = [&](CLI::App* sub) {
        auto* spec_opt = sub->add_option("--spec", spec_path, "JSON spec file");
        auto* family_opt = sub->add_option("--family", family.name, "built-in family: brownian, brownian_drift, ou, bessel");
        spec_opt->excludes(family_opt);
        sub->add_option("--param,--mu,--theta,--delta", param, "family parameter");
        sub->add_option("--interval", interval, "l,r (inf allowed)");
        sub->add_flag("--open-l", family.open_l, "exclude a finite left endpoint");
        sub->add_flag("--open-r", family.open_r, "exclude a finite right endpoint");
        sub->add_option("--e", e, "reference point");
        sub->add_option("--atom", family.atoms, "speed-measure atom x:mass (repeatable)");
        sub->add_option("--alpha", options.alpha, "alpha values (repeatable)");
        sub->add_flag("--json", options.json, "machine-readable output");
        sub->add_option("--out", options.out_dir, "directory for report files");
        sub->add_option("--seed", options.seed, "RNG seed");
        sub->add_option("--grid-points", options.grid_points, "grid resolution")->check(CLI::Range(16, 10'000'000));
    };
    auto* classify = app.add_subcommand("classify", "boundary classification");
    auto* harmonic = app.add_subcommand("harmonic", "basis of the alpha-harmonic space");
    auto* verify = app.add_subcommand("verify", "analytic exit functional against FD and MC oracles");
    auto* generator = app.add_subcommand("generator", "harmonic functions in the generator domain");
    for (auto* sub : {classify, harmonic, verify, generator}) common(sub);
    verify->add_option("--x", options.x, "starting point")->required();
    verify->add_option("--paths", options.paths, "MC paths")->check(CLI::Range(std::size_t{1000}, std::size_t{1'000'000'000}));
    verify->add_option("--target", options.target, "target endpoint l or r");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e_parse) {
        const int code = app.exit(e_parse, out, err);
        return code == 0 ? ExitCode::ok : ExitCode::invalid_spec;
    }

    try {
        SpecFile spec;
        if (!spec_path.empty()) {
            spec = load_spec_file(spec_path);
        } else if (!family.name.empty()) {
            family.parameter = param;
            family.interval = interval;
            family.e = e;
            spec = parse_spec(family_document(family));
        } else {
            throw SpecError("give --spec file or --family name");
        }
        Report report;
        if (*classify) report = cmd_classify(spec, options);
        if (*harmonic) report = cmd_harmonic(spec, options);
        if (*verify) report = cmd_verify(spec, options);
        if (*generator) report = cmd_generator(spec, options);
        out << (options.json ? report.record.dump(2) + "\n" : report.summary);
        if (report.exit_code == ExitCode::undecided) err << "dharm: an endpoint limit is undecided\n";
        return report.exit_code;
    } catch (const Error& error) {
        err << "dharm: " << error.what() << "\n";
        return exit_code_for(error.code());
    } catch (const std::exception& error) {
        err << "dharm: " << error.what() << "\n";
        return ExitCode::computation_failure;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dharm::cli
