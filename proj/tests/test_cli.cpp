#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

using namespace dharm;
using namespace dharm::cli;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result dharm_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dharm");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("dharm_cli_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write_spec(const std::string& name, const std::string& text) {
    const auto path = scratch(name) / "spec.json";
    std::ofstream(path, std::ios::binary) << text;
    return path.string();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::string cell;
        std::istringstream fields(line);
        while (std::getline(fields, cell, ',')) row.push_back(cell);
        if (!line.empty() && line.back() == ',') row.emplace_back();
        rows.push_back(row);
    }
    return rows;
}

std::string invalid_message(const std::string& text) {
    try {
        (void)parse_spec_text(text);
    } catch (const SpecError& err) {
        return err.what();
    }
    return "(parsed)";
}

const char* kTableSpec = R"({
  "interval": {"l": 0, "r": 2, "includes_l": true, "includes_r": false},
  "e": 0.7,
  "scale": {"table": {"x": [0, 1, 2], "values": [3, 4, 6]}},
  "speed": {"table": {"x": [0, 0.5, 2], "values": [0, 1, 2]}, "atoms": [{"x": 0, "mass": 0.25}]},
  "alpha": [0.5, 2],
  "settings": {"grid_points": 1024, "seed": 9}
})";

}  // namespace

TEST(CliClassify, BuiltinExamples) {
    auto r = dharm_cli({"classify", "--family", "brownian", "--interval", "0,inf", "--open-l", "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_EQ(j["endpoints"][0]["class"], "Regular");
    EXPECT_EQ(j["endpoints"][0]["role"], "Absorbing");
    EXPECT_EQ(j["endpoints"][1]["class"], "Natural");
    for (const auto& e : j["endpoints"])
        for (const char* key : {"side", "sigma", "mu", "class", "role", "approachable"}) EXPECT_TRUE(e.contains(key));

    r = dharm_cli({"classify", "--family", "bessel", "--delta", "3", "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    j = json::parse(r.out);
    EXPECT_EQ(j["endpoints"][0]["class"], "Entrance");
    EXPECT_EQ(j["endpoints"][1]["class"], "Natural");
    // mu(0+) for bessel(3) from e = 1: int_0^1 x^-2 int_x^1 y^2 dy dx = 1/6.
    EXPECT_NEAR(j["endpoints"][0]["mu"].get<double>(), 1.0 / 6.0, 1e-9);
}

TEST(CliClassify, SpecFileAndReportFiles) {
    const auto path = write_spec("classify", kTableSpec);
    const auto out = scratch("classify_out");
    const auto r = dharm_cli({"classify", "--spec", path, "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(read_file(out / "boundary.json"));
    EXPECT_EQ(j["endpoints"][0]["class"], "Regular");
    EXPECT_EQ(j["endpoints"][0]["role"], "Reflecting");
    EXPECT_EQ(j["effective"], "[0, 2)");
    EXPECT_EQ(read_file(out / "boundary.txt"), r.out);
}

TEST(CliErrors, MalformedJsonReportsLocation) {
    const auto path = write_spec("malformed", "{\n  \"interval\": {\"l\": 0, \"r\": 1,}\n}");
    const auto r = dharm_cli({"classify", "--spec", path});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 2, column"), std::string::npos) << r.err;
}

TEST(CliErrors, FieldAddressedMessages) {
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0}, "scale": {"family": "brownian"}, "speed": {}})")
                  .find("interval: missing field 'r'"),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1, "includes_l": true}, "scale": {"family": "brownian"},
                                 "speed": {"atoms": [{"x": 0, "mass": 1}, {"x": 0.2, "mass": -1}]}})")
                  .find("speed.atoms[1].mass"),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1}, "scale": {"famly": "brownian"}, "speed": {}})")
                  .find("scale.famly: unknown field"),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1}, "scale": {"family": "ou"}, "speed": {}})")
                  .find("scale: missing field 'parameter'"),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1}, "scale": {"table": {"x": [0, 1], "values": [0, 1]}},
                                 "speed": {"table": {"x": [0, 1], "values": [0]}}})")
                  .find("speed.table.values"),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1}, "e": 3, "scale": {"family": "brownian"}, "speed": {}})")
                  .find("e: "),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1}, "scale": {"family": "brownian"}, "speed": {},
                                 "alpha": [1, -1]})")
                  .find("alpha[1]"),
              std::string::npos);
    EXPECT_NE(invalid_message(R"({"interval": {"l": 0, "r": 1}, "scale": {"family": "brownian"}, "speed": {},
                                 "settings": {"grid_points": 3}})")
                  .find("settings.grid_points"),
              std::string::npos);
}

TEST(CliErrors, ExitCodes) {
    EXPECT_EQ(exit_code_for(ErrorCode::invalid_spec), 2);
    EXPECT_EQ(exit_code_for(ErrorCode::inconsistent_spec), 2);
    EXPECT_EQ(exit_code_for(ErrorCode::case_mismatch), 2);
    EXPECT_EQ(exit_code_for(ErrorCode::convergence_undecided), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::overflow), 4);
    EXPECT_EQ(exit_code_for(ErrorCode::cross_check_failed), 4);
    EXPECT_EQ(dharm_cli({"classify"}).code, 2);
    EXPECT_EQ(dharm_cli({"nonsense"}).code, 2);
    EXPECT_EQ(dharm_cli({"classify", "--family", "brownian", "--spec", "x.json"}).code, 2);
    EXPECT_EQ(dharm_cli({"harmonic", "--family", "brownian", "--interval", "0,1"}).code, 2);  // no alpha
    EXPECT_EQ(dharm_cli({"generator", "--family", "brownian", "--interval", "0,1", "--alpha", "0"}).code, 2);
    // Target not in I_e.
    EXPECT_EQ(dharm_cli({"verify", "--family", "brownian", "--interval", "0,1", "--open-l", "--alpha", "0.5", "--x",
                         "0.5", "--target", "l"})
                  .code,
              2);
}

TEST(CliSpecFile, RoundTripIsIdempotent) {
    const std::vector<std::string> docs = {
        kTableSpec,
        R"({"interval": {"l": "-inf", "r": "inf"}, "scale": {"family": "ou", "parameter": 1}, "speed": {"density": "family"}})",
        R"({"interval": {"l": 0, "r": 1, "includes_r": true}, "e": 0.25, "scale": {"family": "brownian"},
            "speed": {"table": {"x": [0, 1], "values": [0, 2]}, "atoms": [{"x": 1, "mass": 0.5}]}, "alpha": [1]})",
        R"({"interval": {"l": 0, "r": 1}, "e": 0.1,
            "scale": {"table": {"x": [0, 0.5, 1], "values": [-1, 0, 4], "left_exponent": -0.5}},
            "speed": {"density": {"family": "brownian_drift", "parameter": 1}}})",
    };
    for (const auto& text : docs) {
        const SpecFile once = parse_spec_text(text);
        const SpecFile twice = parse_spec(once.document);
        EXPECT_EQ(once.document.dump(), twice.document.dump());
        EXPECT_EQ(twice.document.dump(), parse_spec(twice.document).document.dump());
    }
    // The scale table is shifted to s(e) = 0 with e inserted as a node.
    const SpecFile table = parse_spec_text(kTableSpec);
    const auto& x = table.document["scale"]["table"]["x"];
    const auto& v = table.document["scale"]["table"]["values"];
    ASSERT_EQ(x.size(), 4u);
    EXPECT_EQ(x[1].get<double>(), 0.7);
    EXPECT_EQ(v[1].get<double>(), 0.0);
    EXPECT_NEAR(v[0].get<double>(), -0.7, 1e-15);
    EXPECT_EQ(table.spec.family, Family::tabulated);
    EXPECT_EQ(table.settings.seed, 9u);
    EXPECT_EQ(table.alpha, (std::vector<double>{0.5, 2.0}));
}

TEST(CliHarmonic, BrownianExamples) {
    const auto out = scratch("harmonic");
    auto r = dharm_cli({"harmonic", "--family", "brownian", "--interval", "0,1", "--e", "0.5", "--alpha", "0.5",
                        "--alpha", "0", "--out", out.string(), "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_EQ(j["results"][0]["dim"], 2);
    EXPECT_NEAR(j["results"][0]["C"].get<double>(), 2.0 * std::tanh(0.5), 1e-9);
    for (const char* key : {"alpha", "C", "c_l", "c_r", "dim", "span_desc"}) EXPECT_TRUE(j["results"][0].contains(key));

    const std::string csv_text = read_file(out / "harmonic_alpha_0.5.csv");
    EXPECT_EQ(csv_text.find('\r'), std::string::npos);
    const auto rows = read_csv(out / "harmonic_alpha_0.5.csv");
    ASSERT_GT(rows.size(), 100u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "s(x)", "u", "du_ds", "u_plus", "u_minus", "u_l_norm",
                                                  "u_r_norm"}));
    // u(1) = cosh(1/2) at the last node.
    EXPECT_EQ(std::stod(rows.back()[0]), 1.0);
    EXPECT_NEAR(std::stod(rows.back()[2]), std::cosh(0.5), 1e-9);

    // alpha = 0 on [0, 1]: u_l + u_r = 1 at every node.
    const auto zero = read_csv(out / "harmonic_alpha_0.csv");
    double worst = 0.0;
    for (std::size_t i = 1; i < zero.size(); ++i)
        worst = std::max(worst, std::abs(std::stod(zero[i][6]) + std::stod(zero[i][7]) - 1.0));
    EXPECT_LT(worst, 1e-14);
    const auto header = json::parse(read_file(out / "harmonic_alpha_0.json"));
    EXPECT_EQ(header["csv_path"], (out / "harmonic_alpha_0.csv").string());

    r = dharm_cli({"harmonic", "--family", "brownian", "--interval", "0,1", "--open-l", "--open-r", "--alpha", "0.5",
                   "--out", out.string(), "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    j = json::parse(r.out);
    EXPECT_EQ(j["results"][0]["dim"], 0);
    EXPECT_EQ(j["results"][0]["span_desc"], "{0}");
    EXPECT_EQ(read_csv(out / "harmonic_alpha_0.5.csv").size(), 1u);
}

TEST(CliHarmonic, CsvNumbers) {
    EXPECT_EQ(format_csv_number(0.5), "0.5");
    EXPECT_EQ(format_csv_number(-1e-300), "-1e-300");
    EXPECT_EQ(format_csv_number(0.1), "0.1");
    EXPECT_EQ(format_csv_number(std::numeric_limits<double>::infinity()), "inf");
    for (double v : {std::cosh(0.5), 1.0 / 3.0, 6.02214076e23}) EXPECT_EQ(std::stod(format_csv_number(v)), v);
}

TEST(CliVerify, HittingProbabilityAndDeterminism) {
    const std::vector<std::string> args = {"verify", "--family", "brownian", "--interval", "0,1", "--e",  "0.5",
                                           "--alpha", "0", "--x", "0.25", "--target", "l", "--json", "--seed", "11"};
    const auto a = dharm_cli(args);
    ASSERT_EQ(a.code, 0) << a.err;
    const auto j = json::parse(a.out);
    EXPECT_EQ(j["analytic"].get<double>(), 0.75);
    EXPECT_EQ(j["verdict"], "PASS");
    for (const char* key : {"quantity", "analytic", "fd", "mc", "ci", "verdict"}) EXPECT_TRUE(j.contains(key));
    EXPECT_EQ(dharm_cli(args).out, a.out);
}

TEST(CliVerify, ThreeWayAgreement) {
    const auto r = dharm_cli({"verify", "--family", "brownian", "--interval", "0,1", "--open-l", "--e", "0.5",
                              "--alpha", "0.5", "--x", "0.5", "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["target"], "r");
    const double exact = std::sinh(1.0 * 0.5) / std::sinh(1.0);  // sqrt(2 alpha) = 1
    EXPECT_NEAR(j["analytic"].get<double>(), exact, 1e-9);
    EXPECT_NEAR(j["fd"].get<double>(), exact, 1e-4);
    EXPECT_LE(j["ci"][0].get<double>(), exact);
    EXPECT_GE(j["ci"][1].get<double>(), exact);
    EXPECT_EQ(j["verdict"], "PASS");
}

TEST(CliGenerator, AtomCases) {
    const std::vector<std::string> base = {"generator", "--family", "brownian", "--interval", "0,1",
                                           "--e",       "0.5",      "--alpha",  "0.5",        "--json"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        const auto r = dharm_cli(args);
        EXPECT_EQ(r.code, 0) << r.err;
        return json::parse(r.out);
    };
    const auto none = with({});
    EXPECT_EQ(none["subspace"], "{0}");
    EXPECT_EQ(none["case"], "[0, 1]");
    EXPECT_GT(none["determinant"].get<double>(), 0.0);
    for (const char* key : {"case", "m_atom_l", "m_atom_r", "c_l", "c_r", "subspace", "members_csv_path"})
        EXPECT_TRUE(none.contains(key));

    const auto out = scratch("generator");
    const auto left = with({"--atom", "0:0.5", "--out", out.string()});
    EXPECT_EQ(left["subspace"], "span{u_+ + c_r u_-}");
    // c_r = 1 / (C u(1) du/ds(1) + 1) with u = cosh(x - 1/2).
    const double c_r = 1.0 / (2.0 * std::tanh(0.5) * std::cosh(0.5) * std::sinh(0.5) + 1.0);
    EXPECT_NEAR(left["c_r"].get<double>(), c_r, 1e-9);
    EXPECT_EQ(left["m_atom_l"].get<double>(), 0.5);
    const auto rows = read_csv(left["members_csv_path"].get<std::string>());
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "s(x)", "u_+ + c_r u_-"}));

    const auto both = with({"--atom", "0:0.3", "--atom", "1:0.2"});
    EXPECT_EQ(both["dim"], 2);
    EXPECT_EQ(both["subspace"].get<std::string>().rfind("H_alpha", 0), 0u);
}
