#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spec_file.hpp"

namespace dharm::cli {

enum ExitCode : int { ok = 0, invalid_spec = 2, undecided = 3, computation_failure = 4 };

/// Maps a toolkit error to the process exit code.
int exit_code_for(ErrorCode code) noexcept;

struct CommandOptions {
    bool json = false;
    std::optional<std::string> out_dir;
    std::vector<double> alpha;  // overrides the spec file's list when non-empty
    std::optional<std::uint64_t> seed;
    std::optional<int> grid_points;
    // verify
    double x = 0.0;
    std::size_t paths = 100'000;
    std::optional<std::string> target;  // "l" or "r"; default: every reflecting endpoint
};

struct Report {
    nlohmann::json record;
    std::string summary;
    int exit_code = ExitCode::ok;
};

Report cmd_classify(const SpecFile& spec, const CommandOptions& options);
Report cmd_harmonic(const SpecFile& spec, const CommandOptions& options);
Report cmd_verify(const SpecFile& spec, const CommandOptions& options);
Report cmd_generator(const SpecFile& spec, const CommandOptions& options);

/// Shortest round-trip decimal with '.' as separator; "inf", "-inf", "nan".
std::string format_csv_number(double v);

/// Full command line: `dharm <command> ...`. Writes the report to out and
/// diagnostics to err, and returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dharm::cli
