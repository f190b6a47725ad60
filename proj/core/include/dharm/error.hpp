#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dharm {

enum class ErrorCode {
    domain_error,
    non_finite,
    convergence_undecided,
    invalid_spec,
    inconsistent_spec,
    tail_not_certified,
    overflow,
    singular_mesh,
    bias_unbounded,
    case_mismatch,
    not_in_domain_shape,
    cross_check_failed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// 17-digit decimal form used in messages; "inf"/"-inf" for infinities.
std::string format_number(double v);

/// Base exception for every failure raised by the toolkit. The code is the
/// machine-readable part; callers (the CLI in particular) dispatch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dharm
