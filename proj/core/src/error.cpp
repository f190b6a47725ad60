#include "dharm/error.hpp"

#include <cmath>
#include <sstream>

namespace dharm {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::domain_error: return "DomainError";
        case ErrorCode::non_finite: return "NonFinite";
        case ErrorCode::convergence_undecided: return "ConvergenceUndecided";
        case ErrorCode::invalid_spec: return "InvalidSpec";
        case ErrorCode::inconsistent_spec: return "InconsistentSpec";
        case ErrorCode::tail_not_certified: return "TailNotCertified";
        case ErrorCode::overflow: return "Overflow";
        case ErrorCode::singular_mesh: return "SingularMesh";
        case ErrorCode::bias_unbounded: return "BiasUnbounded";
        case ErrorCode::case_mismatch: return "CaseMismatch";
        case ErrorCode::not_in_domain_shape: return "NotInDomainShape";
        case ErrorCode::cross_check_failed: return "CrossCheckFailed";
    }
    return "Unknown";
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace dharm
