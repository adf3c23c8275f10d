#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pwacert {

enum class ErrorCode {
    DimensionMismatch,
    EmptySet,
    NonPositiveScale,
    DimensionTooHigh,
    UnboundedSet,
    NumericalBreakdown,
    NodeLimitExceeded,
    NoRegion,
    BoxInvalid,
    InvalidModel,
    UnboundedDomain,
    Inconclusive,
    UnboundedReach,
    NotConverged,
    EmptyResult,
    KLimitExceeded,
    ScaleExceedsOne,
    LyapunovCheckFailed,
    TooManyPatterns,
    PreconditionFailed,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// that callers (the CLI in particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the error-code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace pwacert
