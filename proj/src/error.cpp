#include "pwacert/error.hpp"

namespace pwacert {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::DimensionTooHigh: return "DimensionTooHigh";
    case ErrorCode::UnboundedSet: return "UnboundedSet";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::NodeLimitExceeded: return "NodeLimitExceeded";
    case ErrorCode::NoRegion: return "NoRegion";
    case ErrorCode::BoxInvalid: return "BoxInvalid";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::UnboundedDomain: return "UnboundedDomain";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::UnboundedReach: return "UnboundedReach";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::KLimitExceeded: return "KLimitExceeded";
    case ErrorCode::ScaleExceedsOne: return "ScaleExceedsOne";
    case ErrorCode::LyapunovCheckFailed: return "LyapunovCheckFailed";
    case ErrorCode::TooManyPatterns: return "TooManyPatterns";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace pwacert
