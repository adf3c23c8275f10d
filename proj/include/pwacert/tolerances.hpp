#pragma once

// Numerical tolerances shared by every module.

namespace pwacert::tol {

inline constexpr double kPrimalFeasibility = 1e-7;
inline constexpr double kOptimality = 1e-7;
inline constexpr double kPivot = 1e-9;
inline constexpr double kBreakdownPivot = 1e-11;

inline constexpr double kIntegrality = 1e-6;
inline constexpr double kGapAbs = 1e-6;

inline constexpr double kSet = 1e-6;
inline constexpr double kRegionMembership = 1e-9;
inline constexpr double kDomain = 1e-7;
inline constexpr double kSymmetry = 1e-9;

}  // namespace pwacert::tol
