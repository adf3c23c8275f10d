#pragma once

#include "pwacert/encoder.hpp"
#include "pwacert/error.hpp"
#include "pwacert/geometry.hpp"
#include "pwacert/models.hpp"
#include "pwacert/reach.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pwacert {

struct Check {
    std::string name;
    bool passed = false;
    double residual = 0.0;
    double tolerance = 0.0;
    /// Established by sampling rather than by an exact solve.
    bool sampled = false;
};

struct CertifyLimits {
    int iter_limit = 50;
    int k_limit = 200;
    ReachOptions reach;
    int lyapunov_samples = 10000;
    std::uint64_t seed = 7;
};

struct Certificate {
    enum class Kind { UUB, Asymptotic };

    Kind kind = Kind::UUB;
    Eigen::MatrixXd template_directions;
    Polytope F_max;
    Polytope F_min;
    int k_star = 0;
    int fmax_iterations = 0;
    double epsilon_shrink = 1e-3;
    double s_scale = 0.0;  // Asymptotic only
    std::uint64_t seed = 0;
    std::vector<Check> checks;
    bool conclusive = false;
    std::optional<ErrorCode> failure;
    std::string message;

    /// Null when absent.
    const Check* find_check(const std::string& name) const;
};

const char* to_string(Certificate::Kind kind);

struct PiCheck {
    bool pi = false;
    /// containment_residual(F, R1(F)); non-positive means contained.
    double residual = kInf;
    bool conclusive = false;
    ReachResult reach;
};

/// Sufficient invariance test R1(F) in F (tol_set). Inconclusive reach
/// results give pi = false.
PiCheck check_pi(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Polytope& F,
                 const Template& tmpl, const ReachOptions& options = {});

/// max over rows r of U of (sup_{x in X} H_r net(x) - h_r), solved exactly by
/// MILP over the network encoding. Throws Inconclusive on a node limit.
double input_admissibility_residual(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg,
                                    const MilpOptions& options = {});

struct FmaxResult {
    Polytope F;
    int iterations = 0;
};

/// Shrinks F from X by F <- R1(F) cap X until R1(F) is contained in F.
/// Throws NotConverged, EmptyResult, Inconclusive.
FmaxResult compute_fmax(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Template& tmpl,
                        int iter_limit, const ReachOptions& options = {});

struct FminResult {
    Polytope F;
    int k_star = 0;
    double residual = kInf;  // containment residual of the shrink condition at k_star
    double tolerance = 0.0;
};

/// Tolerance used for the shrink condition on a set S: tol_set scaled down
/// for sets smaller than the unit ball.
double shrink_tolerance(const Polytope& S);

/// Iterates S_k = R1(S_{k-1}) from F_max until (1/(1+eps)) S_k is contained
/// in R1((1/(1+eps)) S_k). Throws KLimitExceeded, Inconclusive.
FminResult compute_fmin(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Polytope& F_max,
                        const Template& tmpl, double epsilon_shrink, int k_limit, const ReachOptions& options = {});

/// Full boundedness pipeline. Never throws for certification failures; the
/// returned certificate is then not conclusive and names the failure.
Certificate certify_uub(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Template& tmpl,
                        double epsilon_shrink, const CertifyLimits& limits = {});

/// Dual-mode extension of a conclusive boundedness certificate. The
/// Lyapunov and region checks on s F0 are sampled.
Certificate certify_asymptotic(const PwaSystem& sys, const DualModeController& ctrl, const Certificate& cert_uub,
                               const CertifyLimits& limits = {});

struct VerifyReport {
    std::vector<Check> checks;
    bool passed = false;
};

/// Re-derives every stored check from the serialized sets alone. ctrl is
/// required for Asymptotic certificates.
VerifyReport verify_certificate(const PwaSystem& sys, const MaxoutNet& net, const Certificate& cert,
                                const DualModeController* ctrl = nullptr, const CertifyLimits& limits = {});

}  // namespace pwacert
