#pragma once

#include "pwacert/geometry.hpp"
#include "pwacert/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pwacert {

enum class Branch { Network, Local };

struct Trajectory {
    std::vector<Eigen::VectorXd> states;  // K + 1 entries unless halted early
    std::vector<Eigen::VectorXd> inputs;
    std::vector<int> regions;
    std::vector<Branch> branches;
    /// Set when some state left X; the offending state is the last entry.
    bool left_X = false;

    int length() const { return static_cast<int>(inputs.size()); }
};

/// K closed-loop steps under u = net(x). Throws PreconditionFailed when x0 is
/// outside X and NoRegion when no cell contains (x, u).
Trajectory rollout(const PwaSystem& sys, const MaxoutNet& net, const Eigen::VectorXd& x0, int K);

/// K closed-loop steps under the dual-mode law.
Trajectory rollout(const PwaSystem& sys, const DualModeController& ctrl, const Eigen::VectorXd& x0, int K);

/// Brute-force support of the one-step reachable set: one LP per region and
/// full activation pattern. Throws TooManyPatterns above max_patterns and
/// EmptySet when no combination is feasible.
double pattern_enum_reach(const PwaSystem& sys, const MaxoutNet& net, const Polytope& x0_set,
                          const Eigen::VectorXd& v, long max_patterns = 100000);

/// Number of (region, activation pattern) combinations.
double pattern_count(const PwaSystem& sys, const MaxoutNet& net);

/// Rejection samples from P using its bounding box. Returns an empty vector
/// for an empty P.
std::vector<Eigen::VectorXd> sample_polytope(const Polytope& P, int count, std::uint64_t seed);

struct AuditReport {
    std::uint64_t seed = 0;
    int samples = 0;
    std::vector<Eigen::VectorXd> escapees;
    int no_region = 0;

    bool clean() const { return escapees.empty() && no_region == 0; }
};

/// Maps samples of F one step forward and records every successor outside F.
AuditReport grid_audit(const PwaSystem& sys, const MaxoutNet& net, const Polytope& F, int samples,
                       std::uint64_t seed = 1);

/// CSV rows "k,x_0..,u_0..,region,branch"; the final state has empty inputs.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace pwacert
