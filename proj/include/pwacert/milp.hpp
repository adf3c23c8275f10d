#pragma once

#include "pwacert/lp.hpp"
#include "pwacert/tolerances.hpp"

#include <atomic>
#include <memory>
#include <vector>

namespace pwacert {

/// A linear program in which some columns are restricted to {0, 1}.
struct MilpProblem {
    LinearProgram lp;
    std::vector<int> binaries;

    /// Adds a [0,1] column and marks it binary.
    int add_binary(double obj = 0.0);
    void validate() const;
};

enum class MilpStatus { Optimal, Infeasible, Unbounded, NodeLimitExceeded };

const char* to_string(MilpStatus s);

/// Test hook: the solve with zero-based call index fire_at (counted across
/// every solve sharing this injector) reports NodeLimitExceeded at once.
struct NodeLimitInjector {
    long fire_at = -1;
    std::atomic<long> calls{0};
};

struct MilpOptions {
    double gap_abs = tol::kGapAbs;
    /// 0 means unlimited.
    long node_limit = 0;
    /// 0 means unlimited. Wall-clock limits are the only non-deterministic input.
    double time_limit_seconds = 0.0;
    /// Return at the first integer-feasible leaf.
    bool stop_at_first_feasible = false;
    std::shared_ptr<NodeLimitInjector> injector;
};

struct MilpSolution {
    MilpStatus status = MilpStatus::Infeasible;
    /// Incumbent objective (-inf when none).
    double value = -kInf;
    /// Valid upper bound on the optimum; equals value within gap_abs at Optimal.
    double bound = kInf;
    Eigen::VectorXd x;
    bool has_incumbent = false;
    long nodes = 0;
    long lp_solves = 0;
    double wall_seconds = 0.0;

    /// NodeLimitExceeded results must never be read as a proof.
    bool conclusive() const { return status != MilpStatus::NodeLimitExceeded; }
};

/// Branch-and-bound: depth-first dive to the first incumbent, then best-bound
/// node selection; branches on the most fractional binary (lowest index on ties).
MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options = {});

/// Zero-objective solve that returns at the first feasible assignment.
MilpSolution find_feasible(const MilpProblem& problem, MilpOptions options = {});

}  // namespace pwacert
