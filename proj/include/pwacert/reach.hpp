#pragma once

#include "pwacert/encoder.hpp"
#include "pwacert/error.hpp"
#include "pwacert/geometry.hpp"
#include "pwacert/milp.hpp"
#include "pwacert/models.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pwacert {

/// Directions C (l x n) of a template polytope { x | C x <= c }.
class Template {
public:
    Template() = default;
    /// Throws InvalidModel on an empty matrix or a zero row.
    explicit Template(Eigen::MatrixXd C);

    /// +-e_i.
    static Template box(int n);
    /// +-e_i and +-e_i +- e_j for i < j.
    static Template octagonal(int n);

    const Eigen::MatrixXd& C() const { return C_; }
    int dim() const { return static_cast<int>(C_.cols()); }
    int size() const { return static_cast<int>(C_.rows()); }

    /// True when { C x <= 1 } is bounded, i.e. the rows positively span R^n.
    bool positively_spanning() const;

private:
    Eigen::MatrixXd C_;
};

struct ReachOptions {
    MilpOptions milp;
    /// Worker threads for per-direction MILPs; 0 reads PWACERT_THREADS (default 1).
    int threads = 0;
};

/// Outcome of one support MILP.
struct DirectionResult {
    MilpStatus status = MilpStatus::Infeasible;
    /// Dual bound of the MILP; the value stored in the template polytope.
    double value = -kInf;
    double incumbent = -kInf;
    long nodes = 0;
    long lp_solves = 0;
    double seconds = 0.0;
};

struct ReachResult {
    Polytope set;
    /// c_i per template direction (-inf when the reachable set is empty).
    Eigen::VectorXd optima;
    std::vector<DirectionResult> directions;
    bool conclusive = true;
    std::optional<ErrorCode> failure;
    std::string message;
    bool bounded_template = true;
    /// One-step applications performed (iterate_reach).
    int steps = 0;
    long total_nodes = 0;
    long total_lp_solves = 0;
};

/// Threads used when ReachOptions::threads is 0.
int default_thread_count();

/// Solves max v.x(k) over the k-step encoding without throwing.
DirectionResult solve_direction(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                                const Polytope& x0_set, const Eigen::VectorXd& v, const MilpOptions& options = {});

/// Global maximum of v.x(k) over closed-loop trajectories from x0_set.
/// Throws Inconclusive on a node limit, UnboundedReach, and EmptySet when no
/// trajectory exists.
double support_reach(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                     const Polytope& x0_set, const Eigen::VectorXd& v, const MilpOptions& options = {});

/// Template over-approximation { C x <= c } of the k-step reachable set.
/// Throws PreconditionFailed unless x0_set lies in X; solver limits only
/// clear the conclusive flag.
ReachResult overapprox_reach(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                             const Polytope& x0_set, const Template& tmpl, const ReachOptions& options = {});

/// k applications of the one-step over-approximation starting from F. Stops
/// early with conclusive = false when an intermediate set leaves X.
ReachResult iterate_reach(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                          const Polytope& F, const Template& tmpl, const ReachOptions& options = {});

/// Plain-text export: one line per direction with its optimum, then the H-rep.
void write_reach_text(std::ostream& os, const ReachResult& result, const Template& tmpl);

}  // namespace pwacert
