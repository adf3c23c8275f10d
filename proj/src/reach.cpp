#include "pwacert/reach.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ostream>
#include <string>
#include <thread>

namespace pwacert {

Template::Template(Eigen::MatrixXd C) : C_(std::move(C))
{
    if (C_.rows() == 0 || C_.cols() == 0)
        throw Error(ErrorCode::InvalidModel, "template has no directions");
    for (int i = 0; i < C_.rows(); ++i)
        if (!C_.row(i).allFinite() || C_.row(i).lpNorm<Eigen::Infinity>() == 0.0)
            throw Error(ErrorCode::InvalidModel, "template row " + std::to_string(i) + " is zero or not finite");
}

Template Template::box(int n)
{
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2 * n, n);
    for (int i = 0; i < n; ++i) {
        C(2 * i, i) = 1.0;
        C(2 * i + 1, i) = -1.0;
    }
    return Template(std::move(C));
}

Template Template::octagonal(int n)
{
    std::vector<Eigen::RowVectorXd> rows;
    for (int i = 0; i < n; ++i) {
        rows.push_back(Eigen::RowVectorXd::Unit(n, i));
        rows.push_back(-Eigen::RowVectorXd::Unit(n, i));
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (double si : {1.0, -1.0})
                for (double sj : {1.0, -1.0}) {
                    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
                    r(i) = si;
                    r(j) = sj;
                    rows.push_back(r);
                }
    Eigen::MatrixXd C(rows.size(), n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        C.row(i) = rows[i];
    return Template(std::move(C));
}

bool Template::positively_spanning() const
{
    return is_bounded(Polytope(C_, Eigen::VectorXd::Ones(C_.rows())));
}

int default_thread_count()
{
    if (const char* env = std::getenv("PWACERT_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0)
            return t;
    }
    return 1;
}

namespace {

DirectionResult solve_encoded(const EncodedSystem& enc, int k, const Eigen::VectorXd& v, const MilpOptions& options)
{
    MilpProblem milp = enc.milp;
    for (int d = 0; d < v.size(); ++d)
        milp.lp.objective[enc.x[k][d]] = v(d);
    const MilpSolution s = solve_milp(milp, options);
    DirectionResult r;
    r.status = s.status;
    r.incumbent = s.value;
    r.value = s.status == MilpStatus::Infeasible ? -kInf : s.bound;
    r.nodes = s.nodes;
    r.lp_solves = s.lp_solves;
    r.seconds = s.wall_seconds;
    return r;
}

void require_in_X(const PwaSystem& sys, const Polytope& S)
{
    const double res = containment_residual(sys.X(), S);
    if (res > tol::kSet)
        throw Error(ErrorCode::PreconditionFailed,
                    "initial set is not contained in X (residual " + std::to_string(res) + ")");
}

}  // namespace

DirectionResult solve_direction(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                                const Polytope& x0_set, const Eigen::VectorXd& v, const MilpOptions& options)
{
    if (v.size() != sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, "direction has wrong dimension");
    const EncodedSystem enc = encode_closed_loop(sys, net, cfg, k, x0_set);
    return solve_encoded(enc, k, v, options);
}

double support_reach(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                     const Polytope& x0_set, const Eigen::VectorXd& v, const MilpOptions& options)
{
    const DirectionResult r = solve_direction(sys, net, cfg, k, x0_set, v, options);
    switch (r.status) {
    case MilpStatus::NodeLimitExceeded:
        throw Error(ErrorCode::Inconclusive, "support MILP stopped at the node limit");
    case MilpStatus::Unbounded: throw Error(ErrorCode::UnboundedReach, "support MILP is unbounded");
    case MilpStatus::Infeasible: throw Error(ErrorCode::EmptySet, "no closed-loop trajectory starts in the initial set");
    case MilpStatus::Optimal: break;
    }
    return r.value;
}

ReachResult overapprox_reach(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                             const Polytope& x0_set, const Template& tmpl, const ReachOptions& options)
{
    if (tmpl.dim() != sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, "template dimension differs from the state dimension");
    require_in_X(sys, x0_set);
    const EncodedSystem enc = encode_closed_loop(sys, net, cfg, k, x0_set);

    const int l = tmpl.size();
    ReachResult out;
    out.directions.resize(l);
    out.bounded_template = tmpl.positively_spanning();
    out.steps = k;
    std::vector<std::string> errors(l);
    std::vector<ErrorCode> codes(l, ErrorCode::NumericalBreakdown);

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < l; i = next++) {
            try {
                out.directions[i] = solve_encoded(enc, k, tmpl.C().row(i).transpose(), options.milp);
            } catch (const Error& e) {
                errors[i] = e.what();
                codes[i] = e.code();
            }
        }
    };
    const int threads = std::min(l, options.threads > 0 ? options.threads : default_thread_count());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (std::thread& t : pool)
            t.join();
    }

    // Merge by direction index so the result does not depend on scheduling.
    out.optima.resize(l);
    int infeasible = 0;
    for (int i = 0; i < l; ++i) {
        const DirectionResult& d = out.directions[i];
        out.optima(i) = d.value;
        out.total_nodes += d.nodes;
        out.total_lp_solves += d.lp_solves;
        if (!errors[i].empty()) {
            out.conclusive = false;
            if (!out.failure) {
                out.failure = codes[i];
                out.message = "direction " + std::to_string(i) + ": " + errors[i];
            }
            continue;
        }
        switch (d.status) {
        case MilpStatus::Optimal: break;
        case MilpStatus::Infeasible: ++infeasible; break;
        case MilpStatus::NodeLimitExceeded:
            out.conclusive = false;
            if (!out.failure) {
                out.failure = ErrorCode::Inconclusive;
                out.message = "direction " + std::to_string(i) + " stopped at the node limit";
            }
            break;
        case MilpStatus::Unbounded:
            out.conclusive = false;
            if (!out.failure) {
                out.failure = ErrorCode::UnboundedReach;
                out.message = "direction " + std::to_string(i) + " is unbounded";
            }
            break;
        }
    }
    if (infeasible == l) {
        out.set = Polytope::empty(sys.state_dim());
        return out;
    }
    if (infeasible > 0 && !out.failure) {
        out.conclusive = false;
        out.failure = ErrorCode::NumericalBreakdown;
        out.message = "directions disagree on feasibility";
    }
    if (!out.conclusive) {
        out.set = Polytope::empty(sys.state_dim());
        return out;
    }
    out.set = Polytope(tmpl.C(), out.optima);
    return out;
}

ReachResult iterate_reach(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int k,
                          const Polytope& F, const Template& tmpl, const ReachOptions& options)
{
    if (k < 1)
        throw Error(ErrorCode::InvalidModel, "iteration count must be at least 1");
    ReachResult acc;
    Polytope current = F;
    for (int step = 1; step <= k; ++step) {
        ReachResult r = overapprox_reach(sys, net, cfg, 1, current, tmpl, options);
        acc.total_nodes += r.total_nodes;
        acc.total_lp_solves += r.total_lp_solves;
        r.total_nodes = acc.total_nodes;
        r.total_lp_solves = acc.total_lp_solves;
        r.steps = step;
        if (!r.conclusive)
            return r;
        if (step < k && containment_residual(sys.X(), r.set) > tol::kSet) {
            r.conclusive = false;
            r.failure = ErrorCode::PreconditionFailed;
            r.message = "iterate " + std::to_string(step) + " leaves X";
            return r;
        }
        current = r.set;
        acc = std::move(r);
    }
    return acc;
}

void write_reach_text(std::ostream& os, const ReachResult& result, const Template& tmpl)
{
    const auto old_precision = os.precision(17);
    os << "# conclusive " << (result.conclusive ? 1 : 0) << " steps " << result.steps << '\n';
    os << "# direction optimum status nodes\n";
    for (int i = 0; i < tmpl.size(); ++i) {
        os << "dir";
        for (int j = 0; j < tmpl.dim(); ++j)
            os << ' ' << tmpl.C()(i, j);
        os << " c " << result.optima(i) << ' ' << to_string(result.directions[i].status) << ' '
           << result.directions[i].nodes << '\n';
    }
    os << "# H h\n";
    for (int i = 0; i < result.set.num_constraints(); ++i) {
        os << "row";
        for (int j = 0; j < result.set.dim(); ++j)
            os << ' ' << result.set.H()(i, j);
        os << " h " << result.set.h()(i) << '\n';
    }
    os.precision(old_precision);
}

}  // namespace pwacert
