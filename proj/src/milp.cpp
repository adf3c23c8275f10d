#include "pwacert/milp.hpp"

#include "pwacert/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <queue>
#include <string>

namespace pwacert {

int MilpProblem::add_binary(double obj)
{
    const int j = lp.add_variable(0.0, 1.0, obj);
    binaries.push_back(j);
    return j;
}

void MilpProblem::validate() const
{
    lp.validate();
    std::vector<bool> seen(lp.num_variables(), false);
    for (int j : binaries) {
        if (j < 0 || j >= lp.num_variables())
            throw Error(ErrorCode::InvalidModel, "binary index " + std::to_string(j) + " out of range");
        if (seen[j])
            throw Error(ErrorCode::InvalidModel, "binary index " + std::to_string(j) + " listed twice");
        seen[j] = true;
        if (lp.lower[j] < 0.0 || lp.upper[j] > 1.0)
            throw Error(ErrorCode::InvalidModel, "binary column " + std::to_string(j) + " must carry bounds within [0,1]");
    }
}

const char* to_string(MilpStatus s)
{
    switch (s) {
    case MilpStatus::Optimal: return "Optimal";
    case MilpStatus::Infeasible: return "Infeasible";
    case MilpStatus::Unbounded: return "Unbounded";
    case MilpStatus::NodeLimitExceeded: return "NodeLimitExceeded";
    }
    return "?";
}

namespace {

struct Node {
    std::vector<std::int8_t> fix;  // per entry of problem.binaries: -1 free, 0, 1
    double bound;
    long id;
};

struct BestBoundOrder {
    bool operator()(const Node& a, const Node& b) const
    {
        if (a.bound != b.bound)
            return a.bound < b.bound;
        return a.id > b.id;
    }
};

class BranchAndBound {
public:
    BranchAndBound(const MilpProblem& problem, const MilpOptions& options)
        : problem_(problem), options_(options), work_(problem.lp), start_(Clock::now())
    {
        is_binary_.assign(problem.lp.num_variables(), false);
        for (int j : problem.binaries)
            if (j >= 0 && j < problem.lp.num_variables())
                is_binary_[j] = true;
    }

    MilpSolution run()
    {
        problem_.validate();
        if (options_.injector && options_.injector->calls++ == options_.injector->fire_at) {
            MilpSolution s = finish(true);
            s.bound = kInf;
            return s;
        }
        Node root;
        root.fix.assign(problem_.binaries.size(), -1);
        for (std::size_t k = 0; k < problem_.binaries.size(); ++k) {
            const int j = problem_.binaries[k];
            if (problem_.lp.lower[j] == problem_.lp.upper[j])
                root.fix[k] = static_cast<std::int8_t>(problem_.lp.lower[j] > 0.5 ? 1 : 0);
            else if (problem_.lp.lower[j] > 0.0)
                root.fix[k] = 1;
            else if (problem_.lp.upper[j] < 1.0)
                root.fix[k] = 0;
        }
        root.bound = kInf;
        root.id = next_id_++;
        dive_.push_back(std::move(root));

        while (!dive_.empty() || !heap_.empty()) {
            if (limit_reached())
                return finish(true);
            Node node;
            if (!dive_.empty()) {
                node = std::move(dive_.back());
                dive_.pop_back();
            } else {
                node = heap_.top();
                heap_.pop();
            }
            if (process(node) == Outcome::Stop)
                return finish(false);
        }
        return finish(false);
    }

private:
    using Clock = std::chrono::steady_clock;
    enum class Outcome { Continue, Stop };

    bool limit_reached() const
    {
        if (options_.node_limit > 0 && nodes_ >= options_.node_limit)
            return true;
        if (options_.time_limit_seconds > 0.0 && elapsed() > options_.time_limit_seconds)
            return true;
        return false;
    }

    double elapsed() const
    {
        return std::chrono::duration<double>(Clock::now() - start_).count();
    }

    bool dominated(double bound) const
    {
        return has_incumbent_ && bound <= incumbent_value_ + options_.gap_abs;
    }

    // Activity-based bound tightening over every row, repeated until no bound
    // moves. Continuous bounds are relaxed by a small slack so rounding cannot
    // cut off feasible points; binaries are fixed only when the other value
    // violates a row by more than the integrality tolerance. Returns false
    // when some row cannot be satisfied within the bounds.
    bool propagate(std::vector<double>& lo, std::vector<double>& hi) const
    {
        constexpr int kPasses = 20;
        constexpr double kInfeasible = 1e-6;
        for (int pass = 0; pass < kPasses; ++pass) {
            bool changed = false;
            for (const Row& row : problem_.lp.rows) {
                const double rhi = row.sense == RowSense::GreaterEqual ? kInf : row.rhs;
                const double rlo = row.sense == RowSense::LessEqual ? -kInf : row.rhs;
                double min_act = 0.0, max_act = 0.0, scale = 0.0;
                int min_inf = 0, max_inf = 0;
                for (const Term& t : row.terms) {
                    const double a = t.coef;
                    const double cmin = a > 0 ? a * lo[t.col] : a * hi[t.col];
                    const double cmax = a > 0 ? a * hi[t.col] : a * lo[t.col];
                    if (std::isfinite(cmin)) {
                        min_act += cmin;
                        scale += std::abs(cmin);
                    } else {
                        ++min_inf;
                    }
                    if (std::isfinite(cmax)) {
                        max_act += cmax;
                        scale += std::abs(cmax);
                    } else {
                        ++max_inf;
                    }
                }
                if (min_inf == 0 && min_act > rhi + kInfeasible * (1.0 + std::abs(rhi)))
                    return false;
                if (max_inf == 0 && max_act < rlo - kInfeasible * (1.0 + std::abs(rlo)))
                    return false;
                for (const Term& t : row.terms) {
                    const int j = t.col;
                    const double a = t.coef;
                    if (a == 0.0 || lo[j] == hi[j])
                        continue;
                    const double cmin = a > 0 ? a * lo[j] : a * hi[j];
                    const double cmax = a > 0 ? a * hi[j] : a * lo[j];
                    // a x_j <= rhi - (min activity of the other terms)
                    double upper_ax = kInf, lower_ax = -kInf;
                    if (std::isfinite(rhi)) {
                        if (min_inf == 0)
                            upper_ax = rhi - (min_act - cmin);
                        else if (min_inf == 1 && !std::isfinite(cmin))
                            upper_ax = rhi - min_act;
                    }
                    if (std::isfinite(rlo)) {
                        if (max_inf == 0)
                            lower_ax = rlo - (max_act - cmax);
                        else if (max_inf == 1 && !std::isfinite(cmax))
                            lower_ax = rlo - max_act;
                    }
                    double new_hi = a > 0 ? upper_ax / a : lower_ax / a;
                    double new_lo = a > 0 ? lower_ax / a : upper_ax / a;
                    if (is_binary_[j]) {
                        if (new_hi < 1.0 - tol::kIntegrality && hi[j] > 0.0) {
                            hi[j] = 0.0;
                            changed = true;
                        }
                        if (new_lo > tol::kIntegrality && lo[j] < 1.0) {
                            lo[j] = 1.0;
                            changed = true;
                        }
                    } else {
                        const double slack_scale = 1e-12 * scale / std::abs(a);
                        if (std::isfinite(new_hi)) {
                            new_hi += 1e-9 * (1.0 + std::abs(new_hi)) + slack_scale;
                            if (!std::isfinite(hi[j]) || new_hi < hi[j] - 1e-7 * (1.0 + std::abs(hi[j]))) {
                                hi[j] = new_hi;
                                changed = true;
                            }
                        }
                        if (std::isfinite(new_lo)) {
                            new_lo -= 1e-9 * (1.0 + std::abs(new_lo)) + slack_scale;
                            if (!std::isfinite(lo[j]) || new_lo > lo[j] + 1e-7 * (1.0 + std::abs(lo[j]))) {
                                lo[j] = new_lo;
                                changed = true;
                            }
                        }
                    }
                    if (lo[j] > hi[j]) {
                        if (is_binary_[j] || lo[j] > hi[j] + kInfeasible * (1.0 + std::abs(hi[j])))
                            return false;
                        lo[j] = hi[j] = 0.5 * (lo[j] + hi[j]);
                    }
                }
            }
            if (!changed)
                break;
        }
        return true;
    }

    // Solves the node LP after propagation; binaries fixed by propagation are
    // recorded in fix.
    LpResult solve_with(std::vector<std::int8_t>& fix)
    {
        std::vector<double> lo = problem_.lp.lower;
        std::vector<double> hi = problem_.lp.upper;
        for (std::size_t k = 0; k < fix.size(); ++k) {
            const int j = problem_.binaries[k];
            if (fix[k] >= 0)
                lo[j] = hi[j] = fix[k];
        }
        if (!propagate(lo, hi))
            return LpResult{};
        for (std::size_t k = 0; k < fix.size(); ++k) {
            const int j = problem_.binaries[k];
            if (fix[k] < 0 && lo[j] == hi[j])
                fix[k] = static_cast<std::int8_t>(lo[j] > 0.5 ? 1 : 0);
        }
        work_.lower = std::move(lo);
        work_.upper = std::move(hi);
        ++lp_solves_;
        return solve_lp(work_);
    }

    void push_children(Node& node, std::size_t k, double frac_value, double bound)
    {
        Node zero{node.fix, bound, 0};
        Node one{std::move(node.fix), bound, 0};
        zero.fix[k] = 0;
        one.fix[k] = 1;
        // Explore the child nearer the relaxation value first.
        const bool one_first = frac_value >= 0.5;
        if (!has_incumbent_) {
            Node& later = one_first ? zero : one;
            Node& first = one_first ? one : zero;
            later.id = next_id_++;
            first.id = next_id_++;
            dive_.push_back(std::move(later));
            dive_.push_back(std::move(first));
        } else {
            zero.id = next_id_++;
            one.id = next_id_++;
            heap_.push(std::move(zero));
            heap_.push(std::move(one));
        }
    }

    void accept_incumbent(double value, const Eigen::VectorXd& x)
    {
        const bool first = !has_incumbent_;
        if (first || value > incumbent_value_) {
            incumbent_value_ = value;
            incumbent_x_ = x;
            has_incumbent_ = true;
        }
        if (first) {
            // Switch from diving to best-bound.
            for (Node& n : dive_)
                heap_.push(std::move(n));
            dive_.clear();
        }
    }

    Outcome process(Node& node)
    {
        if (dominated(node.bound)) {
            pruned_bound_ = std::max(pruned_bound_, node.bound);
            return Outcome::Continue;
        }
        ++nodes_;
        const LpResult lp = solve_with(node.fix);
        if (lp.status == LpStatus::Infeasible)
            return Outcome::Continue;

        if (lp.status == LpStatus::Unbounded) {
            const auto free_it = std::find(node.fix.begin(), node.fix.end(), std::int8_t{-1});
            if (free_it == node.fix.end()) {
                unbounded_ = true;
                return Outcome::Stop;
            }
            push_children(node, static_cast<std::size_t>(free_it - node.fix.begin()), 0.0, kInf);
            return Outcome::Continue;
        }

        const double value = lp.value;
        if (dominated(value)) {
            pruned_bound_ = std::max(pruned_bound_, value);
            return Outcome::Continue;
        }

        // Most fractional free binary, lowest index on ties.
        std::size_t branch = node.fix.size();
        double best_frac = tol::kIntegrality;
        bool any_free = false;
        for (std::size_t k = 0; k < node.fix.size(); ++k) {
            if (node.fix[k] >= 0)
                continue;
            any_free = true;
            const double v = lp.x(problem_.binaries[k]);
            const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
            if (frac > best_frac) {
                best_frac = frac;
                branch = k;
            }
        }
        if (branch < node.fix.size()) {
            push_children(node, branch, lp.x(problem_.binaries[branch]), value);
            return Outcome::Continue;
        }

        // Integral within tolerance: round, re-solve with the binaries fixed.
        if (!any_free) {
            accept_incumbent(value, lp.x);
            pruned_bound_ = std::max(pruned_bound_, value);
        } else {
            std::vector<std::int8_t> rounded = node.fix;
            for (std::size_t k = 0; k < rounded.size(); ++k)
                if (rounded[k] < 0)
                    rounded[k] = static_cast<std::int8_t>(lp.x(problem_.binaries[k]) > 0.5 ? 1 : 0);
            const LpResult fixed = solve_with(rounded);
            if (fixed.status == LpStatus::Optimal && fixed.value >= value - options_.gap_abs) {
                accept_incumbent(fixed.value, fixed.x);
                pruned_bound_ = std::max(pruned_bound_, value);
            } else {
                if (fixed.status == LpStatus::Optimal) {
                    accept_incumbent(fixed.value, fixed.x);
                    if (options_.stop_at_first_feasible)
                        return Outcome::Stop;
                }
                // Rounding lost feasibility or value: branch on the first free binary.
                const auto free_it = std::find(node.fix.begin(), node.fix.end(), std::int8_t{-1});
                const std::size_t k = static_cast<std::size_t>(free_it - node.fix.begin());
                push_children(node, k, lp.x(problem_.binaries[k]), value);
                return Outcome::Continue;
            }
        }
        if (options_.stop_at_first_feasible)
            return Outcome::Stop;
        return Outcome::Continue;
    }

    MilpSolution finish(bool hit_limit)
    {
        MilpSolution s;
        s.nodes = nodes_;
        s.lp_solves = lp_solves_;
        s.wall_seconds = elapsed();
        s.has_incumbent = has_incumbent_;
        if (has_incumbent_) {
            s.value = incumbent_value_;
            s.x = incumbent_x_;
        }
        if (unbounded_) {
            s.status = MilpStatus::Unbounded;
            s.value = s.bound = kInf;
            return s;
        }
        double open = -kInf;
        for (const Node& n : dive_)
            open = std::max(open, n.bound);
        if (!heap_.empty())
            open = std::max(open, heap_.top().bound);
        if (hit_limit) {
            s.status = MilpStatus::NodeLimitExceeded;
            s.bound = std::max({open, pruned_bound_, s.value});
            return s;
        }
        if (options_.stop_at_first_feasible && has_incumbent_) {
            s.status = MilpStatus::Optimal;
            s.bound = std::max({open, pruned_bound_, s.value});
            return s;
        }
        if (!has_incumbent_) {
            s.status = MilpStatus::Infeasible;
            s.bound = -kInf;
            return s;
        }
        s.status = MilpStatus::Optimal;
        s.bound = std::max(pruned_bound_, s.value);
        return s;
    }

    const MilpProblem& problem_;
    MilpOptions options_;
    LinearProgram work_;
    Clock::time_point start_;

    std::vector<bool> is_binary_;
    std::vector<Node> dive_;
    std::priority_queue<Node, std::vector<Node>, BestBoundOrder> heap_;
    long next_id_ = 0;
    long nodes_ = 0;
    long lp_solves_ = 0;
    bool has_incumbent_ = false;
    bool unbounded_ = false;
    double incumbent_value_ = -kInf;
    Eigen::VectorXd incumbent_x_;
    double pruned_bound_ = -kInf;
};

}  // namespace

MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options)
{
    return BranchAndBound(problem, options).run();
}

MilpSolution find_feasible(const MilpProblem& problem, MilpOptions options)
{
    MilpProblem zero = problem;
    std::fill(zero.lp.objective.begin(), zero.lp.objective.end(), 0.0);
    options.stop_at_first_feasible = true;
    MilpSolution s = BranchAndBound(zero, options).run();
    if (s.status == MilpStatus::Optimal)
        s.value = s.bound = 0.0;
    return s;
}

}  // namespace pwacert
