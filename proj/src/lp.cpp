#include "pwacert/lp.hpp"

#include "pwacert/error.hpp"
#include "pwacert/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace pwacert {

int LinearProgram::add_variable(double lo, double hi, double obj)
{
    objective.push_back(obj);
    lower.push_back(lo);
    upper.push_back(hi);
    return num_variables() - 1;
}

void LinearProgram::add_row(std::vector<Term> terms, RowSense sense, double rhs)
{
    rows.push_back(Row{std::move(terms), sense, rhs});
}

Eigen::MatrixXd LinearProgram::dense_matrix() const
{
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_rows(), num_variables());
    for (int i = 0; i < num_rows(); ++i)
        for (const Term& t : rows[i].terms)
            a(i, t.col) += t.coef;
    return a;
}

double LinearProgram::row_activity(int i, const Eigen::VectorXd& x) const
{
    double s = 0.0;
    for (const Term& t : rows[i].terms)
        s += t.coef * x(t.col);
    return s;
}

double LinearProgram::objective_value(const Eigen::VectorXd& x) const
{
    double s = 0.0;
    for (int j = 0; j < num_variables(); ++j)
        if (objective[j] != 0.0)
            s += objective[j] * x(j);
    return s;
}

double LinearProgram::max_violation(const Eigen::VectorXd& x) const
{
    double worst = 0.0;
    for (int j = 0; j < num_variables(); ++j) {
        worst = std::max(worst, lower[j] - x(j));
        worst = std::max(worst, x(j) - upper[j]);
    }
    for (int i = 0; i < num_rows(); ++i) {
        const double a = row_activity(i, x);
        const double b = rows[i].rhs;
        switch (rows[i].sense) {
        case RowSense::LessEqual: worst = std::max(worst, a - b); break;
        case RowSense::GreaterEqual: worst = std::max(worst, b - a); break;
        case RowSense::Equal: worst = std::max(worst, std::abs(a - b)); break;
        }
    }
    return worst;
}

void LinearProgram::validate() const
{
    const int n = num_variables();
    if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n)
        throw Error(ErrorCode::DimensionMismatch, "bound vectors do not match the variable count");
    for (int j = 0; j < n; ++j) {
        if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j])
            throw Error(ErrorCode::InvalidModel, "variable " + std::to_string(j) + " has lo > hi");
        if (lower[j] == kInf || upper[j] == -kInf)
            throw Error(ErrorCode::InvalidModel, "variable " + std::to_string(j) + " has an infinite fixed bound");
    }
    for (const Row& r : rows) {
        if (!std::isfinite(r.rhs))
            throw Error(ErrorCode::InvalidModel, "row right-hand side must be finite");
        for (const Term& t : r.terms)
            if (t.col < 0 || t.col >= n || !std::isfinite(t.coef))
                throw Error(ErrorCode::InvalidModel, "row term references an invalid column");
    }
}

const char* to_string(LpStatus s)
{
    switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    }
    return "?";
}

namespace {

enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };

enum class PhaseOutcome { Optimal, Unbounded };

// Bound overshoot tolerated by the first Harris pass. Kept well below the
// feasibility tolerance so that overshoots from many pivots stay within it.
constexpr double kHarrisSlack = 1e-9;

// Rows are  A x + s = b  with s >= 0 (inequalities) or s = 0 (equalities).
// Columns: [structural | slack | artificial].
class RevisedSimplex {
public:
    RevisedSimplex(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::VectorXd c,
                   Eigen::VectorXd lo, Eigen::VectorXd hi, std::vector<bool> equality,
                   const LpOptions& options)
        : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), options_(options)
    {
        m_ = static_cast<int>(a_.rows());
        n_ = static_cast<int>(a_.cols());
        lo_.assign(lo.data(), lo.data() + n_);
        hi_.assign(hi.data(), hi.data() + n_);
        for (int i = 0; i < m_; ++i) {
            lo_.push_back(0.0);
            hi_.push_back(equality[i] ? 0.0 : kInf);
        }
        x_.assign(n_ + m_, 0.0);
        state_.assign(n_ + m_, VarState::AtLower);
        for (int j = 0; j < n_; ++j) {
            if (std::isfinite(lo_[j])) {
                x_[j] = lo_[j];
                state_[j] = VarState::AtLower;
            } else if (std::isfinite(hi_[j])) {
                x_[j] = hi_[j];
                state_[j] = VarState::AtUpper;
            } else {
                x_[j] = 0.0;
                state_[j] = VarState::FreeZero;
            }
        }

        Eigen::VectorXd xn = Eigen::Map<const Eigen::VectorXd>(x_.data(), n_);
        const Eigen::VectorXd residual = b_ - a_ * xn;
        head_.assign(m_, -1);
        binv_ = Eigen::MatrixXd::Zero(m_, m_);
        for (int i = 0; i < m_; ++i) {
            const int slack = n_ + i;
            const double r = residual(i);
            if (r >= 0.0 && (hi_[slack] > 0.0 || r == 0.0)) {
                head_[i] = slack;
                state_[slack] = VarState::Basic;
                x_[slack] = r;
                binv_(i, i) = 1.0;
            } else {
                const double sign = r > 0.0 ? 1.0 : -1.0;
                const int art = static_cast<int>(x_.size());
                art_row_.push_back(i);
                art_sign_.push_back(sign);
                lo_.push_back(0.0);
                hi_.push_back(kInf);
                x_.push_back(std::abs(r));
                state_.push_back(VarState::Basic);
                x_[slack] = 0.0;
                state_[slack] = VarState::AtLower;
                head_[i] = art;
                binv_(i, i) = sign;
            }
        }
    }

    LpStatus run()
    {
        const int total = num_columns();
        cost_.assign(total, 0.0);
        if (!art_row_.empty()) {
            for (int k = 0; k < static_cast<int>(art_row_.size()); ++k)
                cost_[n_ + m_ + k] = -1.0;
            iterate();
            // Each artificial is judged against the scale of its own row.
            for (int k = 0; k < static_cast<int>(art_row_.size()); ++k)
                if (x_[n_ + m_ + k] > tol::kPrimalFeasibility * (1.0 + std::abs(b_(art_row_[k]))))
                    return LpStatus::Infeasible;
            for (int k = 0; k < static_cast<int>(art_row_.size()); ++k) {
                const int j = n_ + m_ + k;
                hi_[j] = 0.0;
                if (state_[j] != VarState::Basic) {
                    x_[j] = 0.0;
                    state_[j] = VarState::AtLower;
                }
            }
        }
        std::fill(cost_.begin(), cost_.end(), 0.0);
        for (int j = 0; j < n_; ++j)
            cost_[j] = c_(j);
        return iterate() == PhaseOutcome::Optimal ? LpStatus::Optimal : LpStatus::Unbounded;
    }

    Eigen::VectorXd structural() const
    {
        return Eigen::Map<const Eigen::VectorXd>(x_.data(), n_);
    }

    Eigen::VectorXd duals() const
    {
        Eigen::VectorXd cb(m_);
        for (int r = 0; r < m_; ++r)
            cb(r) = cost_[head_[r]];
        return binv_.transpose() * cb;
    }

    int iterations() const { return iterations_; }

private:
    int num_columns() const { return static_cast<int>(x_.size()); }

    double column_dot(int j, const Eigen::VectorXd& y) const
    {
        if (j < n_)
            return a_.col(j).dot(y);
        if (j < n_ + m_)
            return y(j - n_);
        const int k = j - n_ - m_;
        return art_sign_[k] * y(art_row_[k]);
    }

    Eigen::VectorXd binv_times_column(int j) const
    {
        if (j < n_)
            return binv_ * a_.col(j);
        if (j < n_ + m_)
            return binv_.col(j - n_);
        const int k = j - n_ - m_;
        return art_sign_[k] * binv_.col(art_row_[k]);
    }

    void add_column_to(int j, double scale, Eigen::VectorXd& v) const
    {
        if (j < n_) {
            v += scale * a_.col(j);
        } else if (j < n_ + m_) {
            v(j - n_) += scale;
        } else {
            const int k = j - n_ - m_;
            v(art_row_[k]) += scale * art_sign_[k];
        }
    }

    void refactor()
    {
        since_refactor_ = 0;
        if (m_ == 0)
            return;
        Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m_, m_);
        for (int r = 0; r < m_; ++r) {
            Eigen::VectorXd col = Eigen::VectorXd::Zero(m_);
            add_column_to(head_[r], 1.0, col);
            basis.col(r) = col;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
        lu.setThreshold(tol::kBreakdownPivot);
        if (lu.rank() < m_)
            throw Error(ErrorCode::NumericalBreakdown, "basis matrix became singular");
        binv_ = lu.inverse();

        Eigen::VectorXd rhs = b_;
        for (int j = 0; j < num_columns(); ++j)
            if (state_[j] != VarState::Basic && x_[j] != 0.0)
                add_column_to(j, -x_[j], rhs);
        const Eigen::VectorXd xb = binv_ * rhs;
        for (int r = 0; r < m_; ++r)
            x_[head_[r]] = xb(r);
    }

    PhaseOutcome iterate()
    {
        refactor();
        int degenerate_run = 0;
        bool bland = false;
        const int bland_trigger = 2 * (m_ + num_columns());

        while (true) {
            if (++iterations_ > options_.iteration_limit)
                throw Error(ErrorCode::NumericalBreakdown, "simplex iteration limit reached");
            if (since_refactor_ >= options_.refactor_interval)
                refactor();

            Eigen::VectorXd cb(m_);
            for (int r = 0; r < m_; ++r)
                cb(r) = cost_[head_[r]];
            const Eigen::VectorXd y = binv_.transpose() * cb;

            // Pricing.
            int entering = -1;
            double entering_dir = 0.0;
            double best = 0.0;
            for (int j = 0; j < num_columns(); ++j) {
                const VarState st = state_[j];
                if (st == VarState::Basic || lo_[j] == hi_[j])
                    continue;
                const double d = cost_[j] - column_dot(j, y);
                double dir = 0.0;
                if (d > tol::kOptimality && st != VarState::AtUpper)
                    dir = 1.0;
                else if (d < -tol::kOptimality && st != VarState::AtLower)
                    dir = -1.0;
                if (dir == 0.0)
                    continue;
                if (bland) {
                    entering = j;
                    entering_dir = dir;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    entering = j;
                    entering_dir = dir;
                }
            }
            if (entering < 0) {
                refactor();
                return PhaseOutcome::Optimal;
            }

            const Eigen::VectorXd alpha = binv_times_column(entering);

            // Ratio test: Harris two-pass normally, textbook with lowest-index
            // ties while in Bland mode.
            double theta_max = kInf;
            if (!bland) {
                for (int r = 0; r < m_; ++r) {
                    const double a = entering_dir * alpha(r);
                    const int jb = head_[r];
                    if (a > tol::kPivot && std::isfinite(lo_[jb]))
                        theta_max = std::min(theta_max, (std::max(0.0, x_[jb] - lo_[jb]) + kHarrisSlack) / a);
                    else if (a < -tol::kPivot && std::isfinite(hi_[jb]))
                        theta_max = std::min(theta_max, (std::max(0.0, hi_[jb] - x_[jb]) + kHarrisSlack) / -a);
                }
            }
            int leave = -1;
            double leave_t = kInf;
            double leave_mag = 0.0;
            for (int r = 0; r < m_; ++r) {
                const double a = entering_dir * alpha(r);
                const int jb = head_[r];
                double t;
                if (a > tol::kPivot && std::isfinite(lo_[jb]))
                    t = std::max(0.0, x_[jb] - lo_[jb]) / a;
                else if (a < -tol::kPivot && std::isfinite(hi_[jb]))
                    t = std::max(0.0, hi_[jb] - x_[jb]) / -a;
                else
                    continue;
                if (bland) {
                    if (t < leave_t - 1e-12 || (t <= leave_t + 1e-12 && leave >= 0 && jb < head_[leave])) {
                        leave = r;
                        leave_t = t;
                    }
                } else if (t <= theta_max && std::abs(a) > leave_mag) {
                    leave = r;
                    leave_t = t;
                    leave_mag = std::abs(a);
                }
            }

            const double flip = hi_[entering] - lo_[entering];
            if (leave < 0 && !std::isfinite(flip))
                return PhaseOutcome::Unbounded;

            if (leave < 0 || flip <= leave_t) {
                // Bound flip, basis unchanged.
                for (int r = 0; r < m_; ++r)
                    x_[head_[r]] -= entering_dir * flip * alpha(r);
                if (state_[entering] == VarState::AtLower) {
                    x_[entering] = hi_[entering];
                    state_[entering] = VarState::AtUpper;
                } else {
                    x_[entering] = lo_[entering];
                    state_[entering] = VarState::AtLower;
                }
                degenerate_run = 0;
                bland = false;
                continue;
            }

            const double t = leave_t;
            for (int r = 0; r < m_; ++r)
                x_[head_[r]] -= entering_dir * t * alpha(r);
            x_[entering] += entering_dir * t;

            const int leaving = head_[leave];
            const double a_leave = entering_dir * alpha(leave);
            if (a_leave > 0.0) {
                x_[leaving] = lo_[leaving];
                state_[leaving] = VarState::AtLower;
            } else {
                x_[leaving] = hi_[leaving];
                state_[leaving] = lo_[leaving] == hi_[leaving] ? VarState::AtLower : VarState::AtUpper;
            }
            head_[leave] = entering;
            state_[entering] = VarState::Basic;

            const double pivot = alpha(leave);
            if (std::abs(pivot) < tol::kBreakdownPivot)
                throw Error(ErrorCode::NumericalBreakdown, "pivot magnitude below threshold");
            const Eigen::RowVectorXd pivot_row = binv_.row(leave) / pivot;
            for (int r = 0; r < m_; ++r)
                if (r != leave && alpha(r) != 0.0)
                    binv_.row(r) -= alpha(r) * pivot_row;
            binv_.row(leave) = pivot_row;
            ++since_refactor_;

            if (t <= 1e-12) {
                if (++degenerate_run > bland_trigger)
                    bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    Eigen::VectorXd c_;
    LpOptions options_;
    int m_ = 0;
    int n_ = 0;

    std::vector<double> lo_, hi_, x_, cost_;
    std::vector<VarState> state_;
    std::vector<int> head_;
    std::vector<int> art_row_;
    std::vector<double> art_sign_;
    Eigen::MatrixXd binv_;
    int since_refactor_ = 0;
    int iterations_ = 0;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options)
{
    lp.validate();
    const int n = lp.num_variables();
    const int m = lp.num_rows();

    // Drop fixed columns.
    std::vector<int> reduced_index(n, -1);
    std::vector<int> kept;
    for (int j = 0; j < n; ++j) {
        if (lp.lower[j] == lp.upper[j])
            continue;
        reduced_index[j] = static_cast<int>(kept.size());
        kept.push_back(j);
    }
    const int nr = static_cast<int>(kept.size());

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, nr);
    Eigen::VectorXd b(m);
    std::vector<bool> equality(m, false);
    std::vector<double> row_sign(m, 1.0);
    for (int i = 0; i < m; ++i) {
        const Row& row = lp.rows[i];
        const double sign = row.sense == RowSense::GreaterEqual ? -1.0 : 1.0;
        row_sign[i] = sign;
        equality[i] = row.sense == RowSense::Equal;
        double rhs = row.rhs;
        for (const Term& t : row.terms) {
            if (reduced_index[t.col] >= 0)
                a(i, reduced_index[t.col]) += sign * t.coef;
            else
                rhs -= t.coef * lp.lower[t.col];
        }
        b(i) = sign * rhs;
    }
    Eigen::VectorXd c(nr), lo(nr), hi(nr);
    for (int k = 0; k < nr; ++k) {
        c(k) = lp.objective[kept[k]];
        lo(k) = lp.lower[kept[k]];
        hi(k) = lp.upper[kept[k]];
    }

    RevisedSimplex simplex(std::move(a), std::move(b), std::move(c), std::move(lo), std::move(hi),
                           std::move(equality), options);
    LpResult result;
    result.status = simplex.run();
    result.iterations = simplex.iterations();

    result.x = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd xs = simplex.structural();
    for (int j = 0; j < n; ++j)
        result.x(j) = reduced_index[j] >= 0 ? xs(reduced_index[j]) : lp.lower[j];

    if (result.status == LpStatus::Infeasible) {
        result.value = -kInf;
        return result;
    }
    if (result.status == LpStatus::Unbounded) {
        result.value = kInf;
        return result;
    }
    result.value = lp.objective_value(result.x);

    const Eigen::VectorXd y = simplex.duals();
    result.duals = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i)
        result.duals(i) = row_sign[i] * y(i);
    result.reduced_costs = Eigen::VectorXd::Map(lp.objective.data(), n);
    for (int i = 0; i < m; ++i)
        for (const Term& t : lp.rows[i].terms)
            result.reduced_costs(t.col) -= result.duals(i) * t.coef;
    return result;
}

}  // namespace pwacert
