#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace pwacert {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, Equal, GreaterEqual };

struct Term {
    int col;
    double coef;
};

struct Row {
    std::vector<Term> terms;
    RowSense sense = RowSense::LessEqual;
    double rhs = 0.0;
};

/// maximize c'x  s.t.  rows,  lower <= x <= upper.
///
/// Rows are stored sparsely so that encoders can append constraints one at a
/// time; the solver densifies them.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<Row> rows;

    int add_variable(double lo, double hi, double obj = 0.0);
    void add_row(std::vector<Term> terms, RowSense sense, double rhs);

    int num_variables() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }

    Eigen::MatrixXd dense_matrix() const;
    double row_activity(int i, const Eigen::VectorXd& x) const;
    double objective_value(const Eigen::VectorXd& x) const;

    /// Largest violation of any row or variable bound at x (0 if feasible).
    double max_violation(const Eigen::VectorXd& x) const;

    /// Throws DimensionMismatch / InvalidModel on inconsistent data.
    void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s);

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    Eigen::VectorXd x;
    /// One multiplier per row, in the orientation of the original row.
    Eigen::VectorXd duals;
    /// c_j - y'a_j for every structural column.
    Eigen::VectorXd reduced_costs;
    int iterations = 0;
};

struct LpOptions {
    int iteration_limit = 100000;
    int refactor_interval = 64;
};

/// Dense bounded-variable revised simplex (two phases).
///
/// Fixed variables are removed before the solve. Throws
/// Error(NumericalBreakdown) when the basis becomes singular and cannot be
/// recovered.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

}  // namespace pwacert
