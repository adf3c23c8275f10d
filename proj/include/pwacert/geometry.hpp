#pragma once

#include "pwacert/tolerances.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace pwacert {

/// Convex polyhedron { x | H x <= h } in H-representation.
///
/// Immutable after construction. An empty polytope is a legal value; use
/// is_empty() before calling operations whose precondition excludes it.
class Polytope {
public:
    Polytope() = default;

    /// Throws DimensionMismatch when H and h disagree and InvalidModel for a
    /// zero row or non-finite entry.
    Polytope(Eigen::MatrixXd H, Eigen::VectorXd h);

    static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
    static Polytope box(int dim, double radius);
    /// A canonical empty set in R^dim: { x_1 <= -1, -x_1 <= -1 }.
    static Polytope empty(int dim);

    int dim() const { return static_cast<int>(H_.cols()); }
    int num_constraints() const { return static_cast<int>(H_.rows()); }
    const Eigen::MatrixXd& H() const { return H_; }
    const Eigen::VectorXd& h() const { return h_; }

    bool contains_point(const Eigen::VectorXd& x, double tol = tol::kRegionMembership) const;
    bool is_empty() const;

private:
    Eigen::MatrixXd H_;
    Eigen::VectorXd h_;
};

/// { x | x' S x <= level }.
class Ellipsoid {
public:
    Ellipsoid() = default;
    /// Throws InvalidModel unless S is symmetric positive definite and level > 0.
    Ellipsoid(Eigen::MatrixXd S, double level);

    const Eigen::MatrixXd& S() const { return S_; }
    double level() const { return level_; }
    int dim() const { return static_cast<int>(S_.rows()); }

    double quadratic(const Eigen::VectorXd& x) const { return x.dot(S_ * x); }
    /// True when x lies in scale * E, i.e. x'Sx <= scale^2 * level (+tol).
    bool contains_scaled(const Eigen::VectorXd& x, double scale, double tol = tol::kRegionMembership) const;

private:
    Eigen::MatrixXd S_;
    double level_ = 1.0;
};

/// sup over P of v.x. Returns +infinity when unbounded; throws EmptySet.
double support(const Polytope& P, const Eigen::VectorXd& v);

/// Supports for every row of directions (l x n).
Eigen::VectorXd support(const Polytope& P, const Eigen::MatrixXd& directions);

/// max_i ( support(inner, H_i(outer)) - h_i(outer) ). Non-positive iff inner is
/// contained in outer. Returns -infinity for an empty inner set.
double containment_residual(const Polytope& outer, const Polytope& inner);

bool contains(const Polytope& outer, const Polytope& inner, double tol = tol::kSet);

/// { H x <= s h }. Throws NonPositiveScale for s <= 0.
Polytope scale(const Polytope& P, double s);

/// Row concatenation; throws DimensionMismatch.
Polytope intersect(const Polytope& A, const Polytope& B);

/// Axis-aligned bounding box as (lo, hi); throws EmptySet, entries may be infinite.
std::pair<Eigen::VectorXd, Eigen::VectorXd> bounding_box(const Polytope& P);

bool is_bounded(const Polytope& P);

/// Extreme points of a bounded, non-empty polytope of dimension <= 3, by
/// intersecting every dim-subset of constraint hyperplanes.
std::vector<Eigen::VectorXd> vertices(const Polytope& P);

/// Smallest s with P inside s * E: max over vertices of sqrt(v'Sv / level).
double min_cover_scale(const Ellipsoid& E, const Polytope& P);

}  // namespace pwacert
