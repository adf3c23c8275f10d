#include "pwacert/geometry.hpp"

#include "pwacert/error.hpp"
#include "pwacert/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pwacert {

Polytope::Polytope(Eigen::MatrixXd H, Eigen::VectorXd h) : H_(std::move(H)), h_(std::move(h))
{
    if (H_.rows() != h_.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "polytope has " + std::to_string(H_.rows()) + " normals but " +
                        std::to_string(h_.size()) + " offsets");
    for (int i = 0; i < H_.rows(); ++i) {
        if (!H_.row(i).allFinite() || !std::isfinite(h_(i)))
            throw Error(ErrorCode::InvalidModel, "polytope row " + std::to_string(i) + " is not finite");
        if (H_.row(i).lpNorm<Eigen::Infinity>() == 0.0)
            throw Error(ErrorCode::InvalidModel, "polytope row " + std::to_string(i) + " is the zero vector");
    }
}

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    if (lo.size() != hi.size())
        throw Error(ErrorCode::DimensionMismatch, "box bounds differ in length");
    const int n = static_cast<int>(lo.size());
    Eigen::MatrixXd H(2 * n, n);
    Eigen::VectorXd h(2 * n);
    H.setZero();
    for (int i = 0; i < n; ++i) {
        H(2 * i, i) = 1.0;
        h(2 * i) = hi(i);
        H(2 * i + 1, i) = -1.0;
        h(2 * i + 1) = -lo(i);
    }
    return Polytope(std::move(H), std::move(h));
}

Polytope Polytope::box(int dim, double radius)
{
    return box(Eigen::VectorXd::Constant(dim, -radius), Eigen::VectorXd::Constant(dim, radius));
}

Polytope Polytope::empty(int dim)
{
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, dim);
    H(0, 0) = 1.0;
    H(1, 0) = -1.0;
    return Polytope(std::move(H), Eigen::Vector2d(-1.0, -1.0));
}

bool Polytope::contains_point(const Eigen::VectorXd& x, double tol) const
{
    if (x.size() != dim())
        throw Error(ErrorCode::DimensionMismatch, "point dimension differs from polytope dimension");
    for (int i = 0; i < num_constraints(); ++i)
        if (H_.row(i).dot(x) > h_(i) + tol)
            return false;
    return true;
}

namespace {

LinearProgram polytope_lp(const Polytope& P)
{
    LinearProgram lp;
    for (int j = 0; j < P.dim(); ++j)
        lp.add_variable(-kInf, kInf);
    for (int i = 0; i < P.num_constraints(); ++i) {
        std::vector<Term> terms;
        for (int j = 0; j < P.dim(); ++j)
            if (P.H()(i, j) != 0.0)
                terms.push_back({j, P.H()(i, j)});
        lp.add_row(std::move(terms), RowSense::LessEqual, P.h()(i));
    }
    return lp;
}

}  // namespace

bool Polytope::is_empty() const
{
    LinearProgram lp = polytope_lp(*this);
    return solve_lp(lp).status == LpStatus::Infeasible;
}

Ellipsoid::Ellipsoid(Eigen::MatrixXd S, double level) : S_(std::move(S)), level_(level)
{
    if (S_.rows() != S_.cols())
        throw Error(ErrorCode::DimensionMismatch, "ellipsoid matrix is not square");
    if (!(level_ > 0.0) || !std::isfinite(level_))
        throw Error(ErrorCode::InvalidModel, "ellipsoid level must be positive");
    if ((S_ - S_.transpose()).cwiseAbs().maxCoeff() > tol::kSymmetry)
        throw Error(ErrorCode::InvalidModel, "ellipsoid matrix is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(S_);
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0)
        throw Error(ErrorCode::InvalidModel, "ellipsoid matrix is not positive definite");
}

bool Ellipsoid::contains_scaled(const Eigen::VectorXd& x, double scale, double tol) const
{
    return quadratic(x) <= scale * scale * level_ + tol;
}

double support(const Polytope& P, const Eigen::VectorXd& v)
{
    if (v.size() != P.dim())
        throw Error(ErrorCode::DimensionMismatch, "support direction has wrong dimension");
    LinearProgram lp = polytope_lp(P);
    for (int j = 0; j < P.dim(); ++j)
        lp.objective[j] = v(j);
    const LpResult r = solve_lp(lp);
    switch (r.status) {
    case LpStatus::Infeasible: throw Error(ErrorCode::EmptySet, "support of an empty polytope");
    case LpStatus::Unbounded: return kInf;
    case LpStatus::Optimal: break;
    }
    return r.value;
}

Eigen::VectorXd support(const Polytope& P, const Eigen::MatrixXd& directions)
{
    Eigen::VectorXd out(directions.rows());
    for (int i = 0; i < directions.rows(); ++i)
        out(i) = support(P, Eigen::VectorXd(directions.row(i).transpose()));
    return out;
}

double containment_residual(const Polytope& outer, const Polytope& inner)
{
    if (outer.dim() != inner.dim())
        throw Error(ErrorCode::DimensionMismatch, "containment between polytopes of different dimension");
    if (inner.is_empty())
        return -kInf;
    double worst = -kInf;
    for (int i = 0; i < outer.num_constraints(); ++i) {
        const double s = support(inner, Eigen::VectorXd(outer.H().row(i).transpose()));
        worst = std::max(worst, s - outer.h()(i));
    }
    return worst;
}

bool contains(const Polytope& outer, const Polytope& inner, double tol)
{
    return containment_residual(outer, inner) <= tol;
}

Polytope scale(const Polytope& P, double s)
{
    if (!(s > 0.0))
        throw Error(ErrorCode::NonPositiveScale, "scale factor must be positive");
    return Polytope(P.H(), s * P.h());
}

Polytope intersect(const Polytope& A, const Polytope& B)
{
    if (A.dim() != B.dim())
        throw Error(ErrorCode::DimensionMismatch, "intersection of polytopes of different dimension");
    Eigen::MatrixXd H(A.num_constraints() + B.num_constraints(), A.dim());
    Eigen::VectorXd h(H.rows());
    H << A.H(), B.H();
    h << A.h(), B.h();
    return Polytope(std::move(H), std::move(h));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> bounding_box(const Polytope& P)
{
    const int n = P.dim();
    Eigen::VectorXd lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(n, i);
        hi(i) = support(P, e);
        lo(i) = -support(P, Eigen::VectorXd(-e));
    }
    return {lo, hi};
}

bool is_bounded(const Polytope& P)
{
    const auto [lo, hi] = bounding_box(P);
    return lo.allFinite() && hi.allFinite();
}

std::vector<Eigen::VectorXd> vertices(const Polytope& P)
{
    const int n = P.dim();
    if (n > 3)
        throw Error(ErrorCode::DimensionTooHigh, "vertex enumeration supports dimension <= 3");
    if (P.is_empty())
        throw Error(ErrorCode::EmptySet, "vertices of an empty polytope");
    if (!is_bounded(P))
        throw Error(ErrorCode::UnboundedSet, "vertices of an unbounded polytope");

    constexpr double kVertexTol = 1e-7;
    const int l = P.num_constraints();
    std::vector<Eigen::VectorXd> out;
    std::vector<int> pick(n);
    // Enumerate increasing index tuples of length n.
    for (int i = 0; i < n; ++i)
        pick[i] = i;
    if (l < n)
        return out;
    while (true) {
        Eigen::MatrixXd M(n, n);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) {
            M.row(i) = P.H().row(pick[i]);
            rhs(i) = P.h()(pick[i]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        lu.setThreshold(1e-10);
        if (lu.isInvertible()) {
            const Eigen::VectorXd x = lu.solve(rhs);
            const double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
            if (P.contains_point(x, kVertexTol * scale)) {
                const bool dup = std::any_of(out.begin(), out.end(), [&](const Eigen::VectorXd& v) {
                    return (v - x).lpNorm<Eigen::Infinity>() <= kVertexTol * scale;
                });
                if (!dup)
                    out.push_back(x);
            }
        }
        int k = n - 1;
        while (k >= 0 && pick[k] == l - n + k)
            --k;
        if (k < 0)
            break;
        ++pick[k];
        for (int i = k + 1; i < n; ++i)
            pick[i] = pick[i - 1] + 1;
    }
    return out;
}

double min_cover_scale(const Ellipsoid& E, const Polytope& P)
{
    if (E.dim() != P.dim())
        throw Error(ErrorCode::DimensionMismatch, "ellipsoid and polytope dimensions differ");
    double worst = 0.0;
    for (const Eigen::VectorXd& v : vertices(P))
        worst = std::max(worst, E.quadratic(v) / E.level());
    return std::sqrt(worst);
}

}  // namespace pwacert
