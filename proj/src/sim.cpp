#include "pwacert/sim.hpp"

#include "pwacert/error.hpp"
#include "pwacert/lp.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>

namespace pwacert {

namespace {

template <class Controller>
Trajectory rollout_with(const PwaSystem& sys, const Eigen::VectorXd& x0, int K, Controller&& control)
{
    if (x0.size() != sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, "initial state has wrong dimension");
    if (!sys.X().contains_point(x0, tol::kDomain))
        throw Error(ErrorCode::PreconditionFailed, "initial state lies outside X");
    Trajectory t;
    t.states.push_back(x0);
    for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd& x = t.states.back();
        const auto [u, branch] = control(x);
        const StepResult s = step_pwa(sys, x, u);
        t.inputs.push_back(u);
        t.regions.push_back(s.region);
        t.branches.push_back(branch);
        t.states.push_back(s.next);
        if (!sys.X().contains_point(s.next, tol::kDomain)) {
            t.left_X = true;
            break;
        }
    }
    return t;
}

struct AffineMap {
    Eigen::MatrixXd G;
    Eigen::VectorXd g;
};

class PatternEnumerator {
public:
    PatternEnumerator(const PwaSystem& sys, const MaxoutNet& net, const Polytope& x0_set, const Eigen::VectorXd& v)
        : sys_(sys), net_(net), v_(v)
    {
        const int n = sys.state_dim();
        for (int j = 0; j < n; ++j)
            base_.add_variable(-kInf, kInf);
        add_rows(base_, x0_set.H(), x0_set.h());
        add_rows(base_, sys.X().H(), sys.X().h());
    }

    double run()
    {
        const int n = sys_.state_dim();
        recurse(0, {Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)}, base_);
        if (!found_)
            throw Error(ErrorCode::EmptySet, "no region and activation pattern is feasible");
        return best_;
    }

private:
    static void add_rows(LinearProgram& lp, const Eigen::MatrixXd& H, const Eigen::VectorXd& h)
    {
        for (int r = 0; r < H.rows(); ++r) {
            std::vector<Term> t;
            for (int j = 0; j < H.cols(); ++j)
                if (H(r, j) != 0.0)
                    t.push_back({j, H(r, j)});
            lp.add_row(std::move(t), RowSense::LessEqual, h(r));
        }
    }

    // Adds a x <= b; returns false if the row is trivially violated.
    static bool add_checked(LinearProgram& lp, const Eigen::RowVectorXd& a, double b)
    {
        if (a.lpNorm<Eigen::Infinity>() <= 1e-14)
            return b >= -1e-12;
        add_rows(lp, a, Eigen::VectorXd::Constant(1, b));
        return true;
    }

    void recurse(int layer, const AffineMap& q, const LinearProgram& lp)
    {
        if (layer == net_.depth()) {
            finish(q, lp);
            return;
        }
        const MaxoutLayer& L = net_.hidden()[layer];
        const Eigen::MatrixXd Z = L.W * q.G;
        const Eigen::VectorXd z0 = L.W * q.g + L.b;
        const int w = L.width();
        std::vector<int> pick(w, 0);
        while (true) {
            LinearProgram child = lp;
            AffineMap next{Eigen::MatrixXd(w, q.G.cols()), Eigen::VectorXd(w)};
            bool ok = true;
            for (int l = 0; l < w && ok; ++l) {
                const int win = l * L.channels + pick[l];
                next.G.row(l) = Z.row(win);
                next.g(l) = z0(win);
                for (int j = l * L.channels; j < (l + 1) * L.channels && ok; ++j)
                    if (j != win)
                        ok = add_checked(child, Z.row(j) - Z.row(win), z0(win) - z0(j));
            }
            if (ok && (layer + 1 == net_.depth() || solve_lp(child).status != LpStatus::Infeasible))
                recurse(layer + 1, next, child);
            int d = 0;
            while (d < w && ++pick[d] == L.channels)
                pick[d++] = 0;
            if (d == w)
                break;
        }
    }

    void finish(const AffineMap& q, const LinearProgram& lp)
    {
        const int n = sys_.state_dim();
        const int m = sys_.input_dim();
        const AffineLayer& O = net_.output();
        const Eigen::MatrixXd U = O.W * q.G;
        const Eigen::VectorXd u0 = O.W * q.g + O.b;
        for (const PwaRegion& r : sys_.regions()) {
            LinearProgram child = lp;
            // Cell rows in x: Hx x + Hu (U x + u0) <= h.
            const Eigen::MatrixXd Hx = r.cell.H().leftCols(n) + r.cell.H().rightCols(m) * U;
            const Eigen::VectorXd hx = r.cell.h() - r.cell.H().rightCols(m) * u0;
            bool ok = true;
            for (int i = 0; i < Hx.rows() && ok; ++i)
                ok = add_checked(child, Hx.row(i), hx(i));
            if (!ok)
                continue;
            const Eigen::RowVectorXd c = v_.transpose() * (r.A + r.B * U);
            const double c0 = v_.dot(r.B * u0 + r.p);
            for (int j = 0; j < n; ++j)
                child.objective[j] = c(j);
            const LpResult res = solve_lp(child);
            if (res.status == LpStatus::Infeasible)
                continue;
            if (res.status == LpStatus::Unbounded)
                throw Error(ErrorCode::UnboundedReach, "pattern LP is unbounded");
            if (!found_ || res.value + c0 > best_)
                best_ = res.value + c0;
            found_ = true;
        }
    }

    const PwaSystem& sys_;
    const MaxoutNet& net_;
    Eigen::VectorXd v_;
    LinearProgram base_;
    bool found_ = false;
    double best_ = -kInf;
};

}  // namespace

Trajectory rollout(const PwaSystem& sys, const MaxoutNet& net, const Eigen::VectorXd& x0, int K)
{
    return rollout_with(sys, x0, K, [&](const Eigen::VectorXd& x) {
        return std::pair<Eigen::VectorXd, Branch>(eval_nn(net, x), Branch::Network);
    });
}

Trajectory rollout(const PwaSystem& sys, const DualModeController& ctrl, const Eigen::VectorXd& x0, int K)
{
    return rollout_with(sys, x0, K, [&](const Eigen::VectorXd& x) {
        if (ctrl.local_mode(x))
            return std::pair<Eigen::VectorXd, Branch>(ctrl.kappa.eval(x), Branch::Local);
        return std::pair<Eigen::VectorXd, Branch>(eval_nn(ctrl.net, x), Branch::Network);
    });
}

double pattern_count(const PwaSystem& sys, const MaxoutNet& net)
{
    double count = sys.region_count();
    for (const MaxoutLayer& L : net.hidden())
        count *= std::pow(static_cast<double>(L.channels), L.width());
    return count;
}

double pattern_enum_reach(const PwaSystem& sys, const MaxoutNet& net, const Polytope& x0_set,
                          const Eigen::VectorXd& v, long max_patterns)
{
    if (v.size() != sys.state_dim() || x0_set.dim() != sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, "direction or initial set has wrong dimension");
    const double count = pattern_count(sys, net);
    if (count > static_cast<double>(max_patterns))
        throw Error(ErrorCode::TooManyPatterns,
                    std::to_string(static_cast<long long>(count)) + " patterns exceed the limit of " +
                        std::to_string(max_patterns));
    return PatternEnumerator(sys, net, x0_set, v).run();
}

std::vector<Eigen::VectorXd> sample_polytope(const Polytope& P, int count, std::uint64_t seed)
{
    std::vector<Eigen::VectorXd> out;
    if (count <= 0 || P.is_empty())
        return out;
    const auto [lo, hi] = bounding_box(P);
    if (!lo.allFinite() || !hi.allFinite())
        throw Error(ErrorCode::UnboundedSet, "cannot sample an unbounded polytope");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const long max_attempts = 1000L * count;
    for (long a = 0; a < max_attempts && static_cast<int>(out.size()) < count; ++a) {
        Eigen::VectorXd x(P.dim());
        for (int d = 0; d < P.dim(); ++d)
            x(d) = lo(d) + (hi(d) - lo(d)) * unit(rng);
        if (P.contains_point(x, 0.0))
            out.push_back(std::move(x));
    }
    return out;
}

AuditReport grid_audit(const PwaSystem& sys, const MaxoutNet& net, const Polytope& F, int samples, std::uint64_t seed)
{
    AuditReport report;
    report.seed = seed;
    for (const Eigen::VectorXd& x : sample_polytope(F, samples, seed)) {
        ++report.samples;
        const Eigen::VectorXd u = eval_nn(net, x);
        const auto region = sys.find_region(x, u);
        if (!region) {
            ++report.no_region;
            continue;
        }
        const PwaRegion& r = sys.region(*region);
        const Eigen::VectorXd next = r.A * x + r.B * u + r.p;
        if (!F.contains_point(next, tol::kSet))
            report.escapees.push_back(x);
    }
    return report;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    if (traj.states.empty())
        return;
    const int n = static_cast<int>(traj.states.front().size());
    const int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs.front().size());
    const auto old_precision = os.precision(17);
    os << 'k';
    for (int d = 0; d < n; ++d)
        os << ",x" << d;
    for (int d = 0; d < m; ++d)
        os << ",u" << d;
    os << ",region,branch\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        os << k;
        for (int d = 0; d < n; ++d)
            os << ',' << traj.states[k](d);
        if (k < traj.inputs.size()) {
            for (int d = 0; d < m; ++d)
                os << ',' << traj.inputs[k](d);
            os << ',' << traj.regions[k] << ',' << (traj.branches[k] == Branch::Local ? "local" : "network");
        } else {
            for (int d = 0; d < m; ++d)
                os << ',';
            os << ",,";
        }
        os << '\n';
    }
    os.precision(old_precision);
}

}  // namespace pwacert
