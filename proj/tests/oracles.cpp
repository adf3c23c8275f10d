#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

using namespace pwacert;

namespace {

// Calls f with every increasing k-subset of {0..n-1}.
template <class F>
void for_each_subset(int n, int k, F&& f)
{
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i)
        idx[i] = i;
    if (k > n)
        return;
    while (true) {
        f(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i)
            --i;
        if (i < 0)
            return;
        ++idx[i];
        for (int j = i + 1; j < k; ++j)
            idx[j] = idx[j - 1] + 1;
    }
}

struct Inequalities {
    Eigen::MatrixXd G;
    Eigen::VectorXd g;
};

Inequalities as_inequalities(const LinearProgram& lp)
{
    const int n = lp.num_variables();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    auto push = [&](Eigen::RowVectorXd a, double b) {
        rows.push_back(std::move(a));
        rhs.push_back(b);
    };
    for (const Row& r : lp.rows) {
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(n);
        for (const Term& t : r.terms)
            a(t.col) += t.coef;
        if (r.sense != RowSense::GreaterEqual)
            push(a, r.rhs);
        if (r.sense != RowSense::LessEqual)
            push(-a, -r.rhs);
    }
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(lp.lower[j]))
            push(-Eigen::RowVectorXd::Unit(n, j), -lp.lower[j]);
        if (std::isfinite(lp.upper[j]))
            push(Eigen::RowVectorXd::Unit(n, j), lp.upper[j]);
    }
    Inequalities out{Eigen::MatrixXd(rows.size(), n), Eigen::VectorXd(rows.size())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.G.row(i) = rows[i];
        out.g(i) = rhs[i];
    }
    return out;
}

}  // namespace

Result lp_by_vertices(const LinearProgram& lp)
{
    const int n = lp.num_variables();
    const Inequalities S = as_inequalities(lp);
    const int k = static_cast<int>(S.G.rows());
    Eigen::VectorXd c(n);
    for (int j = 0; j < n; ++j)
        c(j) = lp.objective[j];

    auto feasible = [&](const Eigen::VectorXd& x) {
        for (int i = 0; i < k; ++i)
            if (S.G.row(i).dot(x) > S.g(i) + 1e-8 * (1.0 + std::abs(S.g(i)) + x.lpNorm<Eigen::Infinity>()))
                return false;
        return true;
    };

    Result res;
    if (n == 0) {
        if (feasible(Eigen::VectorXd(0))) {
            res.status = Status::Optimal;
            res.value = 0.0;
        }
        return res;
    }

    bool any = false;
    double best = -std::numeric_limits<double>::infinity();
    for_each_subset(k, n, [&](const std::vector<int>& idx) {
        Eigen::MatrixXd M(n, n);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            M.row(i) = S.G.row(idx[i]);
            b(i) = S.g(idx[i]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        lu.setThreshold(1e-11);
        if (!lu.isInvertible())
            return;
        const Eigen::VectorXd x = lu.solve(b);
        if (!feasible(x))
            return;
        any = true;
        best = std::max(best, c.dot(x));
    });
    if (!any)
        return res;

    // A pointed cone is generated by directions on n-1 independent facets.
    bool unbounded = false;
    for_each_subset(k, n - 1, [&](const std::vector<int>& idx) {
        if (unbounded)
            return;
        Eigen::MatrixXd M(n - 1, n);
        for (int i = 0; i < n - 1; ++i)
            M.row(i) = S.G.row(idx[i]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        lu.setThreshold(1e-11);
        const Eigen::MatrixXd K = lu.kernel();
        if (K.cols() != 1)
            return;
        Eigen::VectorXd d = K.col(0);
        d /= d.norm();
        for (double sign : {1.0, -1.0}) {
            const Eigen::VectorXd dd = sign * d;
            if ((S.G * dd).maxCoeff() <= 1e-10 && c.dot(dd) > 1e-9)
                unbounded = true;
        }
    });
    if (unbounded) {
        res.status = Status::Unbounded;
        return res;
    }
    res.status = Status::Optimal;
    res.value = best;
    return res;
}

Result milp_by_enumeration(const MilpProblem& milp)
{
    const LinearProgram& lp = milp.lp;
    const int b = static_cast<int>(milp.binaries.size());
    std::vector<int> is_binary(lp.num_variables(), -1);
    for (int i = 0; i < b; ++i)
        is_binary[milp.binaries[i]] = i;
    std::vector<int> cont_index(lp.num_variables(), -1);
    int nc = 0;
    for (int j = 0; j < lp.num_variables(); ++j)
        if (is_binary[j] < 0)
            cont_index[j] = nc++;

    Result best;
    bool feasible = false;
    for (long mask = 0; mask < (1L << b); ++mask) {
        std::vector<double> val(b);
        bool ok = true;
        double offset = 0.0;
        for (int i = 0; i < b; ++i) {
            val[i] = (mask >> i) & 1;
            const int j = milp.binaries[i];
            if (val[i] < lp.lower[j] || val[i] > lp.upper[j])
                ok = false;
            offset += lp.objective[j] * val[i];
        }
        if (!ok)
            continue;
        LinearProgram red;
        for (int j = 0; j < lp.num_variables(); ++j)
            if (cont_index[j] >= 0)
                red.add_variable(lp.lower[j], lp.upper[j], lp.objective[j]);
        for (const Row& r : lp.rows) {
            std::vector<Term> t;
            double rhs = r.rhs;
            for (const Term& term : r.terms) {
                if (is_binary[term.col] >= 0)
                    rhs -= term.coef * val[is_binary[term.col]];
                else
                    t.push_back({cont_index[term.col], term.coef});
            }
            red.add_row(std::move(t), r.sense, rhs);
        }
        const Result r = lp_by_vertices(red);
        if (r.status == Status::Infeasible)
            continue;
        if (r.status == Status::Unbounded)
            return {Status::Unbounded, 0.0};
        if (!feasible || r.value + offset > best.value) {
            best.value = r.value + offset;
            best.status = Status::Optimal;
        }
        feasible = true;
    }
    return best;
}

double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

namespace {

RowSense random_sense(Rng& rng)
{
    const double s = uniform(rng, 0.0, 1.0);
    return s < 0.7 ? RowSense::LessEqual : s < 0.85 ? RowSense::GreaterEqual : RowSense::Equal;
}

void add_random_rows(Rng& rng, LinearProgram& lp, int rows, const Eigen::VectorXd& anchor, bool anchored)
{
    const int n = lp.num_variables();
    for (int r = 0; r < rows; ++r) {
        std::vector<Term> t;
        double act = 0.0;
        for (int j = 0; j < n; ++j) {
            if (uniform(rng, 0.0, 1.0) < 0.25)
                continue;
            const double a = uniform(rng, -3.0, 3.0);
            t.push_back({j, a});
            act += a * anchor(j);
        }
        const RowSense sense = random_sense(rng);
        double rhs = uniform(rng, -5.0, 5.0);
        if (anchored) {
            const double slack = uniform(rng, 0.0, 2.0);
            rhs = sense == RowSense::LessEqual ? act + slack : sense == RowSense::GreaterEqual ? act - slack : act;
        }
        lp.add_row(std::move(t), sense, rhs);
    }
}

}  // namespace

LinearProgram random_lp(Rng& rng, int vars, int rows)
{
    LinearProgram lp;
    Eigen::VectorXd anchor(vars);
    for (int j = 0; j < vars; ++j) {
        const double lo = uniform(rng, -5.0, 0.0);
        const double hi = uniform(rng, 0.0, 1.0) < 0.75 ? lo + uniform(rng, 0.5, 6.0) : kInf;
        lp.add_variable(lo, hi, uniform(rng, -2.0, 2.0));
        anchor(j) = std::isfinite(hi) ? uniform(rng, lo, hi) : lo + uniform(rng, 0.0, 4.0);
    }
    add_random_rows(rng, lp, rows, anchor, uniform(rng, 0.0, 1.0) < 0.8);
    return lp;
}

MilpProblem random_milp(Rng& rng, int binaries, int continuous, int rows)
{
    MilpProblem milp;
    Eigen::VectorXd anchor(binaries + continuous);
    std::vector<bool> binary(binaries + continuous, false);
    std::fill(binary.begin(), binary.begin() + binaries, true);
    std::shuffle(binary.begin(), binary.end(), rng);
    for (int i = 0; i < binaries + continuous; ++i) {
        const bool bin = binary[i];
        if (bin) {
            milp.add_binary(uniform(rng, -2.0, 2.0));
            anchor(i) = uniform_int(rng, 0, 1);
        } else {
            const double lo = uniform(rng, -4.0, 0.0);
            const double hi = uniform(rng, 0.0, 1.0) < 0.85 ? lo + uniform(rng, 0.5, 5.0) : kInf;
            milp.lp.add_variable(lo, hi, uniform(rng, -2.0, 2.0));
            anchor(i) = std::isfinite(hi) ? uniform(rng, lo, hi) : lo + uniform(rng, 0.0, 3.0);
        }
    }
    add_random_rows(rng, milp.lp, rows, anchor, uniform(rng, 0.0, 1.0) < 0.8);
    return milp;
}

PwaSystem random_system(Rng& rng, int n, int m, int regions, double x_radius, double u_radius, double a_scale)
{
    const int d = n + m;
    Eigen::VectorXd lo(d), hi(d);
    lo << Eigen::VectorXd::Constant(n, -x_radius), Eigen::VectorXd::Constant(m, -u_radius);
    hi = -lo;
    std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> leaves{{Eigen::MatrixXd(0, d), Eigen::VectorXd(0)}};
    while (static_cast<int>(leaves.size()) < regions) {
        const int pick = uniform_int(rng, 0, static_cast<int>(leaves.size()) - 1);
        const auto [H, h] = leaves[pick];
        Eigen::VectorXd xi(d);
        for (int tries = 0; tries < 1000; ++tries) {
            for (int j = 0; j < d; ++j)
                xi(j) = uniform(rng, lo(j), hi(j));
            if (H.rows() == 0 || ((H * xi - h).array() <= 0.0).all())
                break;
        }
        Eigen::VectorXd a(d);
        for (int j = 0; j < d; ++j)
            a(j) = uniform(rng, -1.0, 1.0);
        a /= a.norm();
        const double b = a.dot(xi);
        Eigen::MatrixXd H1(H.rows() + 1, d), H2(H.rows() + 1, d);
        Eigen::VectorXd h1(H.rows() + 1), h2(H.rows() + 1);
        H1 << H, a.transpose();
        h1 << h, b;
        H2 << H, -a.transpose();
        h2 << h, -b;
        leaves[pick] = {H1, h1};
        leaves.push_back({H2, h2});
    }
    std::vector<PwaRegion> regs;
    for (const auto& [H, h] : leaves) {
        PwaRegion r;
        r.A = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return uniform(rng, -1.0, 1.0); });
        const double norm = r.A.operatorNorm();
        if (norm > 0.0)
            r.A *= a_scale * uniform(rng, 0.5, 1.0) / norm;
        r.B = Eigen::MatrixXd::NullaryExpr(n, m, [&] { return uniform(rng, -1.0, 1.0); });
        if (H.rows() == 0) {
            // A single region needs at least one row; use a far-away face.
            r.cell = Polytope(Eigen::RowVectorXd::Unit(d, 0), Eigen::VectorXd::Constant(1, 1e6));
        } else {
            r.cell = Polytope(H, h);
        }
        const bool origin = r.cell.contains_point(Eigen::VectorXd::Zero(d), 1e-9);
        r.p = origin ? Eigen::VectorXd::Zero(n)
                     : Eigen::VectorXd(Eigen::VectorXd::NullaryExpr(n, [&] { return uniform(rng, -0.5, 0.5); }));
        regs.push_back(std::move(r));
    }
    return PwaSystem(std::move(regs), Polytope::box(n, x_radius), Polytope::box(m, u_radius));
}

MaxoutNet random_net(Rng& rng, int n, int m, int depth, int max_width, int max_channels)
{
    std::vector<MaxoutLayer> layers;
    int prev = n;
    for (int l = 0; l < depth; ++l) {
        MaxoutLayer L;
        const int w = uniform_int(rng, 1, max_width);
        L.channels = uniform_int(rng, 1, max_channels);
        L.W = Eigen::MatrixXd::NullaryExpr(w * L.channels, prev, [&] { return uniform(rng, -1.0, 1.0); });
        L.b = Eigen::VectorXd::NullaryExpr(w * L.channels, [&] { return uniform(rng, -0.5, 0.5); });
        layers.push_back(std::move(L));
        prev = w;
    }
    AffineLayer out;
    out.W = Eigen::MatrixXd::NullaryExpr(m, prev, [&] { return uniform(rng, -1.0, 1.0); });
    out.b = Eigen::VectorXd::NullaryExpr(m, [&] { return uniform(rng, -0.2, 0.2); });
    return MaxoutNet(std::move(layers), std::move(out));
}

Eigen::VectorXd complete_assignment(const EncodedSystem& enc, const PwaSystem& sys, const MaxoutNet& net,
                                    const Trajectory& traj)
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(enc.milp.lp.num_variables());
    const int n = sys.state_dim();
    for (int k = 0; k <= enc.horizon; ++k)
        for (int d = 0; d < n; ++d)
            v(enc.x[k][d]) = traj.states[k](d);
    for (int k = 0; k < enc.horizon; ++k) {
        const Eigen::VectorXd& x = traj.states[k];
        const Eigen::VectorXd& u = traj.inputs[k];
        for (int d = 0; d < sys.input_dim(); ++d)
            v(enc.u[k][d]) = u(d);
        const ForwardTrace t = forward_trace(net, x);
        for (std::size_t l = 0; l < t.outputs.size(); ++l) {
            for (int j = 0; j < t.outputs[l].size(); ++j)
                v(enc.nn[k].q[l][j]) = t.outputs[l](j);
            for (int win : t.winners[l])
                v(enc.nn[k].delta[l][win]) = 1.0;
        }
        const int i = traj.regions[k];
        v(enc.step[k].gamma[i]) = 1.0;
        const PwaRegion& r = sys.region(i);
        const Eigen::VectorXd next = r.A * x + r.B * u + r.p;
        for (int d = 0; d < n; ++d)
            v(enc.step[k].x_tilde[i][d]) = next(d);
    }
    return v;
}

double grid_max(const Eigen::VectorXd& a, double c, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                int points_per_axis)
{
    const int d = static_cast<int>(a.size());
    std::vector<int> idx(d, 0);
    double best = -std::numeric_limits<double>::infinity();
    while (true) {
        double s = c;
        for (int j = 0; j < d; ++j)
            s += a(j) * (lo(j) + (hi(j) - lo(j)) * idx[j] / (points_per_axis - 1));
        best = std::max(best, s);
        int j = 0;
        while (j < d && ++idx[j] == points_per_axis)
            idx[j++] = 0;
        if (j == d)
            return best;
    }
}

double grid_cover_scale(const Ellipsoid& E, const Polytope& P, int points_per_axis)
{
    const auto [lo, hi] = bounding_box(P);
    const int d = P.dim();
    std::vector<int> idx(d, 0);
    double best = 0.0;
    while (true) {
        Eigen::VectorXd x(d);
        for (int j = 0; j < d; ++j)
            x(j) = lo(j) + (hi(j) - lo(j)) * idx[j] / (points_per_axis - 1);
        if (P.contains_point(x, 1e-9))
            best = std::max(best, E.quadratic(x) / E.level());
        int j = 0;
        while (j < d && ++idx[j] == points_per_axis)
            idx[j++] = 0;
        if (j == d)
            return std::sqrt(best);
    }
}

}  // namespace oracle
