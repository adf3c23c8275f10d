#include "pwacert/encoder.hpp"

#include "pwacert/error.hpp"
#include "pwacert/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace pwacert {

namespace {

// Pushes an interval endpoint outward so that rounding in the propagation
// cannot make the enclosure too small.
double widen_up(double v)
{
    return v + 1e-9 * (1.0 + std::abs(v));
}

double widen_down(double v)
{
    return v - 1e-9 * (1.0 + std::abs(v));
}

// min over the box of max_j (W_j q + b_j) for the channel rows [first, first + count).
// Interval arithmetic only gives max_j inf(W_j q + b_j), which is loose when
// channels peak in different corners.
double group_inf(const MaxoutLayer& L, int first, int count, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    LinearProgram lp;
    const int t = lp.add_variable(-kInf, kInf, -1.0);
    std::vector<int> q;
    for (int i = 0; i < lo.size(); ++i)
        q.push_back(lp.add_variable(lo(i), hi(i)));
    for (int j = first; j < first + count; ++j) {
        std::vector<Term> terms{{t, -1.0}};
        for (int i = 0; i < lo.size(); ++i)
            if (L.W(j, i) != 0.0)
                terms.push_back({q[i], L.W(j, i)});
        lp.add_row(std::move(terms), RowSense::LessEqual, -L.b(j));
    }
    const LpResult r = solve_lp(lp);
    return r.status == LpStatus::Optimal ? -r.value : -kInf;
}

// sup and inf of a.xi + c over the box [lo, hi].
double box_sup(const Eigen::VectorXd& a, double c, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    double s = c;
    for (int j = 0; j < a.size(); ++j)
        s += a(j) >= 0.0 ? a(j) * hi(j) : a(j) * lo(j);
    return s;
}

double box_inf(const Eigen::VectorXd& a, double c, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    return -box_sup(-a, -c, lo, hi);
}

void check_size(Eigen::Index got, Eigen::Index want, const char* what)
{
    if (got != want)
        throw Error(ErrorCode::DimensionMismatch, std::string("big-M config: ") + what + " has wrong size");
}

void check_finite_nonneg(const Eigen::VectorXd& v, const char* what)
{
    if (!v.allFinite() || (v.size() > 0 && v.minCoeff() < 0.0))
        throw Error(ErrorCode::InvalidModel, std::string("big-M config: ") + what + " must be finite and non-negative");
}

void check_interval(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const char* what)
{
    if (lo.size() != hi.size())
        throw Error(ErrorCode::DimensionMismatch, std::string("big-M config: ") + what + " bounds differ in size");
    if (!lo.allFinite() || !hi.allFinite() || ((hi - lo).array() < 0.0).any())
        throw Error(ErrorCode::InvalidModel, std::string("big-M config: ") + what + " bounds must be finite with lo <= hi");
}

std::vector<Term> affine_terms(const Eigen::RowVectorXd& a, const std::vector<int>& cols, double scale = 1.0)
{
    std::vector<Term> t;
    for (int j = 0; j < a.size(); ++j)
        if (a(j) != 0.0)
            t.push_back({cols[j], scale * a(j)});
    return t;
}

}  // namespace

void BigMConfig::validate(const PwaSystem& sys, const MaxoutNet& net) const
{
    const int n = sys.state_dim();
    const int m = sys.input_dim();
    check_size(x_lo.size(), n, "x box");
    check_size(u_lo.size(), m, "u box");
    check_interval(x_lo, x_hi, "x box");
    check_interval(u_lo, u_hi, "u box");
    check_size(static_cast<Eigen::Index>(region_m.size()), sys.region_count(), "region_m");
    check_size(static_cast<Eigen::Index>(dyn_m.size()), sys.region_count(), "dyn_m");
    for (int i = 0; i < sys.region_count(); ++i) {
        check_size(region_m[i].size(), sys.region(i).cell.num_constraints(), "region_m entry");
        check_size(dyn_m[i].size(), n, "dyn_m entry");
        check_finite_nonneg(region_m[i], "region_m");
        check_finite_nonneg(dyn_m[i], "dyn_m");
    }
    check_size(static_cast<Eigen::Index>(layers.size()), net.depth(), "layer bounds");
    for (int i = 0; i < net.depth(); ++i) {
        check_size(layers[i].pre_lo.size(), net.hidden()[i].W.rows(), "preactivation bounds");
        check_size(layers[i].out_lo.size(), net.hidden()[i].width(), "layer output bounds");
        check_interval(layers[i].pre_lo, layers[i].pre_hi, "preactivation");
        check_interval(layers[i].out_lo, layers[i].out_hi, "layer output");
    }
    if (net.input_dim() != n || net.output_dim() != m)
        throw Error(ErrorCode::DimensionMismatch, "network dimensions do not match the system");
}

std::vector<LayerBounds> propagate_bounds(const MaxoutNet& net, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    if (lo.size() != net.input_dim() || hi.size() != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "input box has wrong dimension");
    std::vector<LayerBounds> out;
    Eigen::VectorXd qlo = lo, qhi = hi;
    for (const MaxoutLayer& L : net.hidden()) {
        LayerBounds B;
        const int rows = static_cast<int>(L.W.rows());
        B.pre_lo.resize(rows);
        B.pre_hi.resize(rows);
        for (int j = 0; j < rows; ++j) {
            const Eigen::VectorXd w = L.W.row(j).transpose();
            B.pre_lo(j) = widen_down(box_inf(w, L.b(j), qlo, qhi));
            B.pre_hi(j) = widen_up(box_sup(w, L.b(j), qlo, qhi));
        }
        const int width = L.width();
        B.out_lo.resize(width);
        B.out_hi.resize(width);
        for (int l = 0; l < width; ++l) {
            B.out_lo(l) = B.pre_lo.segment(l * L.channels, L.channels).maxCoeff();
            if (L.channels > 1)
                B.out_lo(l) = std::max(B.out_lo(l), widen_down(group_inf(L, l * L.channels, L.channels, qlo, qhi)));
            B.out_hi(l) = B.pre_hi.segment(l * L.channels, L.channels).maxCoeff();
        }
        qlo = B.out_lo;
        qhi = B.out_hi;
        out.push_back(std::move(B));
    }
    return out;
}

BigMConfig derive_big_m(const PwaSystem& sys, const MaxoutNet& net)
{
    const int n = sys.state_dim();
    const int m = sys.input_dim();
    if (net.input_dim() != n || net.output_dim() != m)
        throw Error(ErrorCode::DimensionMismatch, "network dimensions do not match the system");
    const auto [xlo, xhi] = bounding_box(sys.X());
    const auto [Ulo, Uhi] = bounding_box(sys.U());
    if (!xlo.allFinite() || !xhi.allFinite() || !Ulo.allFinite() || !Uhi.allFinite())
        throw Error(ErrorCode::UnboundedDomain, "big-M derivation needs bounded X and U");

    BigMConfig cfg;
    cfg.mode = BigMConfig::Mode::Auto;
    cfg.x_lo = xlo;
    cfg.x_hi = xhi;
    cfg.layers = propagate_bounds(net, xlo, xhi);

    // The input box must hold both U and every value the network can emit on X.
    const Eigen::VectorXd qlo = cfg.layers.empty() ? xlo : cfg.layers.back().out_lo;
    const Eigen::VectorXd qhi = cfg.layers.empty() ? xhi : cfg.layers.back().out_hi;
    cfg.u_lo.resize(m);
    cfg.u_hi.resize(m);
    for (int d = 0; d < m; ++d) {
        const Eigen::VectorXd w = net.output().W.row(d).transpose();
        cfg.u_lo(d) = std::min(Ulo(d), widen_down(box_inf(w, net.output().b(d), qlo, qhi)));
        cfg.u_hi(d) = std::max(Uhi(d), widen_up(box_sup(w, net.output().b(d), qlo, qhi)));
    }

    Eigen::VectorXd lo(n + m), hi(n + m);
    lo << cfg.x_lo, cfg.u_lo;
    hi << cfg.x_hi, cfg.u_hi;
    for (const PwaRegion& r : sys.regions()) {
        Eigen::VectorXd rm(r.cell.num_constraints());
        for (int j = 0; j < rm.size(); ++j) {
            const double excess = box_sup(r.cell.H().row(j).transpose(), -r.cell.h()(j), lo, hi);
            rm(j) = excess > 0.0 ? widen_up(excess) : 0.0;
        }
        cfg.region_m.push_back(std::move(rm));

        Eigen::MatrixXd AB(n, n + m);
        AB << r.A, r.B;
        Eigen::VectorXd dm(n);
        for (int d = 0; d < n; ++d) {
            const Eigen::VectorXd a = AB.row(d).transpose();
            dm(d) = widen_up(std::max(std::abs(box_sup(a, r.p(d), lo, hi)), std::abs(box_inf(a, r.p(d), lo, hi))));
        }
        cfg.dyn_m.push_back(std::move(dm));
    }
    return cfg;
}

std::vector<int> encode_region_selection(MilpProblem& milp, const PwaSystem& sys, const BigMConfig& cfg,
                                         const std::vector<int>& x, const std::vector<int>& u)
{
    std::vector<int> cols = x;
    cols.insert(cols.end(), u.begin(), u.end());
    std::vector<int> gamma;
    std::vector<Term> sum;
    for (int i = 0; i < sys.region_count(); ++i) {
        const int g = milp.add_binary();
        gamma.push_back(g);
        sum.push_back({g, 1.0});
        const Polytope& cell = sys.region(i).cell;
        for (int r = 0; r < cell.num_constraints(); ++r) {
            const double M = cfg.region_m[i](r);
            std::vector<Term> t = affine_terms(cell.H().row(r), cols);
            if (M > 0.0)
                t.push_back({g, M});
            milp.lp.add_row(std::move(t), RowSense::LessEqual, cell.h()(r) + M);
        }
    }
    milp.lp.add_row(std::move(sum), RowSense::Equal, 1.0);
    return gamma;
}

std::vector<std::vector<int>> encode_pwa_step(MilpProblem& milp, const PwaSystem& sys, const BigMConfig& cfg,
                                              const std::vector<int>& x, const std::vector<int>& u,
                                              const std::vector<int>& gamma, const std::vector<int>& x_next)
{
    const int n = sys.state_dim();
    const int m = sys.input_dim();
    std::vector<int> cols = x;
    cols.insert(cols.end(), u.begin(), u.end());
    std::vector<std::vector<int>> xt(sys.region_count());
    for (int i = 0; i < sys.region_count(); ++i) {
        const PwaRegion& r = sys.region(i);
        Eigen::MatrixXd AB(n, n + m);
        AB << r.A, r.B;
        for (int d = 0; d < n; ++d) {
            const double M = cfg.dyn_m[i](d);
            const int v = milp.lp.add_variable(-M, M);
            xt[i].push_back(v);
            // |A x + B u + p - xt| <= M (1 - gamma)
            std::vector<Term> up = affine_terms(AB.row(d), cols);
            up.push_back({v, -1.0});
            up.push_back({gamma[i], M});
            milp.lp.add_row(std::move(up), RowSense::LessEqual, M - r.p(d));
            std::vector<Term> down = affine_terms(AB.row(d), cols, -1.0);
            down.push_back({v, 1.0});
            down.push_back({gamma[i], M});
            milp.lp.add_row(std::move(down), RowSense::LessEqual, M + r.p(d));
            // |xt| <= M gamma
            milp.lp.add_row({{v, 1.0}, {gamma[i], -M}}, RowSense::LessEqual, 0.0);
            milp.lp.add_row({{v, -1.0}, {gamma[i], -M}}, RowSense::LessEqual, 0.0);
        }
    }
    for (int d = 0; d < n; ++d) {
        std::vector<Term> t;
        for (int i = 0; i < sys.region_count(); ++i)
            t.push_back({xt[i][d], 1.0});
        t.push_back({x_next[d], -1.0});
        milp.lp.add_row(std::move(t), RowSense::Equal, 0.0);
    }
    return xt;
}

NnVars encode_nn(MilpProblem& milp, const MaxoutNet& net, const BigMConfig& cfg, const std::vector<int>& in,
                 const std::vector<int>& out)
{
    NnVars vars;
    std::vector<int> prev = in;
    for (int li = 0; li < net.depth(); ++li) {
        const MaxoutLayer& L = net.hidden()[li];
        const LayerBounds& B = cfg.layers[li];
        std::vector<int> q, delta;
        for (int l = 0; l < L.width(); ++l) {
            const int ql = milp.lp.add_variable(B.out_lo(l), B.out_hi(l));
            q.push_back(ql);
            std::vector<Term> one;
            for (int j = l * L.channels; j < (l + 1) * L.channels; ++j) {
                const int dj = milp.add_binary();
                delta.push_back(dj);
                one.push_back({dj, 1.0});
                // q_l >= W_j prev + b_j
                std::vector<Term> lower = affine_terms(L.W.row(j), prev, -1.0);
                lower.push_back({ql, 1.0});
                milp.lp.add_row(std::move(lower), RowSense::GreaterEqual, L.b(j));
                // q_l <= W_j prev + b_j + M_j (1 - delta_j)
                const double M = std::max(0.0, B.out_hi(l) - B.pre_lo(j));
                std::vector<Term> upper = affine_terms(L.W.row(j), prev, -1.0);
                upper.push_back({ql, 1.0});
                upper.push_back({dj, M});
                milp.lp.add_row(std::move(upper), RowSense::LessEqual, L.b(j) + M);
            }
            milp.lp.add_row(std::move(one), RowSense::Equal, 1.0);
        }
        vars.q.push_back(q);
        vars.delta.push_back(std::move(delta));
        prev = std::move(q);
    }
    const AffineLayer& O = net.output();
    for (int d = 0; d < O.W.rows(); ++d) {
        std::vector<Term> t = affine_terms(O.W.row(d), prev, -1.0);
        t.push_back({out[d], 1.0});
        milp.lp.add_row(std::move(t), RowSense::Equal, O.b(d));
    }
    return vars;
}

int EncodedSystem::binaries_per_step() const
{
    if (horizon == 0)
        return 0;
    int count = static_cast<int>(step[0].gamma.size());
    for (const std::vector<int>& d : nn[0].delta)
        count += static_cast<int>(d.size());
    return count;
}

EncodedSystem encode_closed_loop(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int K,
                                 const Polytope& x0_set)
{
    if (K < 1)
        throw Error(ErrorCode::InvalidModel, "horizon must be at least 1");
    if (x0_set.dim() != sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, "initial set has wrong dimension");
    cfg.validate(sys, net);
    const int n = sys.state_dim();
    const int m = sys.input_dim();

    EncodedSystem enc;
    enc.horizon = K;
    MilpProblem& milp = enc.milp;
    auto add_state = [&](bool in_X) {
        std::vector<int> cols;
        for (int d = 0; d < n; ++d)
            cols.push_back(in_X ? milp.lp.add_variable(cfg.x_lo(d), cfg.x_hi(d)) : milp.lp.add_variable(-kInf, kInf));
        return cols;
    };
    auto add_polytope_rows = [&](const Polytope& P, const std::vector<int>& cols) {
        for (int r = 0; r < P.num_constraints(); ++r)
            milp.lp.add_row(affine_terms(P.H().row(r), cols), RowSense::LessEqual, P.h()(r));
    };

    enc.x.push_back(add_state(true));
    add_polytope_rows(x0_set, enc.x[0]);
    for (int k = 0; k < K; ++k) {
        add_polytope_rows(sys.X(), enc.x[k]);
        std::vector<int> u;
        for (int d = 0; d < m; ++d)
            u.push_back(milp.lp.add_variable(cfg.u_lo(d), cfg.u_hi(d)));
        enc.u.push_back(u);
        enc.nn.push_back(encode_nn(milp, net, cfg, enc.x[k], u));
        PwaStepVars sv;
        sv.gamma = encode_region_selection(milp, sys, cfg, enc.x[k], u);
        enc.x.push_back(add_state(k + 1 < K));
        sv.x_tilde = encode_pwa_step(milp, sys, cfg, enc.x[k], u, sv.gamma, enc.x[k + 1]);
        enc.step.push_back(std::move(sv));
    }

    enc.names.assign(milp.lp.num_variables(), "");
    auto name = [&](int col, std::string s) { enc.names[col] = std::move(s); };
    for (int k = 0; k <= K; ++k)
        for (int d = 0; d < n; ++d)
            name(enc.x[k][d], "x" + std::to_string(k) + "_" + std::to_string(d));
    for (int k = 0; k < K; ++k) {
        const std::string ks = std::to_string(k);
        for (int d = 0; d < m; ++d)
            name(enc.u[k][d], "u" + ks + "_" + std::to_string(d));
        for (std::size_t i = 0; i < enc.step[k].gamma.size(); ++i) {
            name(enc.step[k].gamma[i], "g" + ks + "_" + std::to_string(i));
            for (int d = 0; d < n; ++d)
                name(enc.step[k].x_tilde[i][d], "xt" + ks + "_" + std::to_string(i) + "_" + std::to_string(d));
        }
        for (std::size_t l = 0; l < enc.nn[k].q.size(); ++l) {
            for (std::size_t j = 0; j < enc.nn[k].q[l].size(); ++j)
                name(enc.nn[k].q[l][j], "q" + ks + "_" + std::to_string(l + 1) + "_" + std::to_string(j));
            for (std::size_t j = 0; j < enc.nn[k].delta[l].size(); ++j)
                name(enc.nn[k].delta[l][j], "d" + ks + "_" + std::to_string(l + 1) + "_" + std::to_string(j));
        }
    }
    return enc;
}

namespace {

void write_terms(std::ostream& os, const std::vector<Term>& terms, const std::vector<std::string>& names)
{
    if (terms.empty()) {
        os << " 0 " << names.front();
        return;
    }
    for (const Term& t : terms)
        os << (t.coef < 0.0 ? " - " : " + ") << std::abs(t.coef) << ' ' << names[t.col];
}

}  // namespace

void write_lp_format(std::ostream& os, const EncodedSystem& enc)
{
    const LinearProgram& lp = enc.milp.lp;
    const auto old_precision = os.precision(17);
    os << "\\ closed-loop encoding, horizon " << enc.horizon << "\nMaximize\n obj:";
    std::vector<Term> obj;
    for (int j = 0; j < lp.num_variables(); ++j)
        if (lp.objective[j] != 0.0)
            obj.push_back({j, lp.objective[j]});
    write_terms(os, obj, enc.names);
    os << "\nSubject To\n";
    for (int i = 0; i < lp.num_rows(); ++i) {
        const Row& r = lp.rows[i];
        os << " c" << i << ':';
        write_terms(os, r.terms, enc.names);
        os << (r.sense == RowSense::LessEqual ? " <= " : r.sense == RowSense::Equal ? " = " : " >= ") << r.rhs << '\n';
    }
    os << "Bounds\n";
    for (int j = 0; j < lp.num_variables(); ++j) {
        const double lo = lp.lower[j], hi = lp.upper[j];
        if (lo == -kInf && hi == kInf)
            os << ' ' << enc.names[j] << " free\n";
        else {
            os << ' ';
            if (lo == -kInf)
                os << "-inf";
            else
                os << lo;
            os << " <= " << enc.names[j] << " <= ";
            if (hi == kInf)
                os << "+inf";
            else
                os << hi;
            os << '\n';
        }
    }
    os << "Binaries\n";
    for (int j : enc.milp.binaries)
        os << ' ' << enc.names[j] << '\n';
    os << "End\n";
    os.precision(old_precision);
}

}  // namespace pwacert
