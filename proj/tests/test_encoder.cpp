#include "oracles.hpp"
#include "pwacert/encoder.hpp"
#include "pwacert/error.hpp"
#include "pwacert/sim.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pwacert;
using testing::mat;
using testing::vec;

namespace {

std::vector<int> fixed_columns(MilpProblem& p, const Eigen::VectorXd& v)
{
    std::vector<int> cols;
    for (int i = 0; i < v.size(); ++i)
        cols.push_back(p.lp.add_variable(v(i), v(i)));
    return cols;
}

std::vector<int> free_columns(MilpProblem& p, int n)
{
    std::vector<int> cols;
    for (int i = 0; i < n; ++i)
        cols.push_back(p.lp.add_variable(-kInf, kInf));
    return cols;
}

Eigen::VectorXd values(const MilpSolution& s, const std::vector<int>& cols)
{
    Eigen::VectorXd v(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i)
        v(i) = s.x(cols[i]);
    return v;
}

/// Successor forced by the one-step encoding at fixed (x, u).
Eigen::VectorXd encoded_successor(const PwaSystem& sys, const BigMConfig& cfg, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u, std::vector<double>* gamma = nullptr)
{
    MilpProblem p;
    const auto xc = fixed_columns(p, x);
    const auto uc = fixed_columns(p, u);
    const auto next = free_columns(p, sys.state_dim());
    const auto g = encode_region_selection(p, sys, cfg, xc, uc);
    encode_pwa_step(p, sys, cfg, xc, uc, g, next);
    const MilpSolution s = find_feasible(p);
    REQUIRE(s.status == MilpStatus::Optimal);
    if (gamma)
        for (int c : g)
            gamma->push_back(s.x(c));
    return values(s, next);
}

/// Largest value of the relaxed expression H_r (x,u) - h_r over a grid of the box.
double grid_row_excess(const Eigen::RowVectorXd& a, double h, const BigMConfig& cfg)
{
    Eigen::VectorXd lo(cfg.x_lo.size() + cfg.u_lo.size()), hi(lo.size());
    lo << cfg.x_lo, cfg.u_lo;
    hi << cfg.x_hi, cfg.u_hi;
    return oracle::grid_max(a.transpose(), -h, lo, hi, 21);
}

}  // namespace

TEST_CASE("encoder: constants for a scalar integrator")
{
    const PwaSystem sys = testing::scalar_system(1.0, 1.0);
    const BigMConfig cfg = derive_big_m(sys, testing::zero_net(1, 1));
    CHECK(cfg.dyn_m[0](0) >= 2.0);
    CHECK(cfg.dyn_m[0](0) <= 2.0 + 1e-6);
    CHECK_NOTHROW(cfg.validate(sys, testing::zero_net(1, 1)));
}

TEST_CASE("encoder: interval bounds of |x|")
{
    const auto b = propagate_bounds(testing::abs_net(), vec({-1}), vec({1}));
    REQUIRE(b.size() == 1);
    CHECK(b[0].out_lo(0) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(b[0].out_hi(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(b[0].out_lo(0) <= 0.0);
    CHECK(b[0].out_hi(0) >= 1.0);
}

TEST_CASE("encoder: case-study constants match a grid maximization")
{
    const Model m = testing::fixture("case_study_zero");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);
    for (int i = 0; i < m.sys.region_count(); ++i) {
        const Polytope& cell = m.sys.region(i).cell;
        for (int r = 0; r < cell.num_constraints(); ++r) {
            const double grid = std::max(0.0, grid_row_excess(cell.H().row(r), cell.h()(r), cfg));
            CHECK(cfg.region_m[i](r) >= grid - 1e-9);
            CHECK(cfg.region_m[i](r) <= 1.05 * grid + 1e-6);
        }
        const PwaRegion& reg = m.sys.region(i);
        for (int d = 0; d < m.sys.state_dim(); ++d) {
            Eigen::RowVectorXd a(3);
            a << reg.A.row(d), reg.B.row(d);
            const double grid = std::max(grid_row_excess(a, -reg.p(d), cfg), grid_row_excess(-a, reg.p(d), cfg));
            CHECK(cfg.dyn_m[i](d) >= grid - 1e-9);
            CHECK(cfg.dyn_m[i](d) <= 1.05 * grid + 1e-6);
        }
    }
}

TEST_CASE("encoder: unbounded domains are rejected")
{
    const PwaRegion reg{mat({{0.5}}), mat({{0.0}}), vec({0}), Polytope(mat({{1, 0}}), vec({1e6}))};
    const PwaSystem sys({reg}, Polytope(mat({{1}}), vec({1})), Polytope::box(1, 1.0));
    CHECK_THROWS_AS(derive_big_m(sys, testing::zero_net(1, 1)), Error);
}

TEST_CASE("encoder: region selection")
{
    const Model m = testing::fixture("case_study_zero");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);

    std::vector<double> g;
    encoded_successor(m.sys, cfg, vec({-2, 3}), vec({0}), &g);
    const int expected = *m.sys.find_region(vec({-2, 3}), vec({0}));
    for (int i = 0; i < 4; ++i)
        CHECK(g[i] == doctest::Approx(i == expected ? 1.0 : 0.0));

    // On the boundary x1 = 0 both neighbouring cells are admissible; each
    // forced choice must be feasible and give that cell's successor.
    const Eigen::VectorXd xb = vec({0, 2});
    std::vector<int> admissible;
    for (int i = 0; i < 4; ++i)
        if (m.sys.region(i).cell.contains_point(vec({0, 2, 0})))
            admissible.push_back(i);
    CHECK(admissible.size() == 2);
    for (int i : admissible) {
        MilpProblem p;
        const auto xc = fixed_columns(p, xb);
        const auto uc = fixed_columns(p, vec({0}));
        const auto next = free_columns(p, 2);
        const auto gamma = encode_region_selection(p, m.sys, cfg, xc, uc);
        encode_pwa_step(p, m.sys, cfg, xc, uc, gamma, next);
        p.lp.lower[gamma[i]] = 1.0;
        const MilpSolution s = find_feasible(p);
        REQUIRE(s.status == MilpStatus::Optimal);
        const PwaRegion& r = m.sys.region(i);
        CHECK((values(s, next) - (r.A * xb)).norm() <= 1e-6);
    }

    // A single region is always selected.
    const PwaSystem one = testing::scalar_system(0.5, 0.0);
    std::vector<double> g1;
    encoded_successor(one, derive_big_m(one, testing::zero_net(1, 1)), vec({0.3}), vec({0.2}), &g1);
    CHECK(g1[0] == doctest::Approx(1.0));
}

TEST_CASE("encoder: one step reproduces the plant")
{
    const Model m = testing::fixture("case_study_zero");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);
    CHECK((encoded_successor(m.sys, cfg, vec({1, 1}), vec({0})) - vec({-0.501, 0.202})).norm() <= 1e-6);
    CHECK(encoded_successor(m.sys, cfg, vec({0, 0}), vec({0})).norm() <= 1e-6);

    oracle::Rng rng(41);
    for (int t = 0; t < 500; ++t) {
        const Eigen::VectorXd x = vec({oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10)});
        const Eigen::VectorXd u = vec({oracle::uniform(rng, -1, 1)});
        CHECK((encoded_successor(m.sys, cfg, x, u) - eval_pwa(m.sys, x, u)).norm() <= 1e-6);
    }
}

TEST_CASE("encoder: network encoding reproduces the forward pass")
{
    auto encoded_output = [](const MaxoutNet& net, const Eigen::VectorXd& x, NnVars* vars = nullptr,
                             Eigen::VectorXd* sol = nullptr) {
        const int n = static_cast<int>(x.size());
        BigMConfig cfg;
        cfg.x_lo = -Eigen::VectorXd::Constant(n, 5.0);
        cfg.x_hi = Eigen::VectorXd::Constant(n, 5.0);
        cfg.layers = propagate_bounds(net, cfg.x_lo, cfg.x_hi);
        MilpProblem p;
        const auto in = fixed_columns(p, x);
        const auto out = free_columns(p, net.output_dim());
        NnVars v = encode_nn(p, net, cfg, in, out);
        const MilpSolution s = find_feasible(p);
        REQUIRE(s.status == MilpStatus::Optimal);
        if (vars)
            *vars = v;
        if (sol)
            *sol = s.x;
        return values(s, out);
    };

    CHECK(encoded_output(testing::abs_net(), vec({-3}))(0) == doctest::Approx(3.0));

    // One channel per neuron: every delta is forced to one.
    const MaxoutNet affine({MaxoutLayer{mat({{1, 2}, {-1, 0.5}}), vec({0.1, -0.2}), 1}},
                           AffineLayer{mat({{1, -1}}), vec({0.3})});
    NnVars vars;
    Eigen::VectorXd sol;
    const Eigen::VectorXd x = vec({0.7, -1.1});
    CHECK(encoded_output(affine, x, &vars, &sol)(0) == doctest::Approx(eval_nn(affine, x)(0)).epsilon(1e-9));
    for (int d : vars.delta[0])
        CHECK(sol(d) == doctest::Approx(1.0));

    oracle::Rng rng(43);
    for (int t = 0; t < 200; ++t) {
        const int n = oracle::uniform_int(rng, 1, 3);
        const MaxoutNet net = oracle::random_net(rng, n, oracle::uniform_int(rng, 1, 3), oracle::uniform_int(rng, 1, 3), 4, 3);
        Eigen::VectorXd xr(n);
        for (int j = 0; j < n; ++j)
            xr(j) = oracle::uniform(rng, -5, 5);
        CHECK((encoded_output(net, xr) - eval_nn(net, xr)).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
}

TEST_CASE("encoder: closed-loop trajectories")
{
    const Model m = testing::fixture("case_study_saturated");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);
    const int K = 5;
    const Eigen::VectorXd x0 = vec({1.5, -2.0});
    const Trajectory traj = rollout(m.sys, m.net, x0, K);
    REQUIRE_FALSE(traj.left_X);
    const EncodedSystem enc = encode_closed_loop(m.sys, m.net, cfg, K, Polytope::box(x0, x0));
    CHECK(enc.binaries_per_step() == m.sys.region_count() + m.net.channel_count());
    CHECK(static_cast<int>(enc.milp.binaries.size()) == K * enc.binaries_per_step());
    const MilpSolution s = find_feasible(enc.milp);
    REQUIRE(s.status == MilpStatus::Optimal);
    for (int k = 0; k <= K; ++k)
        CHECK((values(s, enc.x[k]) - traj.states[k]).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(enc.milp.lp.max_violation(oracle::complete_assignment(enc, m.sys, m.net, traj)) <= 1e-6);

    // Whole X with a zero controller: every successor is a plant step at u = 0.
    const Model z = testing::fixture("case_study_zero");
    const BigMConfig zc = derive_big_m(z.sys, z.net);
    const EncodedSystem one = encode_closed_loop(z.sys, z.net, zc, 1, z.sys.X());
    oracle::Rng rng(47);
    for (int t = 0; t < 50; ++t) {
        const Eigen::VectorXd x = vec({oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10)});
        MilpProblem p = one.milp;
        for (int d = 0; d < 2; ++d)
            p.lp.lower[one.x[0][d]] = p.lp.upper[one.x[0][d]] = x(d);
        const MilpSolution r = find_feasible(p);
        REQUIRE(r.status == MilpStatus::Optimal);
        CHECK((values(r, one.x[1]) - eval_pwa(z.sys, x, vec({0}))).norm() <= 1e-6);
    }

    const EncodedSystem empty = encode_closed_loop(z.sys, z.net, zc, 2, Polytope::empty(2));
    CHECK(find_feasible(empty.milp).status == MilpStatus::Infeasible);
}

TEST_CASE("encoder: LP file export")
{
    const PwaSystem sys = testing::scalar_system(0.5, 1.0);
    const MaxoutNet net = testing::abs_net();
    const EncodedSystem enc = encode_closed_loop(sys, net, derive_big_m(sys, net), 1, sys.X());
    std::ostringstream os;
    write_lp_format(os, enc);
    const std::string text = os.str();
    for (const char* section : {"Maximize", "Subject To", "Bounds", "Binaries", "End"})
        CHECK(text.find(section) != std::string::npos);
    CHECK(text.find("x0_0") != std::string::npos);
    CHECK(text.find("x1_0") != std::string::npos);
}

TEST_CASE("encoder: manual constants are validated")
{
    const PwaSystem sys = testing::scalar_system(0.5, 1.0);
    const MaxoutNet net = testing::zero_net(1, 1);
    BigMConfig cfg = derive_big_m(sys, net);
    cfg.mode = BigMConfig::Mode::Manual;
    cfg.dyn_m[0](0) = -1.0;
    CHECK_THROWS_AS(cfg.validate(sys, net), Error);
    cfg = derive_big_m(sys, net);
    cfg.region_m.clear();
    CHECK_THROWS_AS(cfg.validate(sys, net), Error);
}
