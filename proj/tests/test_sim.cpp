#include "oracles.hpp"
#include "pwacert/error.hpp"
#include "pwacert/sim.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pwacert;
using testing::mat;
using testing::vec;

TEST_CASE("sim: origin is an equilibrium")
{
    const Model m = testing::fixture("case_study_saturated");
    const Trajectory t = rollout(m.sys, m.net, vec({0, 0}), 5);
    CHECK(t.length() == 5);
    for (const auto& x : t.states)
        CHECK(x.norm() == 0.0);
}

TEST_CASE("sim: two plant steps under a zero controller")
{
    const Model m = testing::fixture("case_study_zero");
    const Trajectory t = rollout(m.sys, m.net, vec({1, 1}), 2);
    REQUIRE(t.states.size() == 3);
    CHECK(t.states[1].isApprox(vec({-0.501, 0.202}), 1e-12));
    CHECK(t.regions[1] == 3);
    CHECK((t.states[2] - vec({0.14111, -0.325016})).norm() <= 1e-9);

    std::ostringstream os;
    write_trajectory_csv(os, t);
    CHECK(os.str().rfind("k,x0,x1,u0,region,branch", 0) == 0);
}

TEST_CASE("sim: leaving X halts the rollout")
{
    const Model m = testing::fixture("expansion");
    const Trajectory t = rollout(m.sys, m.net, vec({0.6}), 5);
    CHECK(t.left_X);
    CHECK(t.states.back()(0) == doctest::Approx(1.2));
    CHECK_THROWS_AS(rollout(m.sys, m.net, vec({3}), 2), Error);
}

TEST_CASE("sim: dual-mode rollouts switch inside the ellipsoid")
{
    const Model m = testing::fixture("deadzone");
    const DualModeController ctrl = m.dual_mode->controller(m.net, 0.05);
    const Trajectory t = rollout(m.sys, ctrl, vec({9}), 60);
    REQUIRE(t.length() == 60);
    for (int k = 0; k < t.length(); ++k)
        CHECK((t.branches[k] == Branch::Local) == ctrl.local_mode(t.states[k]));
    CHECK(std::abs(t.states.back()(0)) <= 1e-6);
}

TEST_CASE("sim: pattern enumeration")
{
    // |x| feedback through x+ = 0.5 x - u on [-1, 1]: successor 0.5 x - |x|.
    const PwaSystem sys = testing::scalar_system(0.5, -1.0);
    const MaxoutNet net = testing::abs_net();
    CHECK(pattern_count(sys, net) == 2.0);
    CHECK(pattern_enum_reach(sys, net, sys.X(), vec({1})) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(pattern_enum_reach(sys, net, sys.X(), vec({-1})) == doctest::Approx(1.5).epsilon(1e-9));

    const PwaSystem lin = testing::scalar_system(0.5, 1.0);
    const MaxoutNet affine({}, AffineLayer{mat({{-0.25}}), vec({0})});
    CHECK(pattern_count(lin, affine) == 1.0);
    CHECK(pattern_enum_reach(lin, affine, lin.X(), vec({1})) == doctest::Approx(0.25).epsilon(1e-9));

    CHECK_THROWS_AS(pattern_enum_reach(sys, net, sys.X(), vec({1}), 1), Error);
    CHECK_THROWS_AS(pattern_enum_reach(sys, net, Polytope::empty(1), vec({1})), Error);
}

TEST_CASE("sim: invariance audit")
{
    const Model dz = testing::fixture("deadzone");
    const AuditReport clean = grid_audit(dz.sys, dz.net, dz.sys.X(), 10000, 3);
    CHECK(clean.samples == 10000);
    CHECK(clean.clean());

    const Model ex = testing::fixture("expansion");
    CHECK_FALSE(grid_audit(ex.sys, ex.net, ex.sys.X(), 1000, 3).clean());

    const AuditReport none = grid_audit(dz.sys, dz.net, Polytope::empty(1), 100, 3);
    CHECK(none.samples == 0);
    CHECK(none.clean());
}

TEST_CASE("sim: polytope samples")
{
    const Polytope tri(mat({{-1, 0}, {0, -1}, {1, 1}}), vec({0, 0, 1}));
    const auto pts = sample_polytope(tri, 500, 2);
    CHECK(pts.size() == 500);
    for (const auto& p : pts)
        CHECK(tri.contains_point(p));
    CHECK(sample_polytope(Polytope::empty(2), 10, 2).empty());
}
