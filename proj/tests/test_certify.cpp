#include "oracles.hpp"
#include "pwacert/certify.hpp"
#include "pwacert/error.hpp"
#include "pwacert/sim.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace pwacert;
using testing::mat;
using testing::vec;

namespace {

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("certify: invariance of the unit interval")
{
    const Model c = testing::fixture("contraction");
    const Model e = testing::fixture("expansion");
    const Polytope F = Polytope::box(1, 1.0);
    const PiCheck pc = check_pi(c.sys, c.net, derive_big_m(c.sys, c.net), F, Template::box(1));
    CHECK(pc.conclusive);
    CHECK(pc.pi);
    CHECK(pc.residual == doctest::Approx(-0.5));
    const PiCheck pe = check_pi(e.sys, e.net, derive_big_m(e.sys, e.net), F, Template::box(1));
    CHECK(pe.conclusive);
    CHECK_FALSE(pe.pi);
}

TEST_CASE("certify: maximal set of the contraction is X")
{
    const Model c = testing::fixture("contraction");
    const FmaxResult r = compute_fmax(c.sys, c.net, derive_big_m(c.sys, c.net), Template::box(1), 50);
    CHECK(r.iterations == 0);
    CHECK(r.F.H() == c.sys.X().H());
    CHECK(r.F.h() == c.sys.X().h());
}

TEST_CASE("certify: divergent plant never yields an invariant set")
{
    const Model e = testing::fixture("expansion");
    const BigMConfig cfg = derive_big_m(e.sys, e.net);
    const ErrorCode code = code_of([&] { compute_fmax(e.sys, e.net, cfg, Template::box(1), 50); });
    CHECK((code == ErrorCode::NotConverged || code == ErrorCode::EmptyResult));
    const Certificate cert = certify_uub(e.sys, e.net, cfg, Template::box(1), 1e-3);
    CHECK_FALSE(cert.conclusive);
    CHECK(cert.failure.has_value());
}

TEST_CASE("certify: pure contraction never meets the shrink condition")
{
    // S_k = [-2^-k, 2^-k]; the condition asks R1(S/1.1) = S/2.2 to contain S/1.1.
    const Model c = testing::fixture("contraction");
    const BigMConfig cfg = derive_big_m(c.sys, c.net);
    const ErrorCode code =
        code_of([&] { compute_fmin(c.sys, c.net, cfg, c.sys.X(), Template::box(1), 0.1, 30); });
    CHECK(code == ErrorCode::KLimitExceeded);
}

TEST_CASE("certify: shrink tolerance")
{
    CHECK(shrink_tolerance(Polytope::box(2, 5.0)) == doctest::Approx(1e-6));
    CHECK(shrink_tolerance(Polytope::box(2, 0.01)) == doctest::Approx(1e-8));
}

TEST_CASE("certify: dead-zone plant has a nonzero limit set")
{
    const Model m = testing::fixture("deadzone");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);
    const Certificate cert = certify_uub(m.sys, m.net, cfg, Template::box(1), 1e-3);
    REQUIRE(cert.conclusive);
    CHECK(cert.k_star >= 1);
    CHECK(cert.k_star <= 200);
    CHECK(contains(cert.F_max, cert.F_min));
    CHECK(check_pi(m.sys, m.net, cfg, cert.F_min, Template::box(1)).pi);
    for (const char* name : {"input_admissible", "fmax_pi", "fmax_in_X", "fmin_shrink", "fmin_pi", "fmin_in_fmax"}) {
        const Check* c = cert.find_check(name);
        REQUIRE(c != nullptr);
        CHECK(c->passed);
    }
    // The limit set contains the dead zone [-0.5, 0.5] of the controller.
    CHECK(cert.F_min.contains_point(vec({0.5}), 1e-6));
    CHECK(cert.F_min.contains_point(vec({-0.5}), 1e-6));

    const VerifyReport rep = verify_certificate(m.sys, m.net, cert);
    CHECK(rep.passed);

    Certificate tampered = cert;
    tampered.F_min = Polytope(cert.F_min.H(), cert.F_min.h().array() + 0.1);
    CHECK_FALSE(verify_certificate(m.sys, m.net, tampered).passed);
}

TEST_CASE("certify: network outside U is a precondition failure")
{
    const PwaSystem sys = testing::scalar_system(0.5, 0.0);
    const MaxoutNet twice({}, AffineLayer{mat({{2.0}}), vec({0})});
    const BigMConfig cfg = derive_big_m(sys, twice);
    CHECK(input_admissibility_residual(sys, twice, cfg) == doctest::Approx(1.0).epsilon(1e-9));
    const Certificate cert = certify_uub(sys, twice, cfg, Template::box(1), 1e-3);
    CHECK_FALSE(cert.conclusive);
    REQUIRE(cert.failure.has_value());
    CHECK(*cert.failure == ErrorCode::PreconditionFailed);
}

TEST_CASE("certify: asymptotic extension")
{
    const Model m = testing::fixture("deadzone");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);
    const Certificate uub = certify_uub(m.sys, m.net, cfg, Template::box(1), 1e-3);
    REQUIRE(uub.conclusive);

    const DualModeController ctrl = m.dual_mode->controller(m.net, 1.0);
    const Certificate as = certify_asymptotic(m.sys, ctrl, uub);
    REQUIRE(as.conclusive);
    CHECK(as.s_scale == doctest::Approx(min_cover_scale(ctrl.ellipsoid, uub.F_min)));
    CHECK(as.s_scale <= 1.0);
    DualModeController fitted = ctrl;
    fitted.s_scale = as.s_scale;
    CHECK(verify_certificate(m.sys, m.net, as, &fitted).passed);

    // A tiny ellipsoid cannot cover F_min.
    DualModeController small = ctrl;
    small.ellipsoid = Ellipsoid(mat({{1.0}}), 0.01);
    const Certificate bad = certify_asymptotic(m.sys, small, uub);
    CHECK_FALSE(bad.conclusive);
    REQUIRE(bad.failure.has_value());
    CHECK(*bad.failure == ErrorCode::ScaleExceedsOne);

    // A local law that pushes states outward fails the decrease check.
    DualModeController grow = ctrl;
    grow.kappa = PwaFeedback({FeedbackPiece{mat({{0.5}}), vec({0}), Polytope::box(1, 10.0)}});
    const Certificate g = certify_asymptotic(m.sys, grow, uub);
    CHECK_FALSE(g.conclusive);
    REQUIRE(g.failure.has_value());
    CHECK(*g.failure == ErrorCode::LyapunovCheckFailed);

    Certificate not_uub = uub;
    not_uub.conclusive = false;
    CHECK_FALSE(certify_asymptotic(m.sys, ctrl, not_uub).conclusive);
}

TEST_CASE("certify: unit-disk scale of a half box")
{
    // s for F_min = [-0.5, 0.5]^2 and S = I, level 1.
    const Ellipsoid disk(Eigen::MatrixXd::Identity(2, 2), 1.0);
    CHECK(min_cover_scale(disk, Polytope::box(2, 0.5)) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("certify: injected node limits are never certified")
{
    const Model m = testing::fixture("deadzone");
    const BigMConfig cfg = derive_big_m(m.sys, m.net);
    CertifyLimits limits;
    limits.reach.milp.injector = std::make_shared<NodeLimitInjector>();
    const Certificate clean = certify_uub(m.sys, m.net, cfg, Template::box(1), 1e-3, limits);
    REQUIRE(clean.conclusive);
    const long calls = limits.reach.milp.injector->calls.load();
    REQUIRE(calls > 0);
    for (long i = 0; i < calls; i += 7) {
        limits.reach.milp.injector = std::make_shared<NodeLimitInjector>();
        limits.reach.milp.injector->fire_at = i;
        const Certificate c = certify_uub(m.sys, m.net, cfg, Template::box(1), 1e-3, limits);
        CAPTURE(i);
        CHECK_FALSE(c.conclusive);
    }
}
