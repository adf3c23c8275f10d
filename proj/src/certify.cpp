#include "pwacert/certify.hpp"

#include "pwacert/milp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pwacert {

const Check* Certificate::find_check(const std::string& name) const
{
    for (const Check& c : checks)
        if (c.name == name)
            return &c;
    return nullptr;
}

const char* to_string(Certificate::Kind kind)
{
    return kind == Certificate::Kind::UUB ? "UUB" : "Asymptotic";
}

namespace {

void require_conclusive(const ReachResult& r, const char* stage)
{
    if (!r.conclusive)
        throw Error(r.failure.value_or(ErrorCode::Inconclusive), std::string(stage) + ": " + r.message);
}

Check make_check(std::string name, double residual, double tolerance, bool sampled = false)
{
    return {std::move(name), residual <= tolerance, residual, tolerance, sampled};
}

// Same geometric test as compute_fmin, on a given set.
double shrink_residual(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Polytope& S,
                       const Template& tmpl, double epsilon_shrink, const ReachOptions& options)
{
    const Polytope shrunk = scale(S, 1.0 / (1.0 + epsilon_shrink));
    const ReachResult T = overapprox_reach(sys, net, cfg, 1, shrunk, tmpl, options);
    require_conclusive(T, "shrink condition");
    return containment_residual(T.set, shrunk);
}

// Sampled checks on s F0 shared by certification and replay.
std::vector<Check> local_mode_checks(const PwaSystem& sys, const DualModeController& ctrl, double s,
                                     const CertifyLimits& limits)
{
    const std::vector<int> origin = sys.origin_regions();
    const std::vector<Eigen::VectorXd> samples =
        sample_ellipsoid(ctrl.ellipsoid, s, limits.lyapunov_samples, limits.seed);

    double uncovered = 0.0;
    double u_excess = -kInf;
    double region_excess = -kInf;
    double decrease = -kInf;
    double no_region = 0.0;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.state_dim());
    const double kappa0 = ctrl.kappa.eval(zero).lpNorm<Eigen::Infinity>();
    for (const Eigen::VectorXd& x : samples) {
        if (!ctrl.kappa.find_piece(x)) {
            uncovered += 1.0;
            continue;
        }
        const Eigen::VectorXd u = ctrl.kappa.eval(x);
        u_excess = std::max(u_excess, (sys.U().H() * u - sys.U().h()).maxCoeff());
        Eigen::VectorXd xi(x.size() + u.size());
        xi << x, u;
        double best = kInf;
        for (int i : origin) {
            const PwaRegion& r = sys.region(i);
            best = std::min(best, (r.cell.H() * xi - r.cell.h()).maxCoeff());
        }
        region_excess = std::max(region_excess, best);
        const double V = ctrl.ellipsoid.quadratic(x);
        if (V <= 0.0)
            continue;
        const auto region = sys.find_region(x, u);
        if (!region) {
            no_region += 1.0;
            continue;
        }
        const PwaRegion& r = sys.region(*region);
        const Eigen::VectorXd next = r.A * x + r.B * u + r.p;
        decrease = std::max(decrease, (ctrl.ellipsoid.quadratic(next) - V) / V);
    }

    std::vector<Check> out;
    out.push_back(make_check("kappa_origin", kappa0, tol::kRegionMembership));
    out.push_back(make_check("kappa_cover", uncovered + no_region, 0.0, true));
    out.push_back(make_check("kappa_in_U", u_excess, tol::kSet, true));
    out.push_back(make_check("local_in_origin_regions", region_excess, tol::kRegionMembership, true));
    // Strict decrease of x'Sx along kappa, relative to x'Sx.
    Check lyap = make_check("lyapunov_decrease", decrease, 0.0, true);
    lyap.passed = decrease < 0.0;
    out.push_back(lyap);
    return out;
}

}  // namespace

PiCheck check_pi(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Polytope& F,
                 const Template& tmpl, const ReachOptions& options)
{
    PiCheck out;
    out.reach = overapprox_reach(sys, net, cfg, 1, F, tmpl, options);
    out.conclusive = out.reach.conclusive;
    if (!out.conclusive)
        return out;
    out.residual = containment_residual(F, out.reach.set);
    out.pi = out.residual <= tol::kSet;
    return out;
}

double input_admissibility_residual(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg,
                                    const MilpOptions& options)
{
    cfg.validate(sys, net);
    const int n = sys.state_dim();
    const int m = sys.input_dim();
    MilpProblem base;
    std::vector<int> x, u;
    for (int d = 0; d < n; ++d)
        x.push_back(base.lp.add_variable(cfg.x_lo(d), cfg.x_hi(d)));
    for (int d = 0; d < m; ++d)
        u.push_back(base.lp.add_variable(cfg.u_lo(d), cfg.u_hi(d)));
    for (int r = 0; r < sys.X().num_constraints(); ++r) {
        std::vector<Term> t;
        for (int d = 0; d < n; ++d)
            if (sys.X().H()(r, d) != 0.0)
                t.push_back({x[d], sys.X().H()(r, d)});
        base.lp.add_row(std::move(t), RowSense::LessEqual, sys.X().h()(r));
    }
    encode_nn(base, net, cfg, x, u);

    double worst = -kInf;
    for (int r = 0; r < sys.U().num_constraints(); ++r) {
        MilpProblem p = base;
        for (int d = 0; d < m; ++d)
            p.lp.objective[u[d]] = sys.U().H()(r, d);
        const MilpSolution s = solve_milp(p, options);
        if (s.status == MilpStatus::NodeLimitExceeded)
            throw Error(ErrorCode::Inconclusive, "input admissibility MILP stopped at the node limit");
        if (s.status == MilpStatus::Infeasible)
            throw Error(ErrorCode::EmptySet, "X is empty");
        worst = std::max(worst, s.bound - sys.U().h()(r));
    }
    return worst;
}

FmaxResult compute_fmax(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Template& tmpl,
                        int iter_limit, const ReachOptions& options)
{
    if (!is_bounded(sys.X()))
        throw Error(ErrorCode::UnboundedDomain, "X must be bounded");
    FmaxResult out;
    out.F = sys.X();
    while (true) {
        const ReachResult R = overapprox_reach(sys, net, cfg, 1, out.F, tmpl, options);
        require_conclusive(R, "F_max iteration");
        if (contains(out.F, R.set, tol::kSet))
            return out;
        if (out.iterations >= iter_limit)
            throw Error(ErrorCode::NotConverged,
                        "no invariant set after " + std::to_string(iter_limit) + " iterations");
        Polytope next = intersect(R.set, sys.X());
        if (next.is_empty())
            throw Error(ErrorCode::EmptyResult, "the iteration collapsed to the empty set");
        if (contains(next, out.F, tol::kSet) && contains(out.F, next, tol::kSet))
            throw Error(ErrorCode::NotConverged, "the iteration stagnated without reaching an invariant set");
        out.F = std::move(next);
        ++out.iterations;
    }
}

double shrink_tolerance(const Polytope& S)
{
    double radius = 0.0;
    for (int i = 0; i < S.num_constraints(); ++i)
        radius = std::max(radius, std::abs(S.h()(i)) / S.H().row(i).norm());
    return tol::kSet * std::min(1.0, radius);
}

FminResult compute_fmin(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Polytope& F_max,
                        const Template& tmpl, double epsilon_shrink, int k_limit, const ReachOptions& options)
{
    if (!(epsilon_shrink > 0.0))
        throw Error(ErrorCode::InvalidModel, "epsilon_shrink must be positive");
    Polytope S = F_max;
    for (int k = 1; k <= k_limit; ++k) {
        const ReachResult R = overapprox_reach(sys, net, cfg, 1, S, tmpl, options);
        require_conclusive(R, "F_min iteration");
        S = R.set;
        const double residual = shrink_residual(sys, net, cfg, S, tmpl, epsilon_shrink, options);
        const double tolerance = shrink_tolerance(S);
        if (residual <= tolerance)
            return {S, k, residual, tolerance};
    }
    throw Error(ErrorCode::KLimitExceeded,
                "shrink condition not met within " + std::to_string(k_limit) + " steps");
}

Certificate certify_uub(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, const Template& tmpl,
                        double epsilon_shrink, const CertifyLimits& limits)
{
    Certificate cert;
    cert.kind = Certificate::Kind::UUB;
    cert.template_directions = tmpl.C();
    cert.epsilon_shrink = epsilon_shrink;
    cert.seed = limits.seed;
    try {
        const double adm = input_admissibility_residual(sys, net, cfg, limits.reach.milp);
        cert.checks.push_back(make_check("input_admissible", adm, tol::kSet));
        if (adm > tol::kSet)
            throw Error(ErrorCode::PreconditionFailed, "the network leaves U on X");

        const FmaxResult fmax = compute_fmax(sys, net, cfg, tmpl, limits.iter_limit, limits.reach);
        cert.F_max = fmax.F;
        cert.fmax_iterations = fmax.iterations;
        const PiCheck pmax = check_pi(sys, net, cfg, cert.F_max, tmpl, limits.reach);
        if (!pmax.conclusive)
            throw Error(pmax.reach.failure.value_or(ErrorCode::Inconclusive), "F_max replay: " + pmax.reach.message);
        cert.checks.push_back(make_check("fmax_pi", pmax.residual, tol::kSet));
        cert.checks.push_back(make_check("fmax_in_X", containment_residual(sys.X(), cert.F_max), tol::kSet));

        const FminResult fmin =
            compute_fmin(sys, net, cfg, cert.F_max, tmpl, epsilon_shrink, limits.k_limit, limits.reach);
        cert.F_min = fmin.F;
        cert.k_star = fmin.k_star;
        cert.checks.push_back(make_check("fmin_shrink", fmin.residual, fmin.tolerance));
        const PiCheck pmin = check_pi(sys, net, cfg, cert.F_min, tmpl, limits.reach);
        if (!pmin.conclusive)
            throw Error(pmin.reach.failure.value_or(ErrorCode::Inconclusive), "F_min replay: " + pmin.reach.message);
        cert.checks.push_back(make_check("fmin_pi", pmin.residual, tol::kSet));
        cert.checks.push_back(make_check("fmin_in_fmax", containment_residual(cert.F_max, cert.F_min), tol::kSet));
    } catch (const Error& e) {
        cert.failure = e.code();
        cert.message = e.what();
    }
    cert.conclusive = !cert.failure && std::all_of(cert.checks.begin(), cert.checks.end(),
                                                   [](const Check& c) { return c.passed; });
    if (!cert.conclusive && !cert.failure) {
        cert.failure = ErrorCode::Inconclusive;
        cert.message = "a certificate check failed";
    }
    return cert;
}

Certificate certify_asymptotic(const PwaSystem& sys, const DualModeController& ctrl, const Certificate& cert_uub,
                               const CertifyLimits& limits)
{
    Certificate cert = cert_uub;
    cert.kind = Certificate::Kind::Asymptotic;
    cert.seed = limits.seed;
    cert.conclusive = false;
    if (!cert_uub.conclusive) {
        cert.failure = ErrorCode::PreconditionFailed;
        cert.message = "the boundedness certificate is not conclusive";
        return cert;
    }
    try {
        if (ctrl.ellipsoid.dim() != sys.state_dim())
            throw Error(ErrorCode::DimensionMismatch, "ellipsoid dimension differs from the state dimension");
        const double s = min_cover_scale(ctrl.ellipsoid, cert.F_min);
        cert.s_scale = s;
        cert.checks.push_back(make_check("scale_le_one", s - 1.0, 0.0));
        if (s > 1.0)
            throw Error(ErrorCode::ScaleExceedsOne,
                        "F_min needs scale " + std::to_string(s) + " of the local ellipsoid");
        if (!(s > 0.0))
            throw Error(ErrorCode::PreconditionFailed, "F_min is a single point; the scale is zero");
        for (Check& c : local_mode_checks(sys, ctrl, s, limits)) {
            cert.checks.push_back(c);
            if (!c.passed)
                throw Error(c.name == "lyapunov_decrease" ? ErrorCode::LyapunovCheckFailed
                                                          : ErrorCode::PreconditionFailed,
                            "check " + c.name + " failed (residual " + std::to_string(c.residual) + ")");
        }
    } catch (const Error& e) {
        cert.failure = e.code();
        cert.message = e.what();
        return cert;
    }
    cert.failure.reset();
    cert.message.clear();
    cert.conclusive = true;
    return cert;
}

VerifyReport verify_certificate(const PwaSystem& sys, const MaxoutNet& net, const Certificate& cert,
                                const DualModeController* ctrl, const CertifyLimits& limits)
{
    VerifyReport rep;
    auto add = [&](Check c) { rep.checks.push_back(std::move(c)); };
    add(make_check("stored_conclusive", cert.conclusive ? 0.0 : 1.0, 0.0));
    add(make_check("k_star_positive", cert.k_star >= 1 ? 0.0 : 1.0, 0.0));
    try {
        if (cert.F_max.dim() != sys.state_dim() || cert.F_min.dim() != sys.state_dim() ||
            cert.template_directions.cols() != sys.state_dim())
            throw Error(ErrorCode::DimensionMismatch, "certificate sets do not match the model dimension");
        const Template tmpl(cert.template_directions);
        const BigMConfig cfg = derive_big_m(sys, net);

        add(make_check("input_admissible", input_admissibility_residual(sys, net, cfg, limits.reach.milp), tol::kSet));
        add(make_check("fmax_in_X", containment_residual(sys.X(), cert.F_max), tol::kSet));
        const PiCheck pmax = check_pi(sys, net, cfg, cert.F_max, tmpl, limits.reach);
        add(make_check("fmax_pi", pmax.conclusive ? pmax.residual : kInf, tol::kSet));
        add(make_check("fmin_in_fmax", containment_residual(cert.F_max, cert.F_min), tol::kSet));
        const PiCheck pmin = check_pi(sys, net, cfg, cert.F_min, tmpl, limits.reach);
        add(make_check("fmin_pi", pmin.conclusive ? pmin.residual : kInf, tol::kSet));
        add(make_check("fmin_shrink",
                       shrink_residual(sys, net, cfg, cert.F_min, tmpl, cert.epsilon_shrink, limits.reach),
                       shrink_tolerance(cert.F_min)));

        // Recompute the k*-fold iterate from F_max and compare with the stored F_min.
        double mismatch = kInf;
        if (cert.k_star >= 1) {
            const ReachResult it = iterate_reach(sys, net, cfg, cert.k_star, cert.F_max, tmpl, limits.reach);
            if (it.conclusive && it.set.num_constraints() == cert.F_min.num_constraints() &&
                (it.set.H() - cert.F_min.H()).cwiseAbs().maxCoeff() <= 1e-12) {
                mismatch = 0.0;
                for (int i = 0; i < it.set.num_constraints(); ++i)
                    mismatch = std::max(mismatch, std::abs(it.set.h()(i) - cert.F_min.h()(i)) /
                                                      (1.0 + std::abs(cert.F_min.h()(i))));
            }
        }
        add(make_check("fmin_replay", mismatch, tol::kSet));

        if (cert.kind == Certificate::Kind::Asymptotic) {
            if (!ctrl)
                throw Error(ErrorCode::InvalidModel, "asymptotic certificate needs the dual-mode section of the model");
            const double s = min_cover_scale(ctrl->ellipsoid, cert.F_min);
            add(make_check("scale_replay", std::abs(s - cert.s_scale) / (1.0 + s), 1e-9));
            add(make_check("scale_le_one", s - 1.0, 0.0));
            CertifyLimits sampled = limits;
            sampled.seed = cert.seed;
            for (Check& c : local_mode_checks(sys, *ctrl, s, sampled))
                add(std::move(c));
        }
    } catch (const Error& e) {
        add({std::string("replay_error: ") + e.what(), false, kInf, 0.0, false});
    }
    rep.passed = std::all_of(rep.checks.begin(), rep.checks.end(), [](const Check& c) { return c.passed; });
    return rep;
}

}  // namespace pwacert
