// Command-line front end: certify, reach, simulate, verify.
//
// Exit codes: 0 success, 1 usage error, 2 invalid model or input file,
// 3 inconclusive or failed check, 4 solver node limit.

#include "pwacert/certify.hpp"
#include "pwacert/error.hpp"
#include "pwacert/io.hpp"
#include "pwacert/reach.hpp"
#include "pwacert/sim.hpp"
#include "pwacert/tolerances.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pwacert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitLimit = 4;

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidModel:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::BoxInvalid:
    case ErrorCode::UnboundedDomain:
    case ErrorCode::NonPositiveScale:
        return kExitInvalid;
    case ErrorCode::NodeLimitExceeded:
        return kExitLimit;
    default:
        return kExitInconclusive;
    }
}

struct CommonFlags {
    std::string model;
    std::string out = ".";
    std::string template_arg;
    long node_limit = -1;
    int threads = 0;
};

json tolerances_json()
{
    return {{"primal_feasibility", tol::kPrimalFeasibility},
            {"optimality", tol::kOptimality},
            {"integrality", tol::kIntegrality},
            {"gap_abs", tol::kGapAbs},
            {"set", tol::kSet},
            {"region_membership", tol::kRegionMembership}};
}

void write_manifest(const std::string& dir, const std::string& command, const json& inputs, std::uint64_t seed,
                    const json& outputs)
{
    json m;
    m["tool"] = "pwacert";
    m["version"] = PWACERT_VERSION;
    m["command"] = command;
    m["inputs"] = inputs;
    m["seed"] = seed;
    m["threads"] = default_thread_count();
    m["tolerances"] = tolerances_json();
    m["outputs"] = outputs;
    write_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

Template resolve_template(const Model& model, const std::string& arg)
{
    const int n = model.sys.state_dim();
    if (arg.empty())
        return model.options.make_template(n);
    if (arg == "box")
        return Template::box(n);
    if (arg == "oct")
        return Template::octagonal(n);
    // Otherwise a file holding a direction matrix, bare or under "C".
    json j;
    try {
        j = json::parse(read_file(arg));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, arg + ": " + e.what());
    }
    const json& C = j.is_object() ? j.at("C") : j;
    ModelOptions o;
    o.template_kind = "matrix";
    o.template_matrix.resize(C.size(), n);
    for (std::size_t r = 0; r < C.size(); ++r) {
        if (!C[r].is_array() || static_cast<int>(C[r].size()) != n)
            throw Error(ErrorCode::ParseError, arg + ": template row " + std::to_string(r) + " must have n entries");
        for (int c = 0; c < n; ++c)
            o.template_matrix(r, c) = C[r][c].get<double>();
    }
    return o.make_template(n);
}

ReachOptions reach_options(const Model& model, const CommonFlags& f)
{
    ReachOptions r;
    r.milp.node_limit = f.node_limit >= 0 ? f.node_limit : model.options.node_limit;
    r.threads = f.threads;
    return r;
}

void print_checks(const std::vector<Check>& checks)
{
    for (const Check& c : checks)
        std::cout << "  " << (c.passed ? "pass" : "FAIL") << "  " << c.name << "  residual " << c.residual
                  << "  tol " << c.tolerance << (c.sampled ? "  (sampled)" : "") << '\n';
}

int run_certify(const CommonFlags& f, bool asymptotic, double epsilon, int kmax, int iter_limit, long seed)
{
    const Model model = load_model(f.model);
    if (asymptotic && !model.dual_mode)
        throw Error(ErrorCode::InvalidModel, f.model + ": --asymptotic needs a dual_mode section");
    const Template tmpl = resolve_template(model, f.template_arg);
    CertifyLimits limits;
    limits.reach = reach_options(model, f);
    limits.k_limit = kmax > 0 ? kmax : model.options.k_limit;
    limits.iter_limit = iter_limit > 0 ? iter_limit : model.options.iter_limit;
    limits.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : model.options.seed;
    const double eps = epsilon > 0.0 ? epsilon : model.options.epsilon_shrink;

    const BigMConfig cfg = derive_big_m(model.sys, model.net);
    Certificate cert = certify_uub(model.sys, model.net, cfg, tmpl, eps, limits);
    if (asymptotic) {
        const DualModeController ctrl = model.dual_mode->controller(model.net, 1.0);
        cert = certify_asymptotic(model.sys, ctrl, cert, limits);
    }

    fs::create_directories(f.out);
    const std::string cert_path = (fs::path(f.out) / "certificate.json").string();
    write_file(cert_path, to_json(cert, model.fingerprint).dump(2) + "\n");
    write_manifest(f.out, asymptotic ? "certify --asymptotic" : "certify --uub",
                   {{"model", f.model}, {"fingerprint", model.fingerprint}, {"epsilon_shrink", eps},
                    {"template_rows", tmpl.size()}},
                   limits.seed, {cert_path});

    std::cout << "certificate: " << cert_path << '\n'
              << "kind " << to_string(cert.kind) << ", conclusive " << (cert.conclusive ? "yes" : "no")
              << ", F_max iterations " << cert.fmax_iterations << ", k* " << cert.k_star;
    if (asymptotic)
        std::cout << ", s " << cert.s_scale;
    std::cout << '\n';
    print_checks(cert.checks);
    if (cert.conclusive)
        return kExitOk;
    std::cerr << "inconclusive: " << cert.message << '\n';
    // A stage stopped by the node limit is reported as an internal limit.
    if (cert.failure == ErrorCode::Inconclusive && cert.message.find("node limit") != std::string::npos)
        return kExitLimit;
    return kExitInconclusive;
}

int run_reach(const CommonFlags& f, int k, const std::string& from)
{
    const Model model = load_model(f.model);
    const Template tmpl = resolve_template(model, f.template_arg);
    const Polytope start = from.empty() ? model.sys.X() : load_set(from);
    if (start.dim() != model.sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, from + ": set dimension differs from the model");
    if (!contains(model.sys.X(), start, tol::kSet))
        throw Error(ErrorCode::InvalidModel, from + ": initial set is not contained in X");
    const BigMConfig cfg = derive_big_m(model.sys, model.net);
    const ReachResult r = iterate_reach(model.sys, model.net, cfg, k, start, tmpl, reach_options(model, f));

    fs::create_directories(f.out);
    json doc = to_json(r, tmpl, k);
    doc["model_fingerprint"] = model.fingerprint;
    doc["from"] = to_json(start);
    const std::string json_path = (fs::path(f.out) / "reach.json").string();
    const std::string txt_path = (fs::path(f.out) / "reach.txt").string();
    write_file(json_path, doc.dump(2) + "\n");
    std::ostringstream txt;
    write_reach_text(txt, r, tmpl);
    write_file(txt_path, txt.str());
    write_manifest(f.out, "reach", {{"model", f.model}, {"fingerprint", model.fingerprint}, {"from", from}, {"k", k}},
                   model.options.seed, {json_path, txt_path});

    std::cout << "reach set after " << r.steps << " step(s): " << json_path << '\n';
    for (int i = 0; i < tmpl.size(); ++i)
        std::cout << "  c[" << i << "] = " << r.optima(i) << '\n';
    if (r.conclusive)
        return kExitOk;
    std::cerr << "inconclusive: " << r.message << '\n';
    return r.failure == ErrorCode::Inconclusive ? kExitLimit : kExitInconclusive;
}

int run_simulate(const CommonFlags& f, const std::string& x0_text, int steps, const std::string& dual_cert)
{
    const Model model = load_model(f.model);
    const Eigen::VectorXd x0 = parse_vector(x0_text);
    if (x0.size() != model.sys.state_dim())
        throw Error(ErrorCode::DimensionMismatch, "--x0 has " + std::to_string(x0.size()) + " entries, expected " +
                                                      std::to_string(model.sys.state_dim()));
    if (!model.sys.X().contains_point(x0, tol::kDomain))
        throw Error(ErrorCode::InvalidModel, "--x0 lies outside X");

    Trajectory t;
    if (!dual_cert.empty()) {
        if (!model.dual_mode)
            throw Error(ErrorCode::InvalidModel, f.model + ": --dual-mode needs a dual_mode section");
        const StoredCertificate sc = load_certificate(dual_cert);
        if (sc.model_fingerprint != model.fingerprint)
            throw Error(ErrorCode::InvalidModel, dual_cert + ": certificate belongs to a different model");
        if (sc.cert.kind != Certificate::Kind::Asymptotic || !sc.cert.conclusive)
            throw Error(ErrorCode::Inconclusive, dual_cert + ": not a conclusive asymptotic certificate");
        t = rollout(model.sys, model.dual_mode->controller(model.net, sc.cert.s_scale), x0, steps);
    } else {
        t = rollout(model.sys, model.net, x0, steps);
    }

    fs::create_directories(f.out);
    const std::string path = (fs::path(f.out) / "trajectory.csv").string();
    std::ostringstream csv;
    write_trajectory_csv(csv, t);
    write_file(path, csv.str());
    write_manifest(f.out, "simulate",
                   {{"model", f.model}, {"fingerprint", model.fingerprint}, {"x0", x0_text}, {"steps", steps},
                    {"dual_mode", dual_cert}},
                   model.options.seed, {path});
    std::cout << "trajectory: " << path << " (" << t.length() << " steps)\n";
    if (t.left_X) {
        std::cerr << "state left X at step " << t.length() << '\n';
        return kExitInconclusive;
    }
    return kExitOk;
}

int run_verify(const std::string& cert_path, const std::string& model_path, int threads)
{
    const Model model = load_model(model_path);
    json doc;
    try {
        doc = json::parse(read_file(cert_path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, cert_path + ": " + e.what());
    }
    ReachOptions ropts;
    ropts.threads = threads;

    if (doc.is_object() && doc.value("format", "") == "pwacert-reach") {
        if (doc.value("model_fingerprint", "") != model.fingerprint)
            throw Error(ErrorCode::InvalidModel, cert_path + ": reach file belongs to a different model");
        const Polytope stored = polytope_from_json({{"H", doc.at("template")}, {"h", doc.at("optima")}}, "reach");
        const Polytope from = polytope_from_json(doc.at("from"), "from");
        const Template tmpl(stored.H());
        const int k = doc.at("k").get<int>();
        const BigMConfig cfg = derive_big_m(model.sys, model.net);
        const ReachResult r = iterate_reach(model.sys, model.net, cfg, k, from, tmpl, ropts);
        double diff = r.conclusive ? 0.0 : kInf;
        for (int i = 0; r.conclusive && i < stored.num_constraints(); ++i)
            diff = std::max(diff, std::abs(r.optima(i) - stored.h()(i)));
        const bool ok = diff <= 1e-9;
        std::cout << (ok ? "pass" : "FAIL") << "  reach_replay  max difference " << diff << '\n';
        return ok ? kExitOk : kExitInconclusive;
    }

    StoredCertificate sc;
    try {
        sc = certificate_from_json(doc);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, cert_path + ": " + e.what());
    }
    if (sc.model_fingerprint != model.fingerprint)
        throw Error(ErrorCode::InvalidModel, cert_path + ": certificate belongs to a different model (fingerprint " +
                                                 sc.model_fingerprint + ", model " + model.fingerprint + ")");
    std::optional<DualModeController> ctrl;
    if (sc.cert.kind == Certificate::Kind::Asymptotic) {
        if (!model.dual_mode)
            throw Error(ErrorCode::InvalidModel, model_path + ": asymptotic certificate needs a dual_mode section");
        ctrl = model.dual_mode->controller(model.net, sc.cert.s_scale);
    }
    CertifyLimits limits;
    limits.reach = ropts;
    const VerifyReport rep = verify_certificate(model.sys, model.net, sc.cert, ctrl ? &*ctrl : nullptr, limits);
    print_checks(rep.checks);
    std::cout << (rep.passed ? "certificate verified" : "certificate REJECTED") << '\n';
    return rep.passed ? kExitOk : kExitInconclusive;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reachability-based certification of piecewise-affine systems under maxout network control"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(PWACERT_VERSION));

    CommonFlags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("model", flags.model, "Model file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
        sub->add_option("--template", flags.template_arg, "box, oct, or a JSON file with a direction matrix");
        sub->add_option("--node-limit", flags.node_limit, "Branch-and-bound node limit per MILP (0 = none)");
        sub->add_option("--threads", flags.threads, "Worker threads per reach call (default: PWACERT_THREADS or 1)");
    };

    CLI::App* certify = app.add_subcommand("certify", "Compute and store a boundedness or asymptotic certificate");
    add_common(certify);
    bool uub = false, asym = false;
    double epsilon = 0.0;
    int kmax = 0, iter_limit = 0;
    long seed = -1;
    auto* uub_flag = certify->add_flag("--uub", uub, "Uniform ultimate boundedness (default)");
    certify->add_flag("--asymptotic", asym, "Dual-mode asymptotic stability")->excludes(uub_flag);
    certify->add_option("--epsilon", epsilon, "Shrink slack epsilon (model default 1e-3)");
    certify->add_option("--kmax", kmax, "Maximum number of reach steps for F_min");
    certify->add_option("--iter-limit", iter_limit, "Maximum F_max iterations");
    certify->add_option("--seed", seed, "Seed for sampled checks");

    CLI::App* reach = app.add_subcommand("reach", "Over-approximate the k-step reachable set");
    add_common(reach);
    int k = 1;
    std::string from;
    reach->add_option("--k", k, "Number of steps")->check(CLI::PositiveNumber)->capture_default_str();
    reach->add_option("--from", from, "Initial set file (default: X)")->check(CLI::ExistingFile);

    CLI::App* simulate = app.add_subcommand("simulate", "Roll out the closed loop and write a CSV trajectory");
    add_common(simulate);
    std::string x0;
    int steps = 50;
    std::string dual_cert;
    simulate->add_option("--x0", x0, "Initial state, comma separated")->required();
    simulate->add_option("--steps", steps, "Number of steps")->check(CLI::NonNegativeNumber)->capture_default_str();
    simulate->add_option("--dual-mode", dual_cert, "Asymptotic certificate supplying the switching scale")
        ->check(CLI::ExistingFile);

    CLI::App* verify = app.add_subcommand("verify", "Replay a stored certificate or reach file against a model");
    std::string cert_path, verify_model;
    int verify_threads = 0;
    verify->add_option("certificate", cert_path, "Certificate or reach file")->required()->check(CLI::ExistingFile);
    verify->add_option("model", verify_model, "Model file")->required()->check(CLI::ExistingFile);
    verify->add_option("--threads", verify_threads, "Worker threads per reach call");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*certify)
            return run_certify(flags, asym, epsilon, kmax, iter_limit, seed);
        if (*reach)
            return run_reach(flags, k, from);
        if (*simulate)
            return run_simulate(flags, x0, steps, dual_cert);
        return run_verify(cert_path, verify_model, verify_threads);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
}
