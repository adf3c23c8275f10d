#include "pwacert/io.hpp"

#include "pwacert/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pwacert {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what)
{
    throw Error(ErrorCode::ParseError, path + ": " + what);
}

const json& member(const json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object())
        schema_error(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end())
        schema_error(path, "missing key \"" + key + "\"");
    return *it;
}

double number(const json& j, const std::string& path)
{
    if (j.is_number())
        return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf")
            return kInf;
        if (s == "-inf")
            return -kInf;
    }
    schema_error(path, "expected a number");
}

long integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer())
        schema_error(path, "expected an integer");
    return j.get<long>();
}

Eigen::VectorXd vector_at(const json& j, const std::string& path, long expected = -1)
{
    if (!j.is_array())
        schema_error(path, "expected an array of numbers");
    if (expected >= 0 && static_cast<long>(j.size()) != expected)
        schema_error(path, "expected " + std::to_string(expected) + " entries, found " + std::to_string(j.size()));
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v(i) = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Eigen::MatrixXd matrix_at(const json& j, const std::string& path, long rows = -1, long cols = -1)
{
    if (!j.is_array())
        schema_error(path, "expected a row-major array of rows");
    if (rows >= 0 && static_cast<long>(j.size()) != rows)
        schema_error(path, "expected " + std::to_string(rows) + " rows, found " + std::to_string(j.size()));
    long c = cols;
    if (c < 0)
        c = j.empty() ? 0 : (j[0].is_array() ? static_cast<long>(j[0].size()) : -1);
    if (c < 0)
        schema_error(path + "[0]", "expected an array of numbers");
    Eigen::MatrixXd M(j.size(), c);
    for (std::size_t r = 0; r < j.size(); ++r)
        M.row(r) = vector_at(j[r], path + "[" + std::to_string(r) + "]", c).transpose();
    return M;
}

Polytope polytope_at(const json& j, const std::string& path, long dim)
{
    const Eigen::MatrixXd H = matrix_at(member(j, "H", path), path + ".H", -1, dim);
    const Eigen::VectorXd h = vector_at(member(j, "h", path), path + ".h", H.rows());
    return Polytope(H, h);
}

std::string fnv1a(const std::string& s)
{
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

ErrorCode error_code_from_string(const std::string& s)
{
    for (int c = 0; c <= static_cast<int>(ErrorCode::ParseError); ++c)
        if (to_string(static_cast<ErrorCode>(c)) == s)
            return static_cast<ErrorCode>(c);
    schema_error("failure", "unknown error code \"" + s + "\"");
}

PwaSystem system_at(const json& j, int& n, int& m)
{
    const std::string path = "system";
    n = static_cast<int>(integer(member(j, "n", path), path + ".n"));
    m = static_cast<int>(integer(member(j, "m", path), path + ".m"));
    if (n < 1 || m < 1)
        schema_error(path, "n and m must be positive");
    const json& regs = member(j, "regions", path);
    if (!regs.is_array() || regs.empty())
        schema_error(path + ".regions", "expected a non-empty array");
    std::vector<PwaRegion> regions;
    for (std::size_t i = 0; i < regs.size(); ++i) {
        const std::string rp = path + ".regions[" + std::to_string(i) + "]";
        const json& r = regs[i];
        PwaRegion reg;
        reg.A = matrix_at(member(r, "A", rp), rp + ".A", n, n);
        reg.B = matrix_at(member(r, "B", rp), rp + ".B", n, m);
        reg.p = r.contains("p") ? vector_at(r["p"], rp + ".p", n) : Eigen::VectorXd::Zero(n);
        // Cells may be given over x only; the input columns are then zero.
        Eigen::MatrixXd H = matrix_at(member(r, "H", rp), rp + ".H");
        if (H.cols() == n) {
            Eigen::MatrixXd full = Eigen::MatrixXd::Zero(H.rows(), n + m);
            full.leftCols(n) = H;
            H = std::move(full);
        } else if (H.cols() != n + m) {
            schema_error(rp + ".H", "expected n or n + m columns");
        }
        const Eigen::VectorXd h = vector_at(member(r, "h", rp), rp + ".h", H.rows());
        reg.cell = Polytope(H, h);
        regions.push_back(std::move(reg));
    }
    Polytope X = polytope_at(member(j, "X", path), path + ".X", n);
    Polytope U = polytope_at(member(j, "U", path), path + ".U", m);
    return PwaSystem(std::move(regions), std::move(X), std::move(U));
}

MaxoutNet network_at(const json& j, int n, int m)
{
    const std::string path = "network";
    std::vector<MaxoutLayer> layers;
    long prev = n;
    if (j.contains("layers")) {
        const json& ls = j["layers"];
        if (!ls.is_array())
            schema_error(path + ".layers", "expected an array");
        for (std::size_t i = 0; i < ls.size(); ++i) {
            const std::string lp = path + ".layers[" + std::to_string(i) + "]";
            MaxoutLayer L;
            L.channels = ls[i].contains("p") ? static_cast<int>(integer(ls[i]["p"], lp + ".p")) : 1;
            if (L.channels < 1)
                schema_error(lp + ".p", "channel count must be positive");
            L.W = matrix_at(member(ls[i], "W", lp), lp + ".W", -1, prev);
            L.b = vector_at(member(ls[i], "b", lp), lp + ".b", L.W.rows());
            if (L.W.rows() == 0 || L.W.rows() % L.channels != 0)
                schema_error(lp + ".W", "row count must be a positive multiple of p");
            prev = L.width();
            layers.push_back(std::move(L));
        }
    }
    const json& o = member(j, "output", path);
    AffineLayer out;
    out.W = matrix_at(member(o, "W", path + ".output"), path + ".output.W", m, prev);
    out.b = vector_at(member(o, "b", path + ".output"), path + ".output.b", m);
    MaxoutNet net(std::move(layers), std::move(out));
    if (j.contains("saturate")) {
        const json& s = j["saturate"];
        net = saturate_nn(net, vector_at(member(s, "lo", path + ".saturate"), path + ".saturate.lo", m),
                          vector_at(member(s, "hi", path + ".saturate"), path + ".saturate.hi", m));
    }
    require_origin_fixed(net);
    return net;
}

DualModeSpec dual_mode_at(const json& j, int n, int m)
{
    const std::string path = "dual_mode";
    const json& ks = member(j, "kappa", path);
    if (!ks.is_array() || ks.empty())
        schema_error(path + ".kappa", "expected a non-empty array");
    std::vector<FeedbackPiece> pieces;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const std::string kp = path + ".kappa[" + std::to_string(i) + "]";
        FeedbackPiece piece;
        piece.K = matrix_at(member(ks[i], "K", kp), kp + ".K", m, n);
        piece.k = ks[i].contains("k") ? vector_at(ks[i]["k"], kp + ".k", m) : Eigen::VectorXd::Zero(m);
        piece.cell = polytope_at(member(ks[i], "cell", kp), kp + ".cell", n);
        pieces.push_back(std::move(piece));
    }
    const Eigen::MatrixXd S = matrix_at(member(j, "S", path), path + ".S", n, n);
    const double xi = number(member(j, "xi_star", path), path + ".xi_star");
    return {PwaFeedback(std::move(pieces)), Ellipsoid(S, xi)};
}

ModelOptions options_at(const json& j, int n)
{
    ModelOptions o;
    const std::string path = "options";
    if (!j.is_object())
        schema_error(path, "expected an object");
    if (j.contains("template")) {
        const json& t = j["template"];
        if (t.is_string()) {
            o.template_kind = t.get<std::string>();
            if (o.template_kind != "box" && o.template_kind != "oct")
                schema_error(path + ".template", "expected \"box\", \"oct\" or a direction matrix");
        } else {
            o.template_kind = "matrix";
            o.template_matrix = matrix_at(t, path + ".template", -1, n);
        }
    }
    if (j.contains("epsilon_shrink"))
        o.epsilon_shrink = number(j["epsilon_shrink"], path + ".epsilon_shrink");
    if (j.contains("seed"))
        o.seed = static_cast<std::uint64_t>(integer(j["seed"], path + ".seed"));
    if (j.contains("limits")) {
        const json& l = j["limits"];
        if (l.contains("iter_limit"))
            o.iter_limit = static_cast<int>(integer(l["iter_limit"], path + ".limits.iter_limit"));
        if (l.contains("k_limit"))
            o.k_limit = static_cast<int>(integer(l["k_limit"], path + ".limits.k_limit"));
        if (l.contains("node_limit"))
            o.node_limit = integer(l["node_limit"], path + ".limits.node_limit");
    }
    return o;
}

}  // namespace

Template ModelOptions::make_template(int n) const
{
    if (template_kind == "box")
        return Template::box(n);
    if (template_kind == "oct")
        return Template::octagonal(n);
    if (template_matrix.cols() != n)
        throw Error(ErrorCode::DimensionMismatch, "template matrix has wrong column count");
    return Template(template_matrix);
}

DualModeController DualModeSpec::controller(const MaxoutNet& net, double s_scale) const
{
    return DualModeController{net, kappa, ellipsoid, s_scale};
}

Model parse_model(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into a line/column anchor.
        const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < pos; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
    }
    if (!doc.is_object())
        schema_error("(root)", "expected an object");

    Model model;
    int n = 0, m = 0;
    model.sys = system_at(member(doc, "system", "(root)"), n, m);
    model.net = network_at(member(doc, "network", "(root)"), n, m);
    if (doc.contains("dual_mode"))
        model.dual_mode = dual_mode_at(doc["dual_mode"], n, m);
    if (doc.contains("options"))
        model.options = options_at(doc["options"], n);

    json canon = json::object();
    canon["system"] = doc["system"];
    canon["network"] = doc["network"];
    if (doc.contains("dual_mode"))
        canon["dual_mode"] = doc["dual_mode"];
    model.fingerprint = fnv1a(canon.dump());
    return model;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::PreconditionFailed, "cannot write " + path);
    out << text;
}

Model load_model(const std::string& path)
{
    try {
        return parse_model(read_file(path));
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

json to_json(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

json to_json(const Eigen::MatrixXd& M)
{
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < M.cols(); ++c)
            row.push_back(to_json(M(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Eigen::VectorXd& v)
{
    json out = json::array();
    for (int i = 0; i < v.size(); ++i)
        out.push_back(to_json(v(i)));
    return out;
}

json to_json(const Polytope& P)
{
    return {{"H", to_json(P.H())}, {"h", to_json(P.h())}};
}

json to_json(const Certificate& cert, const std::string& model_fingerprint)
{
    json j;
    j["format"] = "pwacert-certificate";
    j["version"] = 1;
    j["kind"] = to_string(cert.kind);
    j["model_fingerprint"] = model_fingerprint;
    j["conclusive"] = cert.conclusive;
    j["failure"] = cert.failure ? json(std::string(to_string(*cert.failure))) : json(nullptr);
    j["message"] = cert.message;
    j["template"] = to_json(cert.template_directions);
    j["F_max"] = cert.F_max.dim() > 0 ? to_json(cert.F_max) : json(nullptr);
    j["F_min"] = cert.F_min.dim() > 0 ? to_json(cert.F_min) : json(nullptr);
    j["k_star"] = cert.k_star;
    j["fmax_iterations"] = cert.fmax_iterations;
    j["epsilon_shrink"] = to_json(cert.epsilon_shrink);
    j["s_scale"] = to_json(cert.s_scale);
    j["seed"] = cert.seed;
    json checks = json::array();
    for (const Check& c : cert.checks)
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"residual", to_json(c.residual)},
                          {"tolerance", to_json(c.tolerance)},
                          {"sampled", c.sampled}});
    j["checks"] = std::move(checks);
    return j;
}

json to_json(const ReachResult& result, const Template& tmpl, int k)
{
    json j;
    j["format"] = "pwacert-reach";
    j["version"] = 1;
    j["k"] = k;
    j["conclusive"] = result.conclusive;
    j["failure"] = result.failure ? json(std::string(to_string(*result.failure))) : json(nullptr);
    j["template"] = to_json(tmpl.C());
    j["optima"] = to_json(result.optima);
    j["set"] = to_json(result.set);
    json dirs = json::array();
    for (const DirectionResult& d : result.directions)
        dirs.push_back({{"status", to_string(d.status)},
                        {"value", to_json(d.value)},
                        {"incumbent", to_json(d.incumbent)},
                        {"nodes", d.nodes}});
    j["directions"] = std::move(dirs);
    return j;
}

Polytope polytope_from_json(const json& j, const std::string& path)
{
    return polytope_at(j, path, -1);
}

StoredCertificate certificate_from_json(const json& j)
{
    const std::string path = "certificate";
    if (!j.is_object() || j.value("format", "") != "pwacert-certificate")
        schema_error(path, "not a certificate document");
    StoredCertificate out;
    Certificate& c = out.cert;
    out.model_fingerprint = member(j, "model_fingerprint", path).get<std::string>();
    const std::string kind = member(j, "kind", path).get<std::string>();
    if (kind == "UUB")
        c.kind = Certificate::Kind::UUB;
    else if (kind == "Asymptotic")
        c.kind = Certificate::Kind::Asymptotic;
    else
        schema_error(path + ".kind", "expected \"UUB\" or \"Asymptotic\"");
    c.conclusive = member(j, "conclusive", path).get<bool>();
    if (!j["failure"].is_null())
        c.failure = error_code_from_string(j["failure"].get<std::string>());
    c.message = j.value("message", "");
    c.template_directions = matrix_at(member(j, "template", path), path + ".template");
    if (!j["F_max"].is_null())
        c.F_max = polytope_at(j["F_max"], path + ".F_max", -1);
    if (!j["F_min"].is_null())
        c.F_min = polytope_at(j["F_min"], path + ".F_min", -1);
    c.k_star = static_cast<int>(integer(member(j, "k_star", path), path + ".k_star"));
    c.fmax_iterations = static_cast<int>(integer(member(j, "fmax_iterations", path), path + ".fmax_iterations"));
    c.epsilon_shrink = number(member(j, "epsilon_shrink", path), path + ".epsilon_shrink");
    c.s_scale = number(member(j, "s_scale", path), path + ".s_scale");
    c.seed = member(j, "seed", path).get<std::uint64_t>();
    const json& checks = member(j, "checks", path);
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const std::string cp = path + ".checks[" + std::to_string(i) + "]";
        Check k;
        k.name = member(checks[i], "name", cp).get<std::string>();
        k.passed = member(checks[i], "passed", cp).get<bool>();
        k.residual = number(member(checks[i], "residual", cp), cp + ".residual");
        k.tolerance = number(member(checks[i], "tolerance", cp), cp + ".tolerance");
        k.sampled = checks[i].value("sampled", false);
        c.checks.push_back(std::move(k));
    }
    return out;
}

StoredCertificate load_certificate(const std::string& path)
{
    try {
        return certificate_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

Polytope load_set(const std::string& path)
{
    try {
        return polytope_from_json(json::parse(read_file(path)), "set");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

Eigen::VectorXd parse_vector(const std::string& text)
{
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
            throw Error(ErrorCode::ParseError, "cannot parse \"" + item + "\" as a number");
        vals.push_back(v);
    }
    if (vals.empty())
        throw Error(ErrorCode::ParseError, "empty vector");
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace pwacert
