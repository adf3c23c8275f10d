#pragma once

#include "pwacert/certify.hpp"
#include "pwacert/geometry.hpp"
#include "pwacert/models.hpp"
#include "pwacert/reach.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace pwacert {

struct ModelOptions {
    /// "box", "oct", or "matrix" (directions in template_matrix).
    std::string template_kind = "box";
    Eigen::MatrixXd template_matrix;
    double epsilon_shrink = 1e-3;
    int iter_limit = 50;
    int k_limit = 200;
    long node_limit = 0;
    std::uint64_t seed = 7;

    Template make_template(int n) const;
};

/// Local stabilizer data of a model; the scale s is supplied by a certificate.
struct DualModeSpec {
    PwaFeedback kappa;
    Ellipsoid ellipsoid;

    DualModeController controller(const MaxoutNet& net, double s_scale) const;
};

struct Model {
    PwaSystem sys;
    MaxoutNet net;
    std::optional<DualModeSpec> dual_mode;
    ModelOptions options;
    /// FNV-1a hash of the canonical system, network and dual-mode sections.
    std::string fingerprint;
};

/// Parses a model document. Syntax errors throw ParseError with a
/// "line L, column C" anchor; schema and model errors throw ParseError or
/// InvalidModel naming the offending JSON path.
Model parse_model(const std::string& text);
Model load_model(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// Doubles are written as numbers; infinities as the strings "inf" / "-inf".
nlohmann::json to_json(double v);
nlohmann::json to_json(const Eigen::MatrixXd& M);
nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Polytope& P);
nlohmann::json to_json(const Certificate& cert, const std::string& model_fingerprint);
nlohmann::json to_json(const ReachResult& result, const Template& tmpl, int k);

Polytope polytope_from_json(const nlohmann::json& j, const std::string& path = "set");

struct StoredCertificate {
    Certificate cert;
    std::string model_fingerprint;
};

StoredCertificate certificate_from_json(const nlohmann::json& j);
StoredCertificate load_certificate(const std::string& path);

/// Set file: { "H": [[...]], "h": [...] }.
Polytope load_set(const std::string& path);

/// Parses "a,b,c" into a vector. Throws ParseError.
Eigen::VectorXd parse_vector(const std::string& text);

}  // namespace pwacert
