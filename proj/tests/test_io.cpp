#include "pwacert/error.hpp"
#include "pwacert/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace pwacert;
using testing::vec;

namespace {

const char* kContraction = R"({"system": {"n": 1, "m": 1,
  "regions": [{"A": [[0.5]], "B": [[0]], "p": [0], "H": [[1], [-1]], "h": [1, 1]}],
  "X": {"H": [[1], [-1]], "h": [1, 1]}, "U": {"H": [[1], [-1]], "h": [1, 1]}},
  "network": {"layers": [], "output": {"W": [[0]], "b": [0]}},
  "options": {"template": "box", "epsilon_shrink": 0.1, "limits": {"k_limit": 30}}})";

ErrorCode parse_code(const std::string& text, std::string* what = nullptr)
{
    try {
        parse_model(text);
    } catch (const Error& e) {
        if (what)
            *what = e.what();
        return e.code();
    }
    FAIL("expected a parse failure");
    return ErrorCode::InvalidModel;
}

}  // namespace

TEST_CASE("io: model parsing")
{
    const Model m = parse_model(kContraction);
    CHECK(m.sys.state_dim() == 1);
    CHECK(m.sys.region(0).cell.dim() == 2);  // padded with the input column
    CHECK(m.options.epsilon_shrink == 0.1);
    CHECK(m.options.k_limit == 30);
    CHECK_FALSE(m.dual_mode.has_value());
    CHECK(m.fingerprint == testing::fixture("contraction").fingerprint);
    CHECK(m.fingerprint != testing::fixture("expansion").fingerprint);
}

TEST_CASE("io: syntax errors carry a line and column")
{
    std::string what;
    CHECK(parse_code("{\n  \"system\": [1,\n}", &what) == ErrorCode::ParseError);
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("column") != std::string::npos);
}

TEST_CASE("io: schema errors name the path")
{
    std::string text = kContraction;
    text.replace(text.find("\"A\": [[0.5]]"), 12, "\"A\": [[0.5, 1]]");
    std::string what;
    const ErrorCode code = parse_code(text, &what);
    CHECK((code == ErrorCode::ParseError || code == ErrorCode::InvalidModel || code == ErrorCode::DimensionMismatch));
    CHECK(what.find("system.regions[0].A") != std::string::npos);

    std::string missing = kContraction;
    missing.replace(missing.find("\"network\""), 9, "\"netwerk\"");
    CHECK(parse_code(missing, &what) == ErrorCode::ParseError);
    CHECK(what.find("network") != std::string::npos);
}

TEST_CASE("io: network not fixing the origin is rejected")
{
    std::string text = kContraction;
    text.replace(text.find("\"b\": [0]"), 8, "\"b\": [0.3]");
    CHECK(parse_code(text) == ErrorCode::InvalidModel);
}

TEST_CASE("io: saturation key wraps the network")
{
    const Model m = testing::fixture("case_study_saturated");
    CHECK(m.net.depth() == 2);
    for (double x : {-10.0, -3.0, 0.0, 4.0, 10.0}) {
        const double u = eval_nn(m.net, vec({x, x}))(0);
        CHECK(u >= -1.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("io: certificate round trip")
{
    const Model m = testing::fixture("deadzone");
    Certificate cert;
    cert.kind = Certificate::Kind::Asymptotic;
    cert.template_directions = Template::box(1).C();
    cert.F_max = Polytope::box(1, 10.0);
    cert.F_min = Polytope::box(1, 0.5);
    cert.k_star = 15;
    cert.s_scale = 0.05;
    cert.seed = 9;
    cert.conclusive = true;
    cert.checks.push_back({"fmin_pi", true, -0.25, 1e-6, false});
    const nlohmann::json j = to_json(cert, m.fingerprint);
    const StoredCertificate back = certificate_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.model_fingerprint == m.fingerprint);
    CHECK(back.cert.kind == Certificate::Kind::Asymptotic);
    CHECK(back.cert.k_star == 15);
    CHECK(back.cert.s_scale == 0.05);
    CHECK(back.cert.seed == 9);
    CHECK(back.cert.F_min.h() == cert.F_min.h());
    CHECK(back.cert.F_max.H() == cert.F_max.H());
    REQUIRE(back.cert.find_check("fmin_pi") != nullptr);
    CHECK(back.cert.find_check("fmin_pi")->residual == -0.25);
}

TEST_CASE("io: infinities and vectors")
{
    CHECK(to_json(kInf) == "inf");
    CHECK(to_json(-kInf) == "-inf");
    CHECK(to_json(1.5) == 1.5);
    CHECK(parse_vector("1,-2.5, 3") == vec({1, -2.5, 3}));
    CHECK_THROWS_AS(parse_vector("1,x"), Error);
    CHECK_THROWS_AS(parse_vector(""), Error);
}

TEST_CASE("io: missing files")
{
    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), Error);
}
