#include "mfg/config.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace mfg;
using namespace mfg::testing;

namespace {

const char* kMinimal = R"({
  "model": {"T": 2, "major": {"A": -1, "B": 1, "Q": 1, "G": 1, "sigma": 0.02},
            "minor": {"B": 1, "Q": 1, "G": 1, "sigma": 0.3},
            "types": [{"A": -1}]}
})";

std::string message(const std::string& text)
{
    try {
        parse_config(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, MinimalDocumentFillsDefaults)
{
    const RunConfig c = parse_config(kMinimal);
    EXPECT_EQ(c.spec.n, 1);
    EXPECT_EQ(c.spec.T, 2.0);
    EXPECT_EQ(c.spec.major.A.at(0.5)(0, 0), -1.0);
    EXPECT_EQ(c.spec.major.C.at(0.5)(0, 0), 0.0);
    EXPECT_EQ(c.spec.major.R(0, 0), 1.0);
    EXPECT_EQ(c.spec.types[0].R(0, 0), 1.0);
    EXPECT_EQ(c.spec.types[0].pi, 1.0);
    EXPECT_EQ(c.spec.major.gamma.kind(), SetKind::FullSpace);
    EXPECT_EQ(c.solver.J, 100);
    EXPECT_EQ(c.study.kind, "state-gap");
    EXPECT_TRUE(validate_spec(c.spec).ok());
}

TEST(Config, DumpRoundTripsExactly)
{
    RunConfig c;
    c.spec = nash_spec(1.5);
    c.spec.major.A = TimeMatrix({0.0, 0.7}, {s1(-1.0 / 3.0), s1(0.1)});
    c.spec.major.gamma = ConstraintSet::box(v1(-0.25), v1(std::numeric_limits<double>::infinity()));
    c.spec.types[0].gamma = ConstraintSet::orthant(1);
    c.solver.options.tol = 1e-6;
    c.solver.seed = 99;
    c.study.Ns = {4, 8};
    const std::string a = dump_config(c);
    const RunConfig d = parse_config(a);
    EXPECT_EQ(dump_config(d), a);
    EXPECT_EQ(d.spec.major.A.at(0.8)(0, 0), 0.1);
    EXPECT_EQ(d.spec.major.A.at(0.1)(0, 0), -1.0 / 3.0);
    EXPECT_EQ(d.spec.major.gamma.kind(), SetKind::Box);
    EXPECT_EQ(d.spec.major.gamma.lower()(0), -0.25);
    EXPECT_EQ(d.solver.seed, 99u);
}

TEST(Config, MatrixShapesAndConstraintKinds)
{
    const RunConfig c = parse_config(R"({
      "model": {"n": 2, "m": 2,
                "major": {"A": [[1, 2], [3, 4]], "b": [1, 2]},
                "types": [{"pi": 0.25}, {"pi": 0.75}]},
      "constraints": {"major": {"kind": "cone", "upsilon": [[1, 0]]},
                      "types": ["orthant", {"kind": "subspace", "upsilon": [[1, 1]]}]}
    })");
    EXPECT_EQ(c.spec.major.A.at(0)(1, 0), 3.0);
    EXPECT_EQ(c.spec.major.b.at(0)(1), 2.0);
    EXPECT_EQ(c.spec.major.gamma.kind(), SetKind::Cone);
    EXPECT_EQ(c.spec.types[1].gamma.kind(), SetKind::Subspace);
    EXPECT_EQ(c.spec.K(), 2);
}

TEST(Config, MalformedJsonNamesLine)
{
    const std::string m = message("{\n  \"model\": {\n    \"n\": 1,,\n  }\n}");
    EXPECT_NE(m.find("cfg.json"), std::string::npos) << m;
    EXPECT_NE(m.find("line 3"), std::string::npos) << m;
}

TEST(Config, FieldErrorsNamePath)
{
    EXPECT_NE(message(R"({"model": {"n": 2, "major": {"A": [[1, 2]]}, "types": [{}]}})").find("model.major.A"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"major": {"Z": 1}, "types": [{}]}})").find("model.major.Z"), std::string::npos);
    EXPECT_NE(message(R"({"model": {"types": []}})").find("model.types"), std::string::npos);
    EXPECT_NE(message(R"({"model": {"types": [{}]}, "solver": {"driver": "fast"}})").find("solver.driver"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"types": [{}]}, "constraints": {"major": "ball"}})").find("constraints.major"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"types": [{}]}, "constraints": {"major": {"kind": "box", "lower": [1]}}})")
                  .find("constraints.major"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"types": [{}], "major": {"A": {"segments": [{"t": 0.5, "value": 1}]}}}})")
                  .find("model.major.A"),
              std::string::npos);
}

TEST(Config, MissingFileIsConfigError)
{
    EXPECT_THROW(load_config("/nonexistent/cfg.json"), ConfigError);
}
