#include "ctk/system.hpp"

#include <string>

#include <gtest/gtest.h>

#include "ctk/errors.hpp"

namespace ctk {
namespace {

TEST(ParseSystemFile, TwoStateLinear) {
  const SystemDef sys = parse_system_text(R"SYS(
name = "damped"
state = ["x1", "x2"]
f = ["x2", "-x1-2*x2"]
)SYS");
  EXPECT_EQ(sys.name, "damped");
  EXPECT_EQ(sys.n, 2);
  EXPECT_FALSE(sys.time_varying());
  const Eigen::VectorXd fx = eval_field(sys.f, Eigen::Vector2d(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(fx(0), 1.0);
  EXPECT_DOUBLE_EQ(fx(1), -3.0);
}

TEST(ParseSystemFile, DefaultsWhenOptionalKeysOmitted) {
  const SystemDef sys = parse_system_text("f = [\"-x1\"]\n");
  EXPECT_EQ(sys.metric.kind, MetricSpec::Kind::kEuclidean);
  EXPECT_EQ(sys.domain.lower, Eigen::VectorXd::Constant(1, -1.0));
  EXPECT_EQ(sys.domain.upper, Eigen::VectorXd::Constant(1, 1.0));
  EXPECT_FALSE(sys.h.has_value());
  EXPECT_FALSE(sys.equilibrium.has_value());
  EXPECT_EQ(sys.state_names, std::vector<std::string>{"x1"});
}

TEST(ParseSystemFile, IndefiniteConstantMetricIsRejected) {
  try {
    parse_system_text(R"SYS(
f = ["x2", "-x1"]
metric.kind = "constant"
metric.P = [[1, 2], [2, 1]]
)SYS");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("not positive definite"), std::string::npos);
    EXPECT_NE(msg.find("eigenvalue -1"), std::string::npos) << msg;
  }
}

TEST(ParseSystemFile, FullFileWithCommentsAndContinuation) {
  const SystemDef sys = parse_system_text(R"SYS(# pendulum with friction
name = "pendulum"   # trailing comment
state = ["theta", "omega"]
f = ["omega",
     "-sin(theta) - 0.5*omega"]
h = ["omega", "-sin(theta) - 0.5*omega"]
metric.kind = "constant"
metric.P = [[2, 0.5],
            [0.5, 1]]
domain.lower = [-1.5, -2]
domain.upper = [1.5, 2]
equilibrium = [0, 0]
)SYS");
  EXPECT_EQ(sys.n, 2);
  EXPECT_EQ(sys.state_names[0], "theta");
  ASSERT_TRUE(sys.h.has_value());
  EXPECT_EQ(sys.metric.kind, MetricSpec::Kind::kConstant);
  EXPECT_DOUBLE_EQ(sys.metric.P(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(sys.domain.lower(1), -2.0);
  ASSERT_TRUE(sys.equilibrium.has_value());
}

TEST(ParseSystemFile, ExprMetric) {
  const SystemDef sys = parse_system_text(R"SYS(
f = ["-x1"]
metric.kind = "expr"
metric.m = ["exp(2*x1)"]
)SYS");
  EXPECT_EQ(sys.metric.kind, MetricSpec::Kind::kDiagonalExpr);
  EXPECT_THROW(parse_system_text(R"SYS(
f = ["-x1"]
metric.kind = "expr"
metric.m = ["x1"]
)SYS"),
               InputError);
}

TEST(ParseSystemFile, StructuralErrors) {
  // dimension mismatch between state and f
  EXPECT_THROW(parse_system_text("state = [\"x1\", \"x2\"]\nf = [\"-x1\"]\n"), InputError);
  // h must not depend on time
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nh = [\"t*x1\"]\n"), InputError);
  // empty box
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\ndomain.lower = [1]\ndomain.upper = [1]\n"),
               InputError);
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nequilibrium = [0, 0]\n"), InputError);
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nmetric.P = [[1, 0], [0, 1]]\n"), InputError);
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nmetric.kind = \"finsler\"\n"), InputError);
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nmetric.P = [[1, 0.5], [0, 1]]\n"
                                 "state = [\"a\", \"b\"]\nf2 = 1\n"),
               ParseError);
}

TEST(ParseSystemFile, MalformedText) {
  EXPECT_THROW(parse_system_text("name = \"x\"\n"), ParseError);               // no f
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nbogus = 3\n"), ParseError);   // unknown key
  EXPECT_THROW(parse_system_text("f = [\"-x1\"]\nf = [\"x1\"]\n"), ParseError); // duplicate
  EXPECT_THROW(parse_system_text("f = [\"-x1\"\n"), ParseError);               // unbalanced
  EXPECT_THROW(parse_system_text("f [\"-x1\"]\n"), ParseError);                // no '='
  EXPECT_THROW(parse_system_text("f = [\"-x1 +\"]\n"), ParseError);            // bad expression
  EXPECT_THROW(parse_system_text("state = [\"t\"]\nf = [\"-t\"]\n"), ParseError);
  EXPECT_THROW(parse_system_text("state = [\"a\", \"a\"]\nf = [\"-a\", \"a\"]\n"), ParseError);
  try {
    parse_system_text("f = [\"-x1\"]\ndomain.lower = [-1, oops]\n");
    FAIL();
  } catch (const ParseError& e) {
    // offset points into the second line
    EXPECT_GT(e.offset(), std::string("f = [\"-x1\"]\n").size());
  }
}

TEST(ParseSystemFile, MissingFileIsInputError) {
  EXPECT_THROW(parse_system_file("/nonexistent/system.sys"), InputError);
}

TEST(ParseSystemFile, BundledExamplesLoad) {
  for (const char* name : {"data/damped.sys", "data/rotation.sys", "data/decay.sys",
                           "data/periodic.sys", "data/pendulum.sys"}) {
    EXPECT_NO_THROW(parse_system_file(name)) << name;
  }
}

}  // namespace
}  // namespace ctk
