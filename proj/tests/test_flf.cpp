#include "ctk/flf.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ctk/lipschitz.hpp"

namespace ctk {
namespace {

const double kC = (1.0 - std::exp(-2.0)) / 2.0;

TangentPoint scalar_tp(double x, double v) {
  return {Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, v)};
}

IntegratorConfig fine_rk4() {
  IntegratorConfig cfg;
  cfg.method = IntegratorConfig::Method::kRk4;
  cfg.max_step = 1e-3;
  return cfg;
}

// Second-order one-sided difference of V along the lifted flow.
double fd_lie_derivative(const SystemDef& sys, const FlfSpec& spec, double t, const TangentPoint& tp,
                         const IntegratorConfig& cfg) {
  const double h = 1e-4;
  double v[3];
  for (int i = 0; i < 3; ++i) {
    const TangentPoint moved = lie_transport(sys, tp, t, t + i * h, cfg);
    v[i] = flf_value(sys, spec, t + i * h, moved, cfg);
  }
  return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
}

TEST(ClassK, EvaluateAndParse) {
  EXPECT_EQ(ClassKSpec::zero()(3.0), 0.0);
  EXPECT_EQ(ClassKSpec::linear(2.0)(3.0), 6.0);
  EXPECT_DOUBLE_EQ(ClassKSpec::power(0.5, 3.0)(2.0), 4.0);
  EXPECT_EQ(parse_class_k("linear:1.5").a, 1.5);
  const ClassKSpec p = parse_class_k("power:2,0.5");
  EXPECT_EQ(p.kind, ClassKSpec::Kind::kPower);
  EXPECT_EQ(p.q, 0.5);
  EXPECT_EQ(parse_class_k("zero").kind, ClassKSpec::Kind::kZero);
  EXPECT_EQ(parse_class_k(p.to_string()).a, 2.0);
  EXPECT_THROW(parse_class_k("linear:-1"), std::invalid_argument);
  EXPECT_THROW(parse_class_k("linear:x"), std::invalid_argument);
  EXPECT_THROW(parse_class_k("power:1"), std::invalid_argument);
  EXPECT_THROW(parse_class_k("cubic:1"), std::invalid_argument);
}

TEST(FlfIntegralEval, ScalarDecayClosedForm) {
  const SystemDef sys = make_system({"-x1"});
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0);
  EXPECT_NEAR(flf_integral_eval(sys, spec, 0.0, scalar_tp(0.3, 1.0)), kC, 1e-6);
  EXPECT_NEAR(flf_integral_eval(sys, spec, 2.0, scalar_tp(-0.8, -1.0)), kC, 1e-6);
}

TEST(FlfIntegralEval, ZeroTangent) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0);
  const TangentPoint tp{Eigen::Vector2d(0.3, 0.2), Eigen::Vector2d::Zero()};
  EXPECT_EQ(flf_integral_eval(sys, spec, 0.0, tp), 0.0);
}

TEST(FlfIntegralEval, HomogeneousOfDegreeP) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  for (double p : {1.0, 2.0, 3.5}) {
    const FlfSpec spec = FlfSpec::integral_finite(p, 1.5);
    const TangentPoint tp{Eigen::Vector2d(0.3, 0.2), Eigen::Vector2d(0.6, -0.1)};
    const TangentPoint tp2{tp.x, 2.0 * tp.v};
    const double v1 = flf_integral_eval(sys, spec, 0.0, tp);
    EXPECT_NEAR(flf_integral_eval(sys, spec, 0.0, tp2), std::pow(2.0, p) * v1, 1e-8);
  }
}

TEST(FlfIntegralEval, AgreesWithConstantMetricNorm) {
  // rotation preserves |v|_P only for P = I; with P = diag(4, 1) compare
  // against an independently transported rotation
  const SystemDef sys = make_system({"x2", "-x1"});
  const MetricSpec P = MetricSpec::constant(Eigen::Vector2d(4, 1).asDiagonal());
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0, P);
  const TangentPoint tp{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.0)};
  // v(s) = (cos s, -sin s); |v|_P^2 = 4 cos^2 s + sin^2 s
  const double expected = 2.5 + 1.5 * std::sin(2.0) / 2.0;
  EXPECT_NEAR(flf_integral_eval(sys, spec, 0.0, tp), expected, 1e-7);
}

TEST(FlfSandwichConstants, UnitCase) {
  const FlfBounds b = flf_sandwich_constants(1.0, 1.0, 1.0, 2.0, 1.0);
  EXPECT_NEAR(b.c1, kC, 1e-15);
  EXPECT_NEAR(b.c2, kC, 1e-15);
  EXPECT_NEAR(b.k, 2.0, 1e-14);
  EXPECT_FALSE(b.delta_too_small);
}

TEST(FlfSandwichConstants, LargeDeltaLimits) {
  // with K = 1 the decay rate is p lambda for every delta
  double prev_c1 = 0.0, prev_c2 = 0.0;
  for (double delta : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const FlfBounds b = flf_sandwich_constants(3.0, 1.0, 1.0, 2.0, delta);
    EXPECT_GT(b.c1, prev_c1);
    EXPECT_GT(b.c2, prev_c2);
    EXPECT_NEAR(b.k, 2.0, 1e-12);
    prev_c1 = b.c1;
    prev_c2 = b.c2;
  }
  const FlfBounds far = flf_sandwich_constants(3.0, 1.0, 1.0, 2.0, 40.0);
  EXPECT_NEAR(far.c1, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(far.c2, 1.0 / 2.0, 1e-12);
  // with K > 1 the rate increases towards p lambda
  double prev_k = -1e300;
  for (double delta : {1.0, 2.0, 4.0, 8.0, 40.0}) {
    const double k = flf_sandwich_constants(3.0, 1.0, 1.5, 2.0, delta).k;
    EXPECT_GT(k, prev_k);
    prev_k = k;
  }
  EXPECT_NEAR(prev_k, 2.0 / (1.5 * 1.5), 1e-12);
}

TEST(FlfSandwichConstants, OvershootNeedsLongerWindow) {
  const FlfBounds b = flf_sandwich_constants(1.0, 1.0, 2.0, 1.0, std::log(4.0));
  EXPECT_GT(b.k, 0.0);
  EXPECT_NEAR(b.k * b.c2, 0.5, 1e-14);
  const FlfBounds bad = flf_sandwich_constants(1.0, 1.0, 2.0, 1.0, 0.5);
  EXPECT_TRUE(bad.delta_too_small);
  EXPECT_LE(bad.k, 0.0);
  EXPECT_THROW(flf_sandwich_constants(1.0, 1.0, 0.5, 1.0, 1.0), std::invalid_argument);
}

TEST(ChooseDelta, Examples) {
  EXPECT_EQ(choose_delta(1.0, 1.0, 2.0), 1.0);
  EXPECT_NEAR(choose_delta(std::exp(1.0), 1.0, 1.0), std::log(2.0 * std::exp(1.0)), 1e-15);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double K = 1.0 + 20.0 * u(rng), lambda = 0.01 + 3.0 * u(rng), p = 1.0 + 3.0 * u(rng);
    const double d = choose_delta(K, lambda, p);
    EXPECT_GE(1.0 - std::pow(K, p) * std::exp(-p * lambda * d), 0.5 - 1e-12);
  }
}

TEST(FlfLieDerivative, IntegralScalarDecay) {
  const SystemDef sys = make_system({"-x1"});
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0);
  const LieDerivative d = flf_lie_derivative(sys, spec, 0.0, scalar_tp(0.5, 1.0));
  EXPECT_NEAR(d.exact, std::exp(-2.0) - 1.0, 1e-7);
  EXPECT_TRUE(d.consistent);
  EXPECT_NEAR(d.finite_difference, d.exact, 1e-3);
}

TEST(FlfLieDerivative, QuadraticExamples) {
  const SystemDef decay = make_system({"-x1", "-x2"});
  const FlfSpec id = FlfSpec::quadratic(MetricSpec::euclidean());
  const TangentPoint tp{Eigen::Vector2d(0.2, 0.4), Eigen::Vector2d(0.6, 0.8)};
  const LieDerivative d = flf_lie_derivative(decay, id, 0.0, tp);
  EXPECT_DOUBLE_EQ(d.exact, -2.0);
  EXPECT_TRUE(d.consistent);
  const SystemDef rot = make_system({"x2", "-x1"});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    const TangentPoint r{Eigen::Vector2d(g(rng), g(rng)), Eigen::Vector2d(g(rng), g(rng))};
    const LieDerivative dr = flf_lie_derivative(rot, id, 0.0, r);
    EXPECT_EQ(dr.exact, 0.0);
    EXPECT_TRUE(dr.consistent);
  }
}

TEST(FlfLieDerivative, QuadraticWithStateDependentMetric) {
  const SystemDef sys = make_system({"-x1 - x1^3"});
  const MetricSpec m = MetricSpec::diagonal_expr({parse_expression("1 + x1^2", 1)});
  const FlfSpec spec = FlfSpec::quadratic(m);
  const TangentPoint tp = scalar_tp(0.7, 1.3);
  const LieDerivative d = flf_lie_derivative(sys, spec, 0.0, tp, fine_rk4());
  const double x = 0.7, v = 1.3, fx = -x - x * x * x, J = -1 - 3 * x * x;
  EXPECT_NEAR(d.exact, v * v * (2 * J * (1 + x * x) + 2 * x * fx), 1e-13);
  EXPECT_NEAR(fd_lie_derivative(sys, spec, 0.0, tp, fine_rk4()), d.exact, 1e-4);
}

TEST(FlfLieDerivative, IdentityMatchesFiniteDifferenceOnBenchmarks) {
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const SystemDef& sys : {make_system({"-x1 - x1^3"}), make_system({"-(2 + sin(t))*x1"})}) {
    for (int i = 0; i < 10; ++i) {
      const double t = 3.0 * (u(rng) + 1.0);
      const TangentPoint tp = scalar_tp(u(rng), u(rng) > 0 ? 1.0 : -1.0);
      const double exact = flf_lie_derivative(sys, spec, t, tp, fine_rk4(), false).exact;
      EXPECT_NEAR(fd_lie_derivative(sys, spec, t, tp, fine_rk4()), exact, 1e-4);
    }
  }
}

TEST(FlfProperty, SandwichWithMeasuredConstants) {
  // x' = -x - x^3 on [-2, 2]: transport decays at least like e^{-t}, so
  // (K, lambda) = (1, 1); L from the Jacobian bound.
  Box box{Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0)};
  const SystemDef sys = make_system({"-x1 - x1^3"}, std::nullopt, MetricSpec::euclidean(), box);
  const double L = lipschitz_estimate(sys, std::vector<double>{0.0}, 200, 1).value;
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0);
  const FlfBounds b = flf_sandwich_constants(L, 1.0, 1.0, 2.0, 1.0);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double v = 2.0 * u(rng);
    const TangentPoint tp = scalar_tp(2.0 * u(rng), v);
    const double V = flf_integral_eval(sys, spec, 5.0 * (u(rng) + 1.0), tp);
    EXPECT_GE(V, b.c1 * v * v);
    EXPECT_LE(V, b.c2 * v * v + 1e-6);
  }
}

TEST(FlfProperty, DecreaseAtSandwichRate) {
  const FlfSpec spec = FlfSpec::integral_finite(2.0, 1.0);
  struct Bench {
    SystemDef sys;
    double lambda;
  };
  // transport rates: 1 for the cubic damping, 1 for -(2+sin t)x
  const std::vector<Bench> benches{{make_system({"-x1 - x1^3"}), 1.0},
                                   {make_system({"-(2 + sin(t))*x1"}), 1.0}};
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& b : benches) {
    const double L = lipschitz_estimate(b.sys, uniform_grid(0.0, 10.0, 50), 50, 1).value;
    const FlfBounds bounds = flf_sandwich_constants(L, b.lambda, 1.0, 2.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const double t = 5.0 * (u(rng) + 1.0);
      const TangentPoint tp = scalar_tp(u(rng), u(rng));
      const double V = flf_integral_eval(b.sys, spec, t, tp);
      const double LV = flf_lie_derivative(b.sys, spec, t, tp, {}, false).exact;
      EXPECT_LE(LV, -bounds.k * V + 1e-5);
    }
  }
}

TEST(FlfUgiasEval, Examples) {
  const FlfSpec spec = FlfSpec::integral_infinite(ClassKSpec::power(1.0, 2.0), 20.0);
  const UgiasValue v = flf_ugias_eval(make_system({"-x1"}), spec, 0.0, scalar_tp(0.4, 1.0));
  EXPECT_NEAR(v.value, 0.5, 1e-4);
  EXPECT_TRUE(v.converged);
  const UgiasValue zero = flf_ugias_eval(make_system({"-x1"}), spec, 0.0, scalar_tp(0.4, 0.0));
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.converged);
  const TangentPoint rtp{Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0)};
  const UgiasValue rot = flf_ugias_eval(make_system({"x2", "-x1"}), spec, 0.0, rtp);
  EXPECT_FALSE(rot.converged);
  EXPECT_NEAR(rot.tail_integrand, 1.0, 1e-6);
}

TEST(FlfUgiasEval, NonIncreasingAlongLiftedFlow) {
  const FlfSpec spec = FlfSpec::integral_infinite(ClassKSpec::power(1.0, 2.0), 20.0);
  for (const SystemDef& sys : {make_system({"-x1^3 - x1"}), make_system({"x2", "-sin(x1) - 0.5*x2"})}) {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) {
      TangentPoint tp{Eigen::VectorXd(sys.n), Eigen::VectorXd(sys.n)};
      for (int j = 0; j < sys.n; ++j) {
        tp.x(j) = u(rng);
        tp.v(j) = u(rng);
      }
      double prev = flf_ugias_eval(sys, spec, 0.0, tp).value;
      for (double t = 0.5; t <= 3.0; t += 0.5) {
        const TangentPoint moved = lie_transport(sys, tp, 0.0, t);
        const double cur = flf_ugias_eval(sys, spec, t, moved).value;
        EXPECT_LE(cur, prev + 1e-5);
        prev = cur;
      }
    }
  }
}

TEST(FlfSpec, Validation) {
  EXPECT_THROW(FlfSpec::integral_finite(0.5, 1.0).validate(), std::invalid_argument);
  EXPECT_THROW(FlfSpec::integral_finite(2.0, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(FlfSpec::integral_infinite(ClassKSpec::zero(), 1.0).validate(), std::invalid_argument);
  EXPECT_THROW(FlfSpec::integral_infinite(ClassKSpec::linear(1.0), -1.0).validate(),
               std::invalid_argument);
  EXPECT_EQ(flf_kind_name(FlfSpec::Kind::kIntegralFinite), "integral-finite");
}

}  // namespace
}  // namespace ctk
