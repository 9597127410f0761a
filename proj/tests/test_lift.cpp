#include "ctk/lift.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace ctk {
namespace {

TangentPoint tp(std::initializer_list<double> x, std::initializer_list<double> v) {
  TangentPoint p;
  p.x = Eigen::Map<const Eigen::VectorXd>(x.begin(), static_cast<Eigen::Index>(x.size()));
  p.v = Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
  return p;
}

TEST(CompleteLift, LinearFieldLiftsToSameMatrix) {
  const SystemDef sys = make_system({"-x1 + x2", "-2*x2"});
  const LiftedSystem lifted = complete_lift(sys);
  EXPECT_EQ(lifted.dim(), 4);
  const Eigen::Vector4d y(0.3, -0.7, 1.0, 2.0);
  Eigen::Vector4d dy;
  lifted.eval(0.0, {y.data(), 4}, {dy.data(), 4});
  EXPECT_DOUBLE_EQ(dy(0), -0.3 - 0.7);
  EXPECT_DOUBLE_EQ(dy(1), 1.4);
  EXPECT_DOUBLE_EQ(dy(2), 1.0);
  EXPECT_DOUBLE_EQ(dy(3), -4.0);
}

TEST(CompleteLift, ScalarCubicVariationalField) {
  const SystemDef sys = make_system({"-x1 - x1^3"});
  const LiftedSystem lifted = complete_lift(sys);
  const double y[2] = {2.0, 0.5};
  double dy[2];
  lifted.eval(0.0, y, dy);
  EXPECT_DOUBLE_EQ(dy[0], -10.0);
  EXPECT_DOUBLE_EQ(dy[1], (-1.0 - 12.0) * 0.5);
}

TEST(CompleteLift, BaseEquationsIgnoreTangent) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  const LiftedSystem lifted = complete_lift(sys);
  Eigen::Vector4d a(0.2, 0.4, 1.0, -3.0), b(0.2, 0.4, -7.0, 11.0), da, db;
  lifted.eval(0.0, {a.data(), 4}, {da.data(), 4});
  lifted.eval(0.0, {b.data(), 4}, {db.data(), 4});
  EXPECT_EQ(da.head(2), db.head(2));
}

TEST(LieTransport, LinearMatchesMatrixExponential) {
  const SystemDef sys = make_system({"-x1 + x2", "-2*x2"});
  Eigen::Matrix2d A;
  A << -1, 1, 0, -2;
  const TangentPoint out = lie_transport(sys, tp({0.5, 0.5}, {1.0, 1.0}), 0.0, 1.0);
  const Eigen::Vector2d expected = testing::expm_oracle(A) * Eigen::Vector2d(1.0, 1.0);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(out.v(i) / expected(i), 1.0, 1e-6);
}

TEST(LieTransport, CubicDecayClosedForm) {
  const SystemDef sys = make_system({"-x1^3"});
  const TangentPoint out = lie_transport(sys, tp({1.0}, {1.0}), 0.0, 4.0);
  EXPECT_NEAR(out.v(0), 1.0 / 27.0, 1e-5);
}

TEST(LieTransport, ZeroTangentStaysZero) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  const Trajectory traj = lift_trajectory(sys, tp({0.9, -0.2}, {0.0, 0.0}), 0.0, 5.0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    EXPECT_EQ(traj.state(k)(2), 0.0);
    EXPECT_EQ(traj.state(k)(3), 0.0);
  }
}

TEST(LieTransport, ProjectionIsBaseFlow) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  const TangentPoint start = tp({0.9, -0.2}, {0.3, 1.1});
  const TangentPoint out = lie_transport(sys, start, 0.0, 3.0);
  EXPECT_LE((out.x - flow_map(sys, start.x, 0.0, 3.0)).norm(), 1e-9);
}

TEST(LieTransport, Cocycle) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2 + 0.3*cos(t)"});
  const TangentPoint start = tp({0.4, 0.1}, {1.0, -0.5});
  const TangentPoint mid = lie_transport(sys, start, 0.0, 1.5);
  const TangentPoint chained = lie_transport(sys, mid, 1.5, 4.0);
  const TangentPoint direct = lie_transport(sys, start, 0.0, 4.0);
  EXPECT_LE((chained.v - direct.v).norm(), 1e-7);
}

TEST(LieTransport, LinearInTangent) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  const Eigen::Vector2d x(0.7, 0.0), v(0.3, -1.0), w(-2.0, 0.5);
  const double alpha = 1.7;
  const auto run = [&](const Eigen::VectorXd& u) {
    return lie_transport(sys, TangentPoint{x, u}, 0.0, 2.0).v;
  };
  EXPECT_LE((run(alpha * v + w) - (alpha * run(v) + run(w))).norm(), 1e-8);
}

TEST(LieTransport, AgreesWithTransitionMatrix) {
  const SystemDef sys = make_system({"x2", "-sin(x1) - 0.5*x2"});
  const Eigen::Vector2d x(0.7, 0.0), v(0.3, -1.0);
  const Eigen::VectorXd lv = lie_transport(sys, TangentPoint{x, v}, 0.0, 2.0).v;
  EXPECT_LE((lv - transition_matrix(sys, x, 0.0, 2.0).phi * v).norm(), 1e-7);
}

std::vector<TangentPoint> unit_samples(int n, int count) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<TangentPoint> out;
  for (int k = 0; k < count; ++k) {
    TangentPoint p{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
      p.x(i) = g(rng);
      p.v(i) = g(rng);
    }
    p.v.normalize();
    out.push_back(p);
  }
  return out;
}

TEST(TransportBoundCheck, ScalarDecayIsTight) {
  const SystemDef sys = make_system({"-x1"});
  const auto samples = unit_samples(1, 10);
  const auto rep = transport_bound_check(sys, samples, 0.0, 5.0, 1.0, 1.0, 1.0);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_EQ(rep.samples_checked, 10u);
  EXPECT_EQ(rep.grid_points, 50);
}

TEST(TransportBoundCheck, RotationViolatesDecay) {
  const SystemDef sys = make_system({"x2", "-x1"});
  const auto samples = unit_samples(2, 3);
  const auto rep = transport_bound_check(sys, samples, 0.0, 5.0, 1.0, 0.5, 1.0);
  // every grid time after the initial one violates the upper bound
  EXPECT_EQ(rep.violations.size(), 3u * 49u);
  for (const auto& v : rep.violations) {
    EXPECT_EQ(v.which, TransportViolation::Bound::kUpper);
    EXPECT_GT(v.t, 0.0);
    EXPECT_NEAR(v.norm, 1.0, 1e-7);
  }
}

TEST(TransportBoundCheck, LowerBoundTooOptimistic) {
  const SystemDef sys = make_system({"-x1"});
  const auto samples = unit_samples(1, 2);
  const auto rep = transport_bound_check(sys, samples, 0.0, 5.0, 1.0, 1.0, 0.5);
  ASSERT_FALSE(rep.violations.empty());
  for (const auto& v : rep.violations) EXPECT_EQ(v.which, TransportViolation::Bound::kLower);
  EXPECT_GT(rep.worst_lower_slack, 0.0);
}

TEST(TransportBoundCheck, ClaimedRateTooFast) {
  const SystemDef sys = make_system({"-x1"});
  const auto samples = unit_samples(1, 4);
  const auto rep = transport_bound_check(sys, samples, 0.0, 5.0, 1.0, 1.5, 1.0);
  EXPECT_FALSE(rep.violations.empty());
  EXPECT_GT(rep.worst_upper_slack, 0.0);
}

TEST(TransportBoundCheck, RejectsBadConstants) {
  const SystemDef sys = make_system({"-x1"});
  const auto samples = unit_samples(1, 1);
  EXPECT_THROW(transport_bound_check(sys, samples, 0.0, 5.0, 0.5, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(transport_bound_check(sys, samples, 0.0, 5.0, 1.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(transport_bound_check(sys, samples, 0.0, 5.0, 1.0, 1.0, -1.0), std::invalid_argument);
}

}  // namespace
}  // namespace ctk
