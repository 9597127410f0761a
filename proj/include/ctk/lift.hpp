#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctk/ode.hpp"
#include "ctk/system.hpp"

namespace ctk {

// A base point x with a tangent vector v at x.
struct TangentPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd v;
};

// Complete lift of dx/dt = f(x,t) to the tangent bundle:
//   x' = f(x, t),  v' = J(x, t) v.
// The x equations never read v, so projecting a lifted solution recovers the
// base flow.
class LiftedSystem {
 public:
  explicit LiftedSystem(const SystemDef& sys) : sys_(&sys) {}

  const SystemDef& base() const { return *sys_; }
  int dim() const { return 2 * sys_->n; }

  // y = [x; v], dydt = [f(x,t); J(x,t) v].
  void eval(double t, std::span<const double> y, std::span<double> dydt) const;
  OdeRhs rhs() const;

 private:
  const SystemDef* sys_;
};

// `sys` must outlive the returned object.
LiftedSystem complete_lift(const SystemDef& sys);

Eigen::VectorXd pack(const TangentPoint& tp);
TangentPoint unpack(const Eigen::VectorXd& y, int n);

// Lifted trajectory from (x, v) at t0 to t.
Trajectory lift_trajectory(const SystemDef& sys, const TangentPoint& tp, double t0, double t,
                           const IntegratorConfig& cfg = {});

// Lie(v)(t; t0) = (phi(t; t0, x), Phi(t, t0) v).
TangentPoint lie_transport(const SystemDef& sys, const TangentPoint& tp, double t0, double t,
                           const IntegratorConfig& cfg = {});

struct TransportBoundOptions {
  int grid_points = 50;
  // Absolute slack, scaled by the metric norm of the initial tangent.
  double tol = 1e-6;
};

struct TransportViolation {
  enum class Bound { kLower, kUpper };
  std::size_t sample = 0;
  double t = 0.0;
  double norm = 0.0;   // |Lie(v)(t; t0)|
  double bound = 0.0;  // the bound it crossed
  Bound which = Bound::kUpper;
};

struct TransportBoundReport {
  std::vector<TransportViolation> violations;
  std::size_t samples_checked = 0;
  int grid_points = 0;
  // Largest of norm - upper and lower - norm over every grid time, relative
  // to |v|; <= 0 means both bounds hold with room to spare.
  double worst_upper_slack = 0.0;
  double worst_lower_slack = 0.0;
};

// Checks |v| e^{-L (t - t0)} <= |Lie(v)(t; t0)| <= K e^{-lambda (t - t0)} |v|
// on a uniform grid over [t0, t0 + horizon] in the system's metric.
TransportBoundReport transport_bound_check(const SystemDef& sys,
                                           std::span<const TangentPoint> samples, double t0,
                                           double horizon, double K, double lambda, double L,
                                           const IntegratorConfig& cfg = {},
                                           const TransportBoundOptions& opts = {});

}  // namespace ctk
