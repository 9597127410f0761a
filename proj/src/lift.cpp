#include "ctk/lift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctk {

void LiftedSystem::eval(double t, std::span<const double> y, std::span<double> dydt) const {
  const auto n = static_cast<std::size_t>(sys_->n);
  jacobian_vector_product(sys_->f, y.first(n), t, y.subspan(n, n), dydt.subspan(n, n),
                          dydt.first(n));
}

OdeRhs LiftedSystem::rhs() const {
  return [self = *this](double t, std::span<const double> y, std::span<double> dydt) {
    self.eval(t, y, dydt);
  };
}

LiftedSystem complete_lift(const SystemDef& sys) { return LiftedSystem(sys); }

Eigen::VectorXd pack(const TangentPoint& tp) {
  if (tp.x.size() != tp.v.size()) throw std::invalid_argument("tangent dimension mismatch");
  Eigen::VectorXd y(2 * tp.x.size());
  y << tp.x, tp.v;
  return y;
}

TangentPoint unpack(const Eigen::VectorXd& y, int n) {
  return {y.head(n), y.segment(n, n)};
}

Trajectory lift_trajectory(const SystemDef& sys, const TangentPoint& tp, double t0, double t,
                           const IntegratorConfig& cfg) {
  if (tp.x.size() != sys.n || tp.v.size() != sys.n) {
    throw std::invalid_argument("tangent point has wrong dimension");
  }
  return integrate_ode(complete_lift(sys).rhs(), pack(tp), t0, t, cfg);
}

TangentPoint lie_transport(const SystemDef& sys, const TangentPoint& tp, double t0, double t,
                           const IntegratorConfig& cfg) {
  if (t == t0) return tp;
  return unpack(lift_trajectory(sys, tp, t0, t, cfg).back(), sys.n);
}

TransportBoundReport transport_bound_check(const SystemDef& sys,
                                           std::span<const TangentPoint> samples, double t0,
                                           double horizon, double K, double lambda, double L,
                                           const IntegratorConfig& cfg,
                                           const TransportBoundOptions& opts) {
  if (!(K >= 1.0) || !(lambda > 0.0) || !(L > 0.0)) {
    throw std::invalid_argument("transport bounds need K >= 1, lambda > 0, L > 0");
  }
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const auto grid = uniform_grid(t0, t0 + horizon, opts.grid_points);
  const LiftedSystem lifted(sys);
  const OdeRhs rhs = lifted.rhs();

  TransportBoundReport report;
  report.grid_points = static_cast<int>(grid.size());
  report.worst_upper_slack = -std::numeric_limits<double>::infinity();
  report.worst_lower_slack = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& tp = samples[s];
    const double v0 = metric_norm(sys.metric, tp.x, tp.v);
    const auto path = sample_ode(rhs, pack(tp), grid, cfg);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const TangentPoint cur = unpack(path[k], sys.n);
      const double norm = metric_norm(sys.metric, cur.x, cur.v);
      const double dt = grid[k] - t0;
      const double upper = K * std::exp(-lambda * dt) * v0;
      const double lower = std::exp(-L * dt) * v0;
      const double slack = opts.tol * std::max(v0, 1e-300);
      const double scale = v0 > 0.0 ? v0 : 1.0;
      report.worst_upper_slack = std::max(report.worst_upper_slack, (norm - upper) / scale);
      report.worst_lower_slack = std::max(report.worst_lower_slack, (lower - norm) / scale);
      if (norm > upper + slack) {
        report.violations.push_back({s, grid[k], norm, upper, TransportViolation::Bound::kUpper});
      }
      if (norm < lower - slack) {
        report.violations.push_back({s, grid[k], norm, lower, TransportViolation::Bound::kLower});
      }
    }
    ++report.samples_checked;
  }
  return report;
}

}  // namespace ctk
