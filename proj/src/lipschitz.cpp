#include "ctk/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctk/metric.hpp"
#include "ctk/sampling.hpp"

namespace ctk {

namespace {

std::vector<Eigen::VectorXd> probe_states(const Box& box, int sample_count, std::uint64_t seed) {
  const auto n = box.dim();
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(0.5 * (box.lower + box.upper));
  if (n <= 10) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Eigen::VectorXd c(n);
      for (Eigen::Index i = 0; i < n; ++i) c(i) = (mask >> i) & 1u ? box.upper(i) : box.lower(i);
      pts.push_back(c);
    }
  }
  for (int k = 0; k < sample_count; ++k) {
    Rng rng = sample_rng(seed, static_cast<std::uint64_t>(k));
    pts.push_back(uniform_in_box(rng, box));
  }
  return pts;
}

}  // namespace

LipschitzEstimate lipschitz_estimate(const SystemDef& sys, std::span<const double> t_grid,
                                     int sample_count, std::uint64_t seed) {
  if (sample_count < 0) throw std::invalid_argument("sample_count must be non-negative");
  const std::vector<double> default_grid{0.0};
  if (t_grid.empty()) t_grid = default_grid;
  const auto pts = probe_states(sys.domain, sample_count, seed);

  LipschitzEstimate est;
  if (sys.metric.is_flat()) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(sys.n, sys.n);
    Eigen::MatrixXd s_inv = s;
    if (sys.metric.kind == MetricSpec::Kind::kConstant) {
      s = spd_sqrt(sys.metric.P);
      s_inv = spd_inv_sqrt(sys.metric.P);
    }
    for (const auto& x : pts) {
      for (double t : t_grid) {
        const Eigen::MatrixXd a = s * jacobian_ad(sys.f, x, t) * s_inv;
        const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
        est.value = std::max(est.value, sigma);
        ++est.samples;
      }
    }
    return est;
  }

  // State-dependent metric: growth of |f(x2) - f(x1)| against the local
  // distance of nearby pairs.
  est.heuristic = true;
  const double eps = 1e-4 * sys.domain.diameter();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    Rng rng = sample_rng(seed ^ 0x9e3779b97f4a7c15ULL, k);
    const Eigen::VectorXd& x1 = pts[k];
    Eigen::VectorXd u = unit_tangent(rng, MetricSpec::euclidean(), x1);
    const Eigen::VectorXd x2 = x1 + eps * u;
    const Eigen::VectorXd mid = 0.5 * (x1 + x2);
    const double d = metric_norm(sys.metric, mid, x2 - x1);
    for (double t : t_grid) {
      const Eigen::VectorXd df = eval_field(sys.f, x2, t) - eval_field(sys.f, x1, t);
      est.value = std::max(est.value, metric_norm(sys.metric, mid, df) / d);
      ++est.samples;
    }
  }
  return est;
}

FlowDistanceReport flow_distance_check(const SystemDef& sys, double L, int pairs, double t0,
                                       double horizon, int grid_points, std::uint64_t seed,
                                       const IntegratorConfig& cfg, double tol) {
  if (pairs <= 0) throw std::invalid_argument("need at least one pair");
  const auto grid = uniform_grid(t0, t0 + horizon, grid_points);
  const OdeRhs rhs = system_rhs(sys);
  std::vector<std::vector<FlowDistanceViolation>> found(static_cast<std::size_t>(pairs));
  parallel_for(static_cast<std::size_t>(pairs), [&](std::size_t p) {
    Rng rng = sample_rng(seed, p);
    const Eigen::VectorXd x1 = uniform_in_box(rng, sys.domain);
    const Eigen::VectorXd x2 = uniform_in_box(rng, sys.domain);
    const auto path1 = sample_ode(rhs, x1, grid, cfg);
    const auto path2 = sample_ode(rhs, x2, grid, cfg);
    const double d0 = geodesic_distance(sys.metric, x1, x2).distance;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double s = grid[k] - t0;
      const double d = geodesic_distance(sys.metric, path1[k], path2[k]).distance;
      const double lower = d0 * std::exp(-L * s);
      const double upper = d0 * std::exp(L * s);
      const double slack = tol * std::max(d0, 1e-300);
      if (d < lower - slack || d > upper + slack) found[p].push_back({p, grid[k], d, lower, upper});
    }
  });
  FlowDistanceReport report;
  report.pairs = static_cast<std::size_t>(pairs);
  for (auto& v : found) report.violations.insert(report.violations.end(), v.begin(), v.end());
  return report;
}

}  // namespace ctk
