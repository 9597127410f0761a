#include "ctk/krasovskii.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ctk/errors.hpp"
#include "ctk/lift.hpp"

namespace ctk {

namespace {

// Separate sample streams so the positivity and trajectory checks do not
// reuse the states drawn for the commutation gate.
constexpr std::uint64_t kTrajectoryStream = 1u << 20;
constexpr std::uint64_t kPositivityStream = 2u << 20;

int times_per_state(const SystemDef& sys, const SamplePlan& plan) {
  return sys.time_varying() ? plan.times : 1;
}

double sample_time(Rng& rng, const SystemDef& sys, const SamplePlan& plan) {
  if (!sys.time_varying() || plan.horizon == 0.0) return plan.t0;
  return uniform_in(rng, plan.t0, plan.t0 + plan.horizon);
}

double vector_norm(const Eigen::VectorXd& v, MeasureNorm norm, const Eigen::MatrixXd& P) {
  switch (norm) {
    case MeasureNorm::kOne:
      return v.lpNorm<1>();
    case MeasureNorm::kTwo:
      return v.norm();
    case MeasureNorm::kInf:
      return v.lpNorm<Eigen::Infinity>();
    case MeasureNorm::kWeighted:
      return std::sqrt(std::max(0.0, v.dot(P * v)));
  }
  return v.norm();
}

void require_spd(const Eigen::MatrixXd& A, int n, const char* name) {
  if (A.rows() != n || A.cols() != n) {
    throw std::invalid_argument(std::string(name) + " must be " + std::to_string(n) + "x" +
                                std::to_string(n));
  }
  if (!A.isApprox(A.transpose(), 1e-12)) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  if (!(eig.eigenvalues()(0) > 0.0)) {
    throw std::invalid_argument(std::string(name) + " must be positive definite");
  }
}

}  // namespace

Eigen::VectorXd lie_bracket(std::span<const Expr> f, std::span<const Expr> h,
                            const Eigen::VectorXd& x, double t) {
  const Eigen::VectorXd fx = eval_field(f, x, t);
  const Eigen::VectorXd hx = eval_field(h, x, t);
  return jacobian_ad(f, x, t) * hx - jacobian_ad(h, x, t) * fx;
}

std::vector<Expr> companion_field(const SystemDef& sys) {
  if (sys.h) {
    for (const Expr& e : *sys.h) {
      if (e.references_time()) throw PreconditionError("h must not depend on t");
    }
    return *sys.h;
  }
  if (sys.time_varying()) {
    throw PreconditionError("f depends on t, so h = f is not time-invariant; supply h");
  }
  return sys.f;
}

BracketReport commutation_check(const SystemDef& sys, const SamplePlan& plan) {
  plan.validate();
  const std::vector<Expr> h = companion_field(sys);
  const Box& box = plan.box_for(sys);
  const int per_state = times_per_state(sys, plan);
  std::vector<double> residuals(static_cast<std::size_t>(plan.states * per_state));
  std::vector<char> ok(residuals.size());
  parallel_for(static_cast<std::size_t>(plan.states), [&](std::size_t i) {
    Rng rng = sample_rng(plan.seed, i);
    const Eigen::VectorXd x = uniform_in_box(rng, box);
    for (int j = 0; j < per_state; ++j) {
      const double t = sample_time(rng, sys, plan);
      const Eigen::VectorXd fx = eval_field(sys.f, x, t);
      const Eigen::VectorXd hx = eval_field(h, x, t);
      const double r = metric_norm(sys.metric, x, lie_bracket(sys.f, h, x, t));
      const double tol = kBracketTolerance *
                         (1.0 + metric_norm(sys.metric, x, fx) * metric_norm(sys.metric, x, hx));
      const std::size_t k = i * static_cast<std::size_t>(per_state) + static_cast<std::size_t>(j);
      residuals[k] = r;
      ok[k] = r <= tol;
    }
  });

  BracketReport report;
  report.samples = residuals.size();
  report.commuting = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  for (double r : residuals) report.max_residual = std::max(report.max_residual, r);
  report.residuals = std::move(residuals);
  return report;
}

double krasovskii_W(const SystemDef& sys, const FlfSpec& spec, double t, const Eigen::VectorXd& x,
                    const IntegratorConfig& cfg) {
  const std::vector<Expr> h = companion_field(sys);
  return flf_value(sys, spec, t, TangentPoint{x, eval_field(h, x, t)}, cfg);
}

std::string_view lyapunov_violation_name(LyapunovViolation::Kind kind) {
  switch (kind) {
    case LyapunovViolation::Kind::kTransport:
      return "transport";
    case LyapunovViolation::Kind::kDecay:
      return "decay";
    case LyapunovViolation::Kind::kPositivity:
      return "positivity";
  }
  return "unknown";
}

namespace {

struct TrajectoryOutcome {
  double transport = 0.0;
  double rate = std::numeric_limits<double>::infinity();
  std::vector<LyapunovViolation> violations;
};

// Five-point stencil nodes around each of `centers`, plus the start time.
std::vector<double> stencil_times(double t0, std::span<const double> centers, double h) {
  std::vector<double> times{t0};
  for (double c : centers) {
    for (int s = -2; s <= 2; ++s) times.push_back(c + s * h);
  }
  return times;
}

}  // namespace

LyapunovCheck krasovskii_verify(const SystemDef& sys, const FlfSpec& spec, double k,
                                const SamplePlan& plan, const IntegratorConfig& cfg,
                                const KrasovskiiOptions& opts) {
  plan.validate();
  cfg.validate();
  spec.validate();
  if (opts.trajectories < 1 || opts.grid_points < 2) {
    throw std::invalid_argument("krasovskii_verify needs trajectories >= 1 and grid_points >= 2");
  }
  if (!(plan.horizon > 5.0 * opts.fd_step * opts.grid_points)) {
    throw std::invalid_argument("horizon too short for the decay stencil");
  }
  const BracketReport bracket = commutation_check(sys, plan);
  if (!bracket.commuting) {
    throw PreconditionError("h does not commute with f (max bracket residual " +
                            std::to_string(bracket.max_residual) + ")");
  }
  const std::vector<Expr> h = companion_field(sys);
  const Box& box = plan.box_for(sys);
  const double hs = opts.fd_step;

  // Transport nodes span the window; decay stencils sit strictly inside it.
  const auto grid = uniform_grid(plan.t0, plan.t0 + plan.horizon, opts.grid_points);
  const auto centers =
      uniform_grid(plan.t0 + 3.0 * hs, plan.t0 + plan.horizon - 2.0 * hs, opts.grid_points);
  const auto stencil = stencil_times(plan.t0, centers, hs);
  const LiftedSystem lifted = complete_lift(sys);
  const OdeRhs base_rhs = system_rhs(sys);

  std::vector<TrajectoryOutcome> outcomes(static_cast<std::size_t>(opts.trajectories));
  parallel_for(outcomes.size(), [&](std::size_t i) {
    TrajectoryOutcome& out = outcomes[i];
    Rng rng = sample_rng(plan.seed, kTrajectoryStream + i);
    const Eigen::VectorXd x0 = uniform_in_box(rng, box);
    const Eigen::VectorXd h0 = eval_field(h, x0, plan.t0);
    const double scale = std::max(1.0, h0.norm());

    const auto lifted_path = sample_ode(lifted.rhs(), pack({x0, h0}), grid, cfg);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const TangentPoint tp = unpack(lifted_path[g], sys.n);
      const double r = (tp.v - eval_field(h, tp.x, grid[g])).norm() / scale;
      out.transport = std::max(out.transport, r);
      if (r > opts.transport_tol) {
        out.violations.push_back({LyapunovViolation::Kind::kTransport, grid[g], tp.x, r});
      }
    }

    const auto path = sample_ode(base_rhs, x0, stencil, cfg);
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double w[5];
      for (int s = 0; s < 5; ++s) {
        const std::size_t idx = 1 + 5 * c + static_cast<std::size_t>(s);
        w[s] = krasovskii_W(sys, spec, stencil[idx], path[idx], cfg);
      }
      const double W = w[2];
      if (!(W > opts.w_floor)) break;
      const double wdot = (w[0] - 8.0 * w[1] + 8.0 * w[3] - w[4]) / (12.0 * hs);
      out.rate = std::min(out.rate, -wdot / W);
      const double excess = (wdot + k * W) / W;
      if (excess > opts.decay_tol) {
        out.violations.push_back(
            {LyapunovViolation::Kind::kDecay, centers[c], path[1 + 5 * c + 2], excess});
      }
    }
  });

  LyapunovCheck check;
  check.expected_rate = k;
  check.bracket_residual = bracket.max_residual;
  check.trajectories = outcomes.size();
  double rate = std::numeric_limits<double>::infinity();
  for (auto& o : outcomes) {
    check.transport_residual = std::max(check.transport_residual, o.transport);
    rate = std::min(rate, o.rate);
    for (auto& v : o.violations) check.violations.push_back(std::move(v));
  }
  check.decay_rate = std::isfinite(rate) ? rate : 0.0;

  // Positivity off a neighborhood of x*, and the radial growth of |h|.
  const double radius = opts.neighborhood * box.diameter();
  const int per_state = times_per_state(sys, plan);
  struct PointOutcome {
    double w = std::numeric_limits<double>::infinity();
    double t = 0.0;
    Eigen::VectorXd x;
    double d = 0.0;
    double hn = 0.0;
    bool counted = false;
  };
  std::vector<PointOutcome> points(static_cast<std::size_t>(plan.states));
  parallel_for(points.size(), [&](std::size_t i) {
    PointOutcome& out = points[i];
    Rng rng = sample_rng(plan.seed, kPositivityStream + i);
    out.x = uniform_in_box(rng, box);
    if (sys.equilibrium) {
      out.d = metric_norm(sys.metric, *sys.equilibrium, out.x - *sys.equilibrium);
      if (out.d < radius) return;
    }
    out.counted = true;
    out.hn = metric_norm(sys.metric, out.x, eval_field(h, out.x, plan.t0));
    for (int j = 0; j < per_state; ++j) {
      const double t = sample_time(rng, sys, plan);
      const double w = krasovskii_W(sys, spec, t, out.x, cfg);
      if (w < out.w) {
        out.w = w;
        out.t = t;
      }
    }
  });

  double margin = std::numeric_limits<double>::infinity();
  std::vector<double> log_d, log_h;
  for (const auto& p : points) {
    if (!p.counted) continue;
    margin = std::min(margin, p.w);
    if (!(p.w > 0.0)) {
      check.violations.push_back({LyapunovViolation::Kind::kPositivity, p.t, p.x, -p.w});
    }
    if (sys.equilibrium && p.d > 0.0 && p.hn > 0.0) {
      log_d.push_back(std::log(p.d));
      log_h.push_back(std::log(p.hn));
    }
  }
  check.positivity_margin = std::isfinite(margin) ? margin : 0.0;

  if (log_d.size() >= 3) {
    const double n = static_cast<double>(log_d.size());
    double md = 0, mh = 0;
    for (std::size_t i = 0; i < log_d.size(); ++i) {
      md += log_d[i];
      mh += log_h[i];
    }
    md /= n;
    mh /= n;
    double sdd = 0, sdh = 0;
    for (std::size_t i = 0; i < log_d.size(); ++i) {
      sdd += (log_d[i] - md) * (log_d[i] - md);
      sdh += (log_d[i] - md) * (log_h[i] - mh);
    }
    if (sdd > 0.0) {
      GrowthFit fit;
      fit.q = sdh / sdd;
      fit.k1 = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < log_d.size(); ++i) {
        const double c = std::exp(log_h[i] - fit.q * log_d[i]);
        fit.k1 = std::min(fit.k1, c);
        fit.k2 = std::max(fit.k2, c);
      }
      check.growth = fit;
    }
  }

  check.passed = check.positivity_margin > 0.0 && check.violations.empty();
  return check;
}

CertReport classical_krasovskii_check(const SystemDef& sys, const Eigen::MatrixXd& P,
                                      const Eigen::MatrixXd& Q, const SamplePlan& plan,
                                      const IntegratorConfig& cfg, const CheckOptions& opts) {
  plan.validate();
  require_spd(P, sys.n, "P");
  require_spd(Q, sys.n, "Q");
  const Box& box = plan.box_for(sys);
  const int per_state = times_per_state(sys, plan);

  struct Outcome {
    std::vector<Violation> violations;
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::string first_error;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(plan.states));
  parallel_for(outcomes.size(), [&](std::size_t i) {
    Outcome& out = outcomes[i];
    Rng rng = sample_rng(plan.seed, i);
    const Eigen::VectorXd x = uniform_in_box(rng, box);
    for (int j = 0; j < per_state; ++j) {
      const double t = sample_time(rng, sys, plan);
      try {
        const Eigen::MatrixXd J = jacobian_ad(sys.f, x, t);
        Eigen::MatrixXd S = P * J + J.transpose() * P + Q;
        S = 0.5 * (S + S.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
        const double top = eig.eigenvalues()(sys.n - 1);
        out.worst = std::max(out.worst, top);
        ++out.checked;
        if (top > opts.tol) out.violations.push_back({t, x, eig.eigenvectors().col(sys.n - 1), top});
      } catch (const DomainError& e) {
        ++out.skipped;
        if (out.first_error.empty()) out.first_error = e.what();
      }
    }
  });

  CertReport report;
  double worst = -std::numeric_limits<double>::infinity();
  std::string first_error;
  for (auto& o : outcomes) {
    worst = std::max(worst, o.worst);
    report.samples_checked += o.checked;
    report.samples_skipped += o.skipped;
    if (first_error.empty() && !o.first_error.empty()) first_error = o.first_error;
    for (auto& v : o.violations) report.violations.push_back(std::move(v));
  }
  report.margin = std::isfinite(worst) ? worst : 0.0;
  if (!first_error.empty()) report.notes.push_back("skipped samples; first error: " + first_error);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pe(P);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qe(Q);
  const double p_min = pe.eigenvalues()(0);
  const double p_max = pe.eigenvalues()(sys.n - 1);
  const double k = qe.eigenvalues()(0) / p_max;

  report.config["mode"] = std::string("krasovskii");
  report.config["tol"] = opts.tol;
  report.config["rate_threshold"] = opts.rate_threshold;
  report.config["P"] = std::vector<double>(P.data(), P.data() + P.size());
  report.config["Q"] = std::vector<double>(Q.data(), Q.data() + Q.size());
  echo_plan(report.config, plan, box);
  echo_integrator(report.config, cfg);

  const bool clean = report.violations.empty() && report.samples_skipped == 0;
  if (!clean) return report;

  // P J + J^T P <= -Q <= -(lambda_min(Q) / lambda_max(P)) P: contraction in
  // the P-norm at rate k / 2 with overshoot sqrt(cond(P)).
  report.rate = RateEstimate{std::sqrt(p_max / p_min), 0.5 * k, std::nullopt};
  report.flf = FlfSummary{"quadratic", 2.0, std::nullopt, std::nullopt, std::nullopt, k};

  if (sys.time_varying()) {
    report.notes.push_back("f depends on t; W = f^T P f was not checked along trajectories");
    report.verdict = 0.5 * k >= opts.rate_threshold ? Verdict::kIES : Verdict::kIS;
    return report;
  }

  SystemDef with_f = sys;
  with_f.h = sys.f;
  const LyapunovCheck check =
      krasovskii_verify(with_f, FlfSpec::quadratic(MetricSpec::constant(P)), k, plan, cfg);
  report.bracket = BracketSummary{check.bracket_residual, true};
  LyapunovSummary summary;
  summary.passed = check.passed;
  summary.positivity_margin = check.positivity_margin;
  summary.decay_rate = check.decay_rate;
  summary.expected_rate = check.expected_rate;
  summary.transport_residual = check.transport_residual;
  if (check.growth) {
    summary.growth_k1 = check.growth->k1;
    summary.growth_k2 = check.growth->k2;
    summary.growth_q = check.growth->q;
  }
  report.lyapunov = summary;
  if (!check.passed) {
    report.notes.push_back("W = f^T P f failed the trajectory check (" +
                           std::to_string(check.violations.size()) + " violations)");
    return report;
  }
  report.verdict = 0.5 * k >= opts.rate_threshold ? Verdict::kIES : Verdict::kIS;
  return report;
}

MeasureDecayReport matrix_measure_decay(const SystemDef& sys, MeasureNorm norm,
                                        const Eigen::MatrixXd& P, const SamplePlan& plan,
                                        int trajectories, const IntegratorConfig& cfg,
                                        int grid_points) {
  plan.validate();
  cfg.validate();
  if (trajectories < 1 || grid_points < 2) {
    throw std::invalid_argument("matrix_measure_decay needs trajectories >= 1 and grid_points >= 2");
  }
  if (!(plan.horizon > 0.0)) throw std::invalid_argument("matrix_measure_decay needs a positive horizon");
  if (norm == MeasureNorm::kWeighted) require_spd(P, sys.n, "P");
  const Box& box = plan.box_for(sys);
  const int per_state = times_per_state(sys, plan);

  std::vector<double> measures(static_cast<std::size_t>(plan.states),
                               -std::numeric_limits<double>::infinity());
  parallel_for(measures.size(), [&](std::size_t i) {
    Rng rng = sample_rng(plan.seed, i);
    const Eigen::VectorXd x = uniform_in_box(rng, box);
    for (int j = 0; j < per_state; ++j) {
      const double t = sample_time(rng, sys, plan);
      measures[i] = std::max(measures[i], matrix_measure(jacobian_ad(sys.f, x, t), norm, P));
    }
  });

  const auto grid = uniform_grid(plan.t0, plan.t0 + plan.horizon, grid_points);
  const OdeRhs rhs = system_rhs(sys);
  struct Outcome {
    double rate = std::numeric_limits<double>::infinity();
    Curve curve;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(trajectories));
  parallel_for(outcomes.size(), [&](std::size_t i) {
    Outcome& out = outcomes[i];
    Rng rng = sample_rng(plan.seed, kTrajectoryStream + i);
    const Eigen::VectorXd x0 = uniform_in_box(rng, box);
    const auto path = sample_ode(rhs, x0, grid, cfg);
    out.curve.series_id = "W" + std::to_string(i);
    std::vector<double> w(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      w[g] = vector_norm(eval_field(sys.f, path[g], grid[g]), norm, P);
      out.curve.points.emplace_back(grid[g], w[g]);
    }
    // Below this the integrator's absolute error dominates |f|.
    const double floor = std::max(1e-6 * w[0], 1e4 * cfg.abs_tol);
    for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
      if (!(w[g + 1] > floor)) break;
      out.rate = std::min(out.rate, -std::log(w[g + 1] / w[g]) / (grid[g + 1] - grid[g]));
    }
  });

  MeasureDecayReport report;
  report.max_measure = *std::max_element(measures.begin(), measures.end());
  double rate = std::numeric_limits<double>::infinity();
  for (auto& o : outcomes) {
    rate = std::min(rate, o.rate);
    report.curves.push_back(std::move(o.curve));
  }
  report.measured_rate = std::isfinite(rate) ? rate : 0.0;
  report.trajectories = outcomes.size();
  return report;
}

}  // namespace ctk
