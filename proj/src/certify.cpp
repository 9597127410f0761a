#include "ctk/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctk/errors.hpp"

namespace ctk {

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kIES: return "IES";
    case Verdict::kIAS: return "IAS";
    case Verdict::kIS: return "IS";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string_view measure_norm_name(MeasureNorm norm) {
  switch (norm) {
    case MeasureNorm::kOne: return "one";
    case MeasureNorm::kTwo: return "two";
    case MeasureNorm::kInf: return "inf";
    case MeasureNorm::kWeighted: return "weighted";
  }
  return "two";
}

double matrix_measure(const Eigen::MatrixXd& A, MeasureNorm norm, const Eigen::MatrixXd& P) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix measure needs a square matrix");
  const auto n = A.rows();
  switch (norm) {
    case MeasureNorm::kOne: {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        best = std::max(best, A(j, j) + A.col(j).cwiseAbs().sum() - std::fabs(A(j, j)));
      }
      return best;
    }
    case MeasureNorm::kInf: {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        best = std::max(best, A(i, i) + A.row(i).cwiseAbs().sum() - std::fabs(A(i, i)));
      }
      return best;
    }
    case MeasureNorm::kTwo: {
      const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
      return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly)
          .eigenvalues()(n - 1);
    }
    case MeasureNorm::kWeighted: {
      if (P.rows() != n || P.cols() != n) throw std::invalid_argument("weight matrix has wrong size");
      const Eigen::MatrixXd B = spd_sqrt(P) * A * spd_inv_sqrt(P);
      return matrix_measure(B, MeasureNorm::kTwo);
    }
  }
  return 0.0;
}

void echo_integrator(ConfigEcho& config, const IntegratorConfig& cfg) {
  config["integrator.method"] =
      std::string(cfg.method == IntegratorConfig::Method::kRk4 ? "rk4" : "rk45");
  config["integrator.rel_tol"] = cfg.rel_tol;
  config["integrator.abs_tol"] = cfg.abs_tol;
  const double step = cfg.method == IntegratorConfig::Method::kRk4 && !std::isfinite(cfg.max_step)
                          ? IntegratorConfig::kDefaultRk4Step
                          : cfg.max_step;
  config["integrator.max_step"] = step;
  config["integrator.max_steps"] = static_cast<long long>(cfg.max_steps);
}

void echo_plan(ConfigEcho& config, const SamplePlan& plan, const Box& box) {
  config["seed"] = static_cast<long long>(plan.seed);
  config["samples.states"] = static_cast<long long>(plan.states);
  config["samples.tangents"] = static_cast<long long>(plan.tangents);
  config["samples.times"] = static_cast<long long>(plan.times);
  config["window.t0"] = plan.t0;
  config["window.horizon"] = plan.horizon;
  config["domain.lower"] = std::vector<double>(box.lower.data(), box.lower.data() + box.dim());
  config["domain.upper"] = std::vector<double>(box.upper.data(), box.upper.data() + box.dim());
}

namespace {

struct SampleOutcome {
  std::vector<Violation> violations;
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t inconsistent = 0;
  std::string first_error;
};

// Reduces per-state outcomes in index order so the report does not depend on
// thread scheduling.
void merge(CertReport& report, std::vector<SampleOutcome>& outcomes, std::string& first_error,
           std::size_t& inconsistent) {
  double worst = -std::numeric_limits<double>::infinity();
  for (auto& o : outcomes) {
    worst = std::max(worst, o.worst);
    report.samples_checked += o.checked;
    report.samples_skipped += o.skipped;
    inconsistent += o.inconsistent;
    if (first_error.empty() && !o.first_error.empty()) first_error = o.first_error;
    for (auto& v : o.violations) report.violations.push_back(std::move(v));
  }
  report.margin = std::isfinite(worst) ? worst : 0.0;
}

// Time-invariant fields need a single time per state.
int times_per_state(const SystemDef& sys, const SamplePlan& plan) {
  return sys.time_varying() ? plan.times : 1;
}

double sample_time(Rng& rng, const SystemDef& sys, const SamplePlan& plan) {
  if (!sys.time_varying() || plan.horizon == 0.0) return plan.t0;
  return uniform_in(rng, plan.t0, plan.t0 + plan.horizon);
}

}  // namespace

CertReport demidovich_check(const SystemDef& sys, const MetricSpec& M, double lambda,
                            const SamplePlan& plan, const CheckOptions& opts) {
  plan.validate();
  const Box& box = plan.box_for(sys);
  std::vector<SampleOutcome> outcomes(static_cast<std::size_t>(plan.states));
  parallel_for(outcomes.size(), [&](std::size_t i) {
    SampleOutcome& out = outcomes[i];
    Rng rng = sample_rng(plan.seed, i);
    const Eigen::VectorXd x = uniform_in_box(rng, box);
    for (int j = 0; j < times_per_state(sys, plan); ++j) {
      const double t = sample_time(rng, sys, plan);
      try {
        const Eigen::MatrixXd J = jacobian_ad(sys.f, x, t);
        const Eigen::MatrixXd Mx = metric_matrix(M, x);
        const Eigen::VectorXd fx = eval_field(sys.f, x, t);
        Eigen::MatrixXd S = J.transpose() * Mx + Mx * J + metric_derivative(M, x, fx) + 2.0 * lambda * Mx;
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
  std::string first_error;
  std::size_t inconsistent = 0;
  merge(report, outcomes, first_error, inconsistent);
  if (!first_error.empty()) report.notes.push_back("skipped samples; first error: " + first_error);
  const bool clean = report.violations.empty() && report.samples_skipped == 0;
  if (clean && lambda >= opts.rate_threshold) {
    report.verdict = Verdict::kIES;
  } else if (clean && lambda >= 0.0) {
    report.verdict = Verdict::kIS;
  }
  report.rate = RateEstimate{1.0, lambda, std::nullopt};
  report.config["mode"] = std::string("demidovich");
  report.config["metric.kind"] = std::string(metric_kind_name(M.kind));
  report.config["rate"] = lambda;
  report.config["tol"] = opts.tol;
  report.config["rate_threshold"] = opts.rate_threshold;
  echo_plan(report.config, plan, box);
  return report;
}

CertReport flf_decrease_certify(const SystemDef& sys, const FlfSpec& spec, const ClassKSpec& alpha,
                                const SamplePlan& plan, const IntegratorConfig& cfg,
                                const CheckOptions& opts, const std::optional<FlfBounds>& bounds) {
  plan.validate();
  spec.validate();
  alpha.validate();
  cfg.validate();
  const Box& box = plan.box_for(sys);
  const double tol =
      spec.kind == FlfSpec::Kind::kQuadratic ? opts.tol : std::max(opts.tol, kIntegralFlfTolerance);
  std::vector<SampleOutcome> outcomes(static_cast<std::size_t>(plan.states));
  parallel_for(outcomes.size(), [&](std::size_t i) {
    SampleOutcome& out = outcomes[i];
    Rng rng = sample_rng(plan.seed, i);
    const Eigen::VectorXd x = uniform_in_box(rng, box);
    for (int j = 0; j < times_per_state(sys, plan); ++j) {
      const double t = sample_time(rng, sys, plan);
      for (int k = 0; k < plan.tangents; ++k) {
        try {
          const Eigen::VectorXd v = unit_tangent(rng, spec.metric, x);
          const TangentPoint tp{x, v};
          const double V = flf_value(sys, spec, t, tp, cfg);
          const LieDerivative d = flf_lie_derivative(sys, spec, t, tp, cfg);
          const double slack = d.exact + alpha(V);
          const double scaled = slack / std::max(1.0, V);
          out.worst = std::max(out.worst, scaled);
          ++out.checked;
          if (!d.consistent) ++out.inconsistent;
          if (scaled > tol) out.violations.push_back({t, x, v, slack});
        } catch (const IntegrationError& e) {
          ++out.skipped;
          if (out.first_error.empty()) out.first_error = e.what();
        } catch (const DomainError& e) {
          ++out.skipped;
          if (out.first_error.empty()) out.first_error = e.what();
        }
      }
    }
  });

  CertReport report;
  std::string first_error;
  std::size_t inconsistent = 0;
  merge(report, outcomes, first_error, inconsistent);
  if (!first_error.empty()) report.notes.push_back("skipped samples; first error: " + first_error);
  if (inconsistent > 0) {
    report.notes.push_back(std::to_string(inconsistent) +
                           " samples where the Lie derivative disagrees with its finite-difference "
                           "cross-check");
  }
  const bool clean = report.violations.empty() && report.samples_skipped == 0 && inconsistent == 0;
  if (clean) {
    switch (alpha.kind) {
      case ClassKSpec::Kind::kZero: report.verdict = Verdict::kIS; break;
      case ClassKSpec::Kind::kLinear: report.verdict = Verdict::kIES; break;
      case ClassKSpec::Kind::kPower:
        report.verdict = alpha.q == 1.0 ? Verdict::kIES : Verdict::kIAS;
        break;
    }
  }
  const double p = spec.degree();
  if (alpha.kind == ClassKSpec::Kind::kLinear ||
      (alpha.kind == ClassKSpec::Kind::kPower && alpha.q == 1.0)) {
    // V(t) <= e^{-a t} V(0) and c1 |v|^p <= V <= c2 |v|^p
    double K = 1.0;
    if (spec.kind != FlfSpec::Kind::kQuadratic) {
      K = bounds ? std::pow(bounds->c2 / bounds->c1, 1.0 / p) : std::numeric_limits<double>::quiet_NaN();
    }
    report.rate = RateEstimate{K, alpha.a / p, std::nullopt};
  }

  FlfSummary summary;
  summary.kind = std::string(flf_kind_name(spec.kind));
  summary.p = p;
  if (spec.kind == FlfSpec::Kind::kIntegralFinite) summary.delta = spec.delta;
  if (bounds) {
    summary.c1 = bounds->c1;
    summary.c2 = bounds->c2;
    summary.k = bounds->k;
  }
  report.flf = summary;
  report.config["mode"] = std::string("flf");
  report.config["flf.kind"] = summary.kind;
  report.config["flf.p"] = p;
  if (spec.kind == FlfSpec::Kind::kIntegralFinite) report.config["flf.delta"] = spec.delta;
  if (spec.kind == FlfSpec::Kind::kIntegralInfinite) {
    report.config["flf.horizon"] = spec.horizon;
    report.config["flf.tail_tolerance"] = spec.tail_tolerance;
    report.config["flf.alpha1"] = spec.alpha1.to_string();
  }
  report.config["flf.metric.kind"] = std::string(metric_kind_name(spec.metric.kind));
  report.config["alpha"] = alpha.to_string();
  report.config["tol"] = opts.tol;
  report.config["tol.effective"] = tol;
  report.config["lie_derivative.fd_step"] = kLieDerivativeStep;
  report.config["lie_derivative.fd_tolerance"] = kLieDerivativeTolerance;
  echo_plan(report.config, plan, box);
  echo_integrator(report.config, cfg);
  return report;
}

namespace {

struct PairSeries {
  bool ok = false;
  std::vector<double> s;     // t - t0 for points kept in the fit
  std::vector<double> logr;  // log(d / d0)
  std::vector<double> d;     // every grid distance, for curves
  double sup_r = 0.0;
  double final_r = 0.0;
  std::string error;
};

}  // namespace

CertReport incremental_rate_estimate(const SystemDef& sys, const SamplePlan& plan,
                                     const IntegratorConfig& cfg, const RateOptions& opts) {
  plan.validate();
  cfg.validate();
  if (opts.pairs < 10) throw std::invalid_argument("rate estimation needs at least 10 pairs");
  if (opts.grid_points < 2) throw std::invalid_argument("rate estimation needs at least 2 grid points");
  if (!(plan.horizon > 0.0)) throw std::invalid_argument("rate estimation needs a positive horizon");
  const Box& box = plan.box_for(sys);
  const auto grid = uniform_grid(plan.t0, plan.t0 + plan.horizon, opts.grid_points);
  const OdeRhs rhs = system_rhs(sys);
  const double floor = opts.distance_floor_factor * cfg.abs_tol;

  std::vector<PairSeries> series(static_cast<std::size_t>(opts.pairs));
  parallel_for(series.size(), [&](std::size_t p) {
    PairSeries& out = series[p];
    Rng rng = sample_rng(plan.seed, p);
    const Eigen::VectorXd x1 = uniform_in_box(rng, box);
    const Eigen::VectorXd x2 = uniform_in_box(rng, box);
    try {
      const auto path1 = sample_ode(rhs, x1, grid, cfg);
      const auto path2 = sample_ode(rhs, x2, grid, cfg);
      const double d0 = geodesic_distance(sys.metric, x1, x2).distance;
      if (!(d0 > floor)) {
        out.error = "initial pair closer than the distance floor";
        return;
      }
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double d = geodesic_distance(sys.metric, path1[k], path2[k]).distance;
        out.d.push_back(d);
        const double r = d / d0;
        out.sup_r = std::max(out.sup_r, r);
        out.final_r = r;
        if (d > floor) {
          out.s.push_back(grid[k] - plan.t0);
          out.logr.push_back(std::log(r));
        }
      }
      out.ok = true;
    } catch (const IntegrationError& e) {
      out.error = e.what();
    } catch (const DomainError& e) {
      out.error = e.what();
    }
  });

  CertReport report;
  std::size_t used = 0;
  double sum_s = 0, sum_y = 0, n_pts = 0;
  double sup_r = 0.0, max_final = 0.0;
  std::string first_error;
  for (std::size_t p = 0; p < series.size(); ++p) {
    const auto& ps = series[p];
    if (!ps.ok) {
      ++report.samples_skipped;
      if (first_error.empty()) first_error = ps.error;
      continue;
    }
    ++used;
    sup_r = std::max(sup_r, ps.sup_r);
    max_final = std::max(max_final, ps.final_r);
    for (std::size_t k = 0; k < ps.s.size(); ++k) {
      sum_s += ps.s[k];
      sum_y += ps.logr[k];
      n_pts += 1.0;
    }
    for (std::size_t k = 0; k < ps.d.size(); ++k) {
      const double r = ps.d[k] / ps.d.front();
      if (r > opts.k_max) {
        report.violations.push_back({grid[k], Eigen::VectorXd(), Eigen::VectorXd(), r - opts.k_max});
      }
    }
    if (static_cast<int>(p) < opts.curve_pairs) {
      Curve c{"pair_" + std::to_string(p), {}};
      for (std::size_t k = 0; k < ps.d.size(); ++k) c.points.emplace_back(grid[k], ps.d[k]);
      report.curves.push_back(std::move(c));
    }
  }
  report.samples_checked = used;
  if (!first_error.empty()) report.notes.push_back("skipped pairs; first error: " + first_error);

  report.config["mode"] = std::string("empirical");
  report.config["pairs"] = static_cast<long long>(opts.pairs);
  report.config["grid_points"] = static_cast<long long>(opts.grid_points);
  report.config["rate_threshold"] = opts.rate_threshold;
  report.config["r_squared_threshold"] = opts.r_squared_threshold;
  report.config["decay_ratio"] = opts.decay_ratio;
  report.config["k_max"] = opts.k_max;
  report.config["distance_floor"] = floor;
  report.config["metric.kind"] = std::string(metric_kind_name(sys.metric.kind));
  report.config["seed"] = static_cast<long long>(plan.seed);
  report.config["window.t0"] = plan.t0;
  report.config["window.horizon"] = plan.horizon;
  report.config["domain.lower"] = std::vector<double>(box.lower.data(), box.lower.data() + box.dim());
  report.config["domain.upper"] = std::vector<double>(box.upper.data(), box.upper.data() + box.dim());
  echo_integrator(report.config, cfg);

  if (used < 3 || n_pts < 2) {
    report.notes.push_back("fewer than 3 usable pairs");
    return report;
  }
  const double mean_s = sum_s / n_pts, mean_y = sum_y / n_pts;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& ps : series) {
    if (!ps.ok) continue;
    for (std::size_t k = 0; k < ps.s.size(); ++k) {
      const double ds = ps.s[k] - mean_s, dy = ps.logr[k] - mean_y;
      sxx += ds * ds;
      sxy += ds * dy;
      syy += dy * dy;
    }
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double intercept = mean_y - slope * mean_s;
  double ss_res = 0.0, worst = -std::numeric_limits<double>::infinity();
  for (const auto& ps : series) {
    if (!ps.ok) continue;
    for (std::size_t k = 0; k < ps.s.size(); ++k) {
      const double resid = ps.logr[k] - (intercept + slope * ps.s[k]);
      ss_res += resid * resid;
      worst = std::max(worst, resid);
    }
  }
  // a flat series (isometric flow) fits perfectly
  const double r2 = syy <= 1e-20 * n_pts ? 1.0 : std::max(0.0, 1.0 - ss_res / syy);
  const double lambda = -slope;
  report.rate = RateEstimate{std::exp(intercept), lambda, r2};
  report.margin = std::isfinite(worst) ? worst : 0.0;

  const bool bounded = report.violations.empty() && sup_r <= opts.k_max;
  if (lambda >= opts.rate_threshold && r2 >= opts.r_squared_threshold && bounded) {
    report.verdict = Verdict::kIES;
  } else if (bounded && std::fabs(lambda) < opts.rate_threshold) {
    report.verdict = Verdict::kIS;
  } else if (bounded && max_final < opts.decay_ratio) {
    report.verdict = Verdict::kIAS;
  }
  return report;
}

}  // namespace ctk
