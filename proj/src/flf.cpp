#include "ctk/flf.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "ctk/errors.hpp"

namespace ctk {

double ClassKSpec::operator()(double r) const {
  switch (kind) {
    case Kind::kZero: return 0.0;
    case Kind::kLinear: return a * r;
    case Kind::kPower: return a * std::pow(r, q);
  }
  return 0.0;
}

void ClassKSpec::validate() const {
  if (kind == Kind::kZero) return;
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("class-K coefficient must be positive");
  if (kind == Kind::kPower && (!(q > 0.0) || !std::isfinite(q))) {
    throw std::invalid_argument("class-K exponent must be positive");
  }
}

std::string ClassKSpec::to_string() const {
  std::ostringstream out;
  out.precision(12);
  switch (kind) {
    case Kind::kZero: return "zero";
    case Kind::kLinear: out << "linear:" << a; break;
    case Kind::kPower: out << "power:" << a << ',' << q; break;
  }
  return out.str();
}

namespace {

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number '" + s + "' in class-K spec");
  }
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "' in class-K spec");
  return v;
}

}  // namespace

ClassKSpec parse_class_k(const std::string& text) {
  ClassKSpec out;
  if (text == "zero") return out;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("class-K spec must be zero, linear:a or power:a,q");
  const std::string kind = text.substr(0, colon);
  const std::string args = text.substr(colon + 1);
  if (kind == "linear") {
    out = ClassKSpec::linear(parse_number(args));
  } else if (kind == "power") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("power class-K spec needs a,q");
    out = ClassKSpec::power(parse_number(args.substr(0, comma)), parse_number(args.substr(comma + 1)));
  } else {
    throw std::invalid_argument("unknown class-K kind '" + kind + "'");
  }
  out.validate();
  return out;
}

FlfSpec FlfSpec::quadratic(MetricSpec m) {
  FlfSpec s;
  s.kind = Kind::kQuadratic;
  s.metric = std::move(m);
  s.p = 2.0;
  return s;
}

FlfSpec FlfSpec::integral_finite(double p, double delta, MetricSpec m) {
  FlfSpec s;
  s.kind = Kind::kIntegralFinite;
  s.metric = std::move(m);
  s.p = p;
  s.delta = delta;
  return s;
}

FlfSpec FlfSpec::integral_infinite(ClassKSpec alpha1, double horizon, double tail_tolerance,
                                   MetricSpec m) {
  FlfSpec s;
  s.kind = Kind::kIntegralInfinite;
  s.metric = std::move(m);
  s.alpha1 = alpha1;
  s.horizon = horizon;
  s.tail_tolerance = tail_tolerance;
  return s;
}

double FlfSpec::degree() const {
  switch (kind) {
    case Kind::kQuadratic: return 2.0;
    case Kind::kIntegralFinite: return p;
    case Kind::kIntegralInfinite:
      return alpha1.kind == ClassKSpec::Kind::kPower ? alpha1.q : 1.0;
  }
  return p;
}

void FlfSpec::validate() const {
  switch (kind) {
    case Kind::kQuadratic: break;
    case Kind::kIntegralFinite:
      if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("FLF exponent p must be >= 1");
      if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("FLF delta must be positive");
      break;
    case Kind::kIntegralInfinite:
      if (alpha1.kind == ClassKSpec::Kind::kZero) throw std::invalid_argument("alpha1 must be class K");
      alpha1.validate();
      if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("FLF horizon must be positive");
      if (!(tail_tolerance > 0.0)) throw std::invalid_argument("tail tolerance must be positive");
      break;
  }
}

std::string_view flf_kind_name(FlfSpec::Kind kind) {
  switch (kind) {
    case FlfSpec::Kind::kQuadratic: return "quadratic";
    case FlfSpec::Kind::kIntegralFinite: return "integral-finite";
    case FlfSpec::Kind::kIntegralInfinite: return "integral-infinite";
  }
  return "unknown";
}

FlfBounds flf_sandwich_constants(double L, double lambda, double K, double p, double delta) {
  if (!(L > 0.0) || !(lambda > 0.0) || !(K >= 1.0) || !(p >= 1.0) || !(delta > 0.0)) {
    throw std::invalid_argument("sandwich constants need L, lambda, delta > 0, K >= 1, p >= 1");
  }
  FlfBounds b;
  b.p = p;
  b.delta = delta;
  b.c1 = -std::expm1(-p * L * delta) / (p * L);
  const double kp = std::pow(K, p);
  b.c2 = kp * -std::expm1(-p * lambda * delta) / (p * lambda);
  const double gap = 1.0 - kp * std::exp(-p * lambda * delta);
  b.k = gap / b.c2;
  b.delta_too_small = !(gap > 0.0);
  return b;
}

double choose_delta(double K, double lambda, double p) {
  if (!(K >= 1.0) || !(lambda > 0.0) || !(p > 0.0)) {
    throw std::invalid_argument("choose_delta needs K >= 1, lambda > 0, p > 0");
  }
  return std::max(1.0, std::log(2.0 * std::pow(K, p)) / (p * lambda));
}

namespace {

constexpr double kMinQuadratureSteps = 64.0;

// Composite Simpson over every step of the dense output, doubling the number
// of panels per step until the total settles.
double simpson_on_steps(const Trajectory& traj, const std::function<double(double)>& g,
                        const QuadratureOptions& quad) {
  const auto& ts = traj.times();
  const auto sum_with = [&](int m) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      const double a = ts[k], b = ts[k + 1];
      const double h = (b - a) / m;
      double s = g(a) + g(b);
      for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
      total += s * h / 3.0;
    }
    return total;
  };
  int m = 2;
  double prev = sum_with(m);
  for (int r = 0; r < quad.max_refinements; ++r) {
    m *= 2;
    const double cur = sum_with(m);
    if (std::fabs(cur - prev) <= quad.rel_tol * std::fabs(cur)) return cur;
    prev = cur;
  }
  return prev;
}

void check_dims(const SystemDef& sys, const TangentPoint& tp) {
  if (tp.x.size() != sys.n || tp.v.size() != sys.n) {
    throw std::invalid_argument("tangent point has wrong dimension");
  }
}

// Integral of integrand(|Lie(v)(tau; t)|) over [t, t + span].
double transported_integral(const SystemDef& sys, const MetricSpec& norm, double t, double span,
                            const TangentPoint& tp, const std::function<double(double)>& integrand,
                            const IntegratorConfig& cfg, const QuadratureOptions& quad,
                            double* end_norm) {
  // keep steps short enough that the Hermite interpolant does not limit the
  // quadrature
  IntegratorConfig fine = cfg;
  fine.max_step = std::min(cfg.max_step, span / kMinQuadratureSteps);
  const Trajectory traj = lift_trajectory(sys, tp, t, t + span, fine);
  const auto n = sys.n;
  const auto g = [&](double tau) {
    const Eigen::VectorXd y = traj.at(tau);
    return integrand(metric_norm(norm, y.head(n), y.segment(n, n)));
  };
  if (end_norm) {
    const Eigen::VectorXd y = traj.back();
    *end_norm = metric_norm(norm, y.head(n), y.segment(n, n));
  }
  return simpson_on_steps(traj, g, quad);
}

}  // namespace

double flf_integral_eval(const SystemDef& sys, const FlfSpec& spec, double t,
                         const TangentPoint& tp, const IntegratorConfig& cfg,
                         const QuadratureOptions& quad) {
  if (spec.kind != FlfSpec::Kind::kIntegralFinite) {
    throw std::invalid_argument("flf_integral_eval needs an integral-finite FLF");
  }
  spec.validate();
  check_dims(sys, tp);
  if (tp.v.isZero(0.0)) return 0.0;
  const double p = spec.p;
  return transported_integral(sys, spec.metric, t, spec.delta, tp,
                              [p](double r) { return std::pow(r, p); }, cfg, quad, nullptr);
}

UgiasValue flf_ugias_eval(const SystemDef& sys, const FlfSpec& spec, double t,
                          const TangentPoint& tp, const IntegratorConfig& cfg,
                          const QuadratureOptions& quad) {
  if (spec.kind != FlfSpec::Kind::kIntegralInfinite) {
    throw std::invalid_argument("flf_ugias_eval needs an integral-infinite FLF");
  }
  spec.validate();
  check_dims(sys, tp);
  UgiasValue out;
  if (tp.v.isZero(0.0)) {
    out.converged = true;
    return out;
  }
  double end_norm = 0.0;
  out.value = transported_integral(sys, spec.metric, t, spec.horizon, tp, spec.alpha1, cfg, quad,
                                   &end_norm);
  out.tail_integrand = spec.alpha1(end_norm);
  out.converged = out.tail_integrand < spec.tail_tolerance;
  return out;
}

double flf_value(const SystemDef& sys, const FlfSpec& spec, double t, const TangentPoint& tp,
                 const IntegratorConfig& cfg) {
  switch (spec.kind) {
    case FlfSpec::Kind::kQuadratic: {
      check_dims(sys, tp);
      return tp.v.dot(metric_matrix(spec.metric, tp.x) * tp.v);
    }
    case FlfSpec::Kind::kIntegralFinite: return flf_integral_eval(sys, spec, t, tp, cfg);
    case FlfSpec::Kind::kIntegralInfinite: return flf_ugias_eval(sys, spec, t, tp, cfg).value;
  }
  return 0.0;
}

LieDerivative flf_lie_derivative(const SystemDef& sys, const FlfSpec& spec, double t,
                                 const TangentPoint& tp, const IntegratorConfig& cfg,
                                 bool cross_check) {
  spec.validate();
  check_dims(sys, tp);
  LieDerivative out;
  switch (spec.kind) {
    case FlfSpec::Kind::kQuadratic: {
      const Eigen::VectorXd fx = eval_field(sys.f, tp.x, t);
      const Eigen::MatrixXd J = jacobian_ad(sys.f, tp.x, t);
      const Eigen::MatrixXd M = metric_matrix(spec.metric, tp.x);
      const Eigen::MatrixXd S = J.transpose() * M + M * J + metric_derivative(spec.metric, tp.x, fx);
      out.exact = tp.v.dot(S * tp.v);
      break;
    }
    case FlfSpec::Kind::kIntegralFinite: {
      const TangentPoint end = lie_transport(sys, tp, t, t + spec.delta, cfg);
      out.exact = std::pow(metric_norm(spec.metric, end.x, end.v), spec.p) -
                  std::pow(metric_norm(spec.metric, tp.x, tp.v), spec.p);
      break;
    }
    case FlfSpec::Kind::kIntegralInfinite: {
      const TangentPoint end = lie_transport(sys, tp, t, t + spec.horizon, cfg);
      out.exact = spec.alpha1(metric_norm(spec.metric, end.x, end.v)) -
                  spec.alpha1(metric_norm(spec.metric, tp.x, tp.v));
      break;
    }
  }
  if (cross_check) {
    const double h = kLieDerivativeStep;
    const TangentPoint ahead1 = lie_transport(sys, tp, t, t + h, cfg);
    const TangentPoint ahead2 = lie_transport(sys, tp, t, t + 2.0 * h, cfg);
    out.finite_difference = (-3.0 * flf_value(sys, spec, t, tp, cfg) +
                             4.0 * flf_value(sys, spec, t + h, ahead1, cfg) -
                             flf_value(sys, spec, t + 2.0 * h, ahead2, cfg)) /
                            (2.0 * h);
    out.consistent = std::fabs(out.finite_difference - out.exact) <=
                     kLieDerivativeTolerance * std::max(1.0, std::fabs(out.exact));
  } else {
    out.finite_difference = out.exact;
  }
  return out;
}

}  // namespace ctk
