#pragma once

#include <string>

#include <Eigen/Dense>

#include "ctk/lift.hpp"
#include "ctk/metric.hpp"
#include "ctk/ode.hpp"
#include "ctk/system.hpp"

namespace ctk {

// Comparison function alpha(r) = 0, a r or a r^q.
struct ClassKSpec {
  enum class Kind { kZero, kLinear, kPower };

  Kind kind = Kind::kZero;
  double a = 0.0;
  double q = 1.0;

  static ClassKSpec zero() { return {}; }
  static ClassKSpec linear(double a) { return {Kind::kLinear, a, 1.0}; }
  static ClassKSpec power(double a, double q) { return {Kind::kPower, a, q}; }

  double operator()(double r) const;
  // Throws std::invalid_argument unless a > 0 (and q > 0) for non-zero kinds.
  void validate() const;
  // "zero", "linear:a" or "power:a,q".
  std::string to_string() const;
};

// Parses "zero", "linear:a" or "power:a,q"; throws std::invalid_argument.
ClassKSpec parse_class_k(const std::string& text);

// Finsler-Lyapunov function candidate V(t, x, v).
//   quadratic:         V = v^T M(x) v
//   integral-finite:   V = int_t^{t+delta} |Lie(v)(tau; t)|^p dtau
//   integral-infinite: V = int_t^{t+T} alpha1(|Lie(v)(tau; t)|) dtau
// `metric` is M for the quadratic kind and the norm |.| for the integrals.
struct FlfSpec {
  enum class Kind { kQuadratic, kIntegralFinite, kIntegralInfinite };

  Kind kind = Kind::kQuadratic;
  MetricSpec metric;
  double p = 2.0;
  double delta = 1.0;
  ClassKSpec alpha1;
  double horizon = 20.0;
  double tail_tolerance = 1e-8;

  static FlfSpec quadratic(MetricSpec m);
  static FlfSpec integral_finite(double p, double delta, MetricSpec m = MetricSpec::euclidean());
  static FlfSpec integral_infinite(ClassKSpec alpha1, double horizon, double tail_tolerance = 1e-8,
                                   MetricSpec m = MetricSpec::euclidean());

  // Degree of homogeneity in v (2 for the quadratic kind).
  double degree() const;
  void validate() const;
};

std::string_view flf_kind_name(FlfSpec::Kind kind);

// c1 |v|^p <= V <= c2 |v|^p and, when k > 0, L V <= -k V.
struct FlfBounds {
  double c1 = 0.0;
  double c2 = 0.0;
  double p = 0.0;
  double delta = 0.0;
  double k = 0.0;
  // Set when 1 - K^p e^{-p lambda delta} <= 0, i.e. delta is too small for
  // the decrease estimate.
  bool delta_too_small = false;
};

FlfBounds flf_sandwich_constants(double L, double lambda, double K, double p, double delta);

// Smallest delta >= 1 with 1 - K^p e^{-p lambda delta} >= 1/2.
double choose_delta(double K, double lambda, double p);

struct QuadratureOptions {
  double rel_tol = 1e-7;
  int max_refinements = 14;
};

double flf_integral_eval(const SystemDef& sys, const FlfSpec& spec, double t,
                         const TangentPoint& tp, const IntegratorConfig& cfg = {},
                         const QuadratureOptions& quad = {});

struct UgiasValue {
  double value = 0.0;
  // alpha1(|Lie(v)|) at the truncation horizon.
  double tail_integrand = 0.0;
  bool converged = false;
};

UgiasValue flf_ugias_eval(const SystemDef& sys, const FlfSpec& spec, double t,
                          const TangentPoint& tp, const IntegratorConfig& cfg = {},
                          const QuadratureOptions& quad = {});

// V(t, x, v) for any kind (the truncated integral for integral-infinite).
double flf_value(const SystemDef& sys, const FlfSpec& spec, double t, const TangentPoint& tp,
                 const IntegratorConfig& cfg = {});

struct LieDerivative {
  // Closed-form value of d/dt V along the lifted flow.
  double exact = 0.0;
  // Second-order one-sided difference of V(t+s, Lie(v)(t+s; t)) in s with
  // step h = 1e-4.
  double finite_difference = 0.0;
  bool consistent = true;
};

inline constexpr double kLieDerivativeStep = 1e-4;
inline constexpr double kLieDerivativeTolerance = 1e-3;

// Quadratic: v^T (J^T M + M J + Mdot) v.
// Integral-finite: |Lie(v)(t+delta; t)|^p - |v|^p.
// Integral-infinite: alpha1(|Lie(v)(t+T; t)|) - alpha1(|v|).
// Each is cross-checked against a forward difference along the lifted flow;
// `consistent` is false when they differ by more than 1e-3 max(1, |exact|).
LieDerivative flf_lie_derivative(const SystemDef& sys, const FlfSpec& spec, double t,
                                 const TangentPoint& tp, const IntegratorConfig& cfg = {},
                                 bool cross_check = true);

}  // namespace ctk
