#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ctk/flf.hpp"
#include "ctk/metric.hpp"
#include "ctk/ode.hpp"
#include "ctk/sampling.hpp"
#include "ctk/system.hpp"

namespace ctk {

enum class Verdict { kIES, kIAS, kIS, kInconclusive };

std::string_view verdict_name(Verdict v);

// A sample at which the checked inequality failed. `slack` is the amount by
// which it failed (positive).
struct Violation {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd v;
  double slack = 0.0;
};

struct RateEstimate {
  double K = 1.0;
  double lambda = 0.0;
  // Goodness of the exponential fit; absent for analytic certificates.
  std::optional<double> r_squared;
};

struct BracketSummary {
  double max_residual = 0.0;
  bool commuting = false;
};

struct FlfSummary {
  std::string kind;
  double p = 2.0;
  std::optional<double> delta;
  std::optional<double> c1;
  std::optional<double> c2;
  std::optional<double> k;
};

struct LyapunovSummary {
  bool passed = false;
  double positivity_margin = 0.0;
  double decay_rate = 0.0;
  double expected_rate = 0.0;
  double transport_residual = 0.0;
  std::optional<double> growth_k1;
  std::optional<double> growth_k2;
  std::optional<double> growth_q;
};

using ConfigValue = std::variant<bool, long long, double, std::string, std::vector<double>>;
using ConfigEcho = std::map<std::string, ConfigValue>;

// One named decay curve for the CSV handoff: (t, value) points.
struct Curve {
  std::string series_id;
  std::vector<std::pair<double, double>> points;
};

struct CertReport {
  Verdict verdict = Verdict::kInconclusive;
  std::optional<RateEstimate> rate;
  // Worst value of the checked quantity over all samples; <= 0 means every
  // sample satisfied the inequality.
  double margin = 0.0;
  std::vector<Violation> violations;
  std::optional<BracketSummary> bracket;
  std::optional<FlfSummary> flf;
  std::optional<LyapunovSummary> lyapunov;
  ConfigEcho config;
  std::size_t samples_checked = 0;
  std::size_t samples_skipped = 0;
  std::vector<std::string> notes;
  // Not serialized into the JSON report.
  std::vector<Curve> curves;
};

inline constexpr double kIntegralFlfTolerance = 1e-6;

enum class MeasureNorm { kOne, kTwo, kInf, kWeighted };

std::string_view measure_norm_name(MeasureNorm norm);

// Logarithmic norm of A: mu_1, mu_2, mu_inf, or mu_2(P^{1/2} A P^{-1/2}).
double matrix_measure(const Eigen::MatrixXd& A, MeasureNorm norm,
                      const Eigen::MatrixXd& P = Eigen::MatrixXd());

struct CheckOptions {
  // Slack allowed on each pointwise inequality: absolute for matrix
  // inequalities, relative to max(1, V) for FLF decrease. Integral FLFs are
  // evaluated by quadrature and never use less than kIntegralFlfTolerance.
  double tol = 1e-9;
  // Rates below this count as "no decay".
  double rate_threshold = 0.01;
};

// Samples (t, x) and checks lambda_max(J^T M + M J + Mdot_f + 2 lambda M) <= tol.
CertReport demidovich_check(const SystemDef& sys, const MetricSpec& M, double lambda,
                            const SamplePlan& plan, const CheckOptions& opts = {});

// Samples (t, x, v) with |v| = 1 in the FLF's metric and checks
// L V + alpha(V) <= tol max(1, V). Zero alpha certifies IS, linear IES, other
// class-K IAS.
// `bounds`, when known, fills the report's sandwich constants and the
// overshoot K = (c2/c1)^{1/p} of the rate estimate.
CertReport flf_decrease_certify(const SystemDef& sys, const FlfSpec& spec, const ClassKSpec& alpha,
                                const SamplePlan& plan, const IntegratorConfig& cfg = {},
                                const CheckOptions& opts = {},
                                const std::optional<FlfBounds>& bounds = std::nullopt);

struct RateOptions {
  int pairs = 20;
  int grid_points = 101;
  double rate_threshold = 0.01;
  double r_squared_threshold = 0.95;
  double decay_ratio = 0.1;
  double k_max = 10.0;
  // Distances below distance_floor_factor * abs_tol are beyond the
  // integrator's resolution and left out of the fit.
  double distance_floor_factor = 1e3;
  // Distance curves written for at most this many pairs.
  int curve_pairs = 5;
};

// Integrates random pairs over [t0, t0 + horizon], fits
// log(d(t)/d(t0)) = log K - lambda (t - t0) pooled over pairs and classifies.
CertReport incremental_rate_estimate(const SystemDef& sys, const SamplePlan& plan,
                                     const IntegratorConfig& cfg = {},
                                     const RateOptions& opts = {});

// Shared by the certificates: a config echo entry for every integrator knob.
void echo_integrator(ConfigEcho& config, const IntegratorConfig& cfg);
void echo_plan(ConfigEcho& config, const SamplePlan& plan, const Box& box);

}  // namespace ctk
