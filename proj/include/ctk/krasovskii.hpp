#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctk/certify.hpp"
#include "ctk/flf.hpp"
#include "ctk/sampling.hpp"
#include "ctk/system.hpp"

namespace ctk {

// [f, h](x, t) = J_f(x, t) h(x) - J_h(x) f(x, t).
Eigen::VectorXd lie_bracket(std::span<const Expr> f, std::span<const Expr> h,
                            const Eigen::VectorXd& x, double t);

struct BracketReport {
  double max_residual = 0.0;
  std::vector<double> residuals;
  bool commuting = false;
  std::size_t samples = 0;
};

inline constexpr double kBracketTolerance = 1e-8;

// The companion field used by the Krasovskii construction: sys.h, or f itself
// when f is autonomous and no h is given. Throws PreconditionError otherwise.
std::vector<Expr> companion_field(const SystemDef& sys);

// Samples (t, x) and measures |[f, h]| in the system metric. Commuting iff
// every residual is <= 1e-8 (1 + |f| |h|).
BracketReport commutation_check(const SystemDef& sys, const SamplePlan& plan);

// W(t, x) = V(t, x, h(x)).
double krasovskii_W(const SystemDef& sys, const FlfSpec& spec, double t, const Eigen::VectorXd& x,
                    const IntegratorConfig& cfg = {});

struct LyapunovViolation {
  enum class Kind { kTransport, kDecay, kPositivity };
  Kind kind = Kind::kDecay;
  double t = 0.0;
  Eigen::VectorXd x;
  double amount = 0.0;
};

std::string_view lyapunov_violation_name(LyapunovViolation::Kind kind);

struct GrowthFit {
  double k1 = 0.0;
  double k2 = 0.0;
  double q = 0.0;
};

struct LyapunovCheck {
  // min W over sampled states outside a neighborhood of x*.
  double positivity_margin = 0.0;
  // min over trajectory samples of -dW/dt / W.
  double decay_rate = 0.0;
  double expected_rate = 0.0;
  // max |Lie(h(x0))(t; t0) - h(phi(t; t0, x0))| relative to max(1, |h(x0)|).
  double transport_residual = 0.0;
  std::optional<GrowthFit> growth;
  // max |[f, h]| from the commutation gate.
  double bracket_residual = 0.0;
  std::vector<LyapunovViolation> violations;
  std::size_t trajectories = 0;
  bool passed = false;
};

struct KrasovskiiOptions {
  // Sampled trajectories for the transport and decay checks.
  int trajectories = 10;
  int grid_points = 21;
  double transport_tol = 1e-5;
  // Slack on dW/dt <= -k W, relative to W.
  double decay_tol = 1e-4;
  // Step of the five-point central difference for dW/dt.
  double fd_step = 1e-2;
  // Radius of the excluded neighborhood of x*, as a fraction of the domain
  // diameter.
  double neighborhood = 0.05;
  // W values below this are too small to give a meaningful rate.
  double w_floor = 1e-12;
};

// Requires commutation_check to pass (else PreconditionError). Checks the
// transport identity Lie(h(x0)) = h(phi), dW/dt <= -k W along sampled
// trajectories over [t0, t0 + horizon], positivity of W away from x*, and
// fits k1 d^q <= |h(x)| <= k2 d^q when x* is known.
LyapunovCheck krasovskii_verify(const SystemDef& sys, const FlfSpec& spec, double k,
                                const SamplePlan& plan, const IntegratorConfig& cfg = {},
                                const KrasovskiiOptions& opts = {});

// Checks lambda_max(P J + J^T P + Q) <= tol over samples. On a pass W = f^T P f
// is verified along trajectories with k = lambda_min(Q) / lambda_max(P)
// (autonomous f only) and stored in the report's lyapunov section.
CertReport classical_krasovskii_check(const SystemDef& sys, const Eigen::MatrixXd& P,
                                      const Eigen::MatrixXd& Q, const SamplePlan& plan,
                                      const IntegratorConfig& cfg = {},
                                      const CheckOptions& opts = {});

struct MeasureDecayReport {
  // sup of mu(J(x, t)) over sampled (t, x).
  double max_measure = 0.0;
  // min over trajectories of the smallest secant rate -d log|f| / dt.
  double measured_rate = 0.0;
  std::size_t trajectories = 0;
  std::vector<Curve> curves;
};

// Time-varying pathway: W(t, x) = |f(x, t)| in the chosen norm decays at
// rate c whenever mu(J) <= -c. Samples mu over the plan and measures the decay
// of W along `trajectories` sampled solutions.
MeasureDecayReport matrix_measure_decay(const SystemDef& sys, MeasureNorm norm,
                                        const Eigen::MatrixXd& P, const SamplePlan& plan,
                                        int trajectories, const IntegratorConfig& cfg = {},
                                        int grid_points = 101);

}  // namespace ctk
