#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctk/system.hpp"

namespace ctk {

struct IntegratorConfig {
  enum class Method { kRk4, kRk45 };

  Method method = Method::kRk45;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  // Upper bound on the step for the adaptive method; the step itself for
  // fixed RK4 (kDefaultRk4Step when left infinite).
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 1'000'000;

  static constexpr double kDefaultRk4Step = 1e-2;

  void validate() const;
};

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

// Accepted steps of an integration with cubic Hermite dense output built from
// the stored derivatives.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(Eigen::Index dim) : dim_(dim) {}

  void push(double t, std::span<const double> y, std::span<const double> dydt);

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  double start_time() const { return times_.front(); }
  double end_time() const { return times_.back(); }

  Eigen::Map<const Eigen::VectorXd> state(std::size_t k) const;
  Eigen::Map<const Eigen::VectorXd> derivative(std::size_t k) const;
  Eigen::VectorXd back() const { return state(size() - 1); }

  // Dense output at t in [start_time, end_time].
  Eigen::VectorXd at(double t) const;
  void at(double t, std::span<double> out) const;

 private:
  Eigen::Index dim_ = 0;
  std::vector<double> times_;
  std::vector<double> states_;
  std::vector<double> derivs_;
};

// Integrates dy/dt = rhs(t, y) from t0 to tf >= t0. Throws IntegrationError
// when the step budget runs out, the step underflows or the state stops being
// finite.
Trajectory integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double tf,
                         const IntegratorConfig& cfg);

// States at each of the increasing `times` (times[0] is the initial time),
// restarting the integrator at every node so the samples are step endpoints
// rather than interpolants.
std::vector<Eigen::VectorXd> sample_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0,
                                        std::span<const double> times,
                                        const IntegratorConfig& cfg);

// n points uniformly covering [t0, t1], both ends included.
std::vector<double> uniform_grid(double t0, double t1, int n);

OdeRhs system_rhs(const SystemDef& sys);

Trajectory integrate(const SystemDef& sys, const Eigen::VectorXd& x0, double t0, double tf,
                     const IntegratorConfig& cfg = {});

// phi(t; t0, x0).
Eigen::VectorXd flow_map(const SystemDef& sys, const Eigen::VectorXd& x0, double t0, double t,
                         const IntegratorConfig& cfg = {});

struct TransitionMatrix {
  Eigen::MatrixXd phi;
  double t0 = 0.0;
  double t = 0.0;
  // phi(t; t0, x0), integrated jointly with the matrix.
  Eigen::VectorXd endpoint;
};

// Phi(t, t0) along phi(.; t0, x0): solves X' = J(phi, tau) X, X(t0) = I jointly
// with the base state.
TransitionMatrix transition_matrix(const SystemDef& sys, const Eigen::VectorXd& x0, double t0,
                                   double t, const IntegratorConfig& cfg = {});

}  // namespace ctk
