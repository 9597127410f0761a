#include "ctk/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "ctk/errors.hpp"
#include "ctk/simd.hpp"

namespace ctk {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA2[1] = {1.0 / 5};
constexpr double kA3[2] = {3.0 / 40, 9.0 / 40};
constexpr double kA4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
constexpr double kA5[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729};
constexpr double kA6[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
                           -5103.0 / 18656};
constexpr double kB[6] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84};
constexpr double kE[7] = {71.0 / 57600,      0.0,         -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

bool all_finite(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

class Stepper {
 public:
  Stepper(const OdeRhs& rhs, std::size_t dim) : rhs_(rhs), dim_(dim) {
    for (auto& k : k_) k.assign(dim, 0.0);
    ytmp_.assign(dim, 0.0);
    ynew_.assign(dim, 0.0);
    err_.assign(dim, 0.0);
  }

  void eval(double t, std::span<const double> y, std::vector<double>& out) { rhs_(t, y, out); }

  // Classic RK4 step; k_[0] must hold f(t, y). Leaves f(t+h, ynew) in k_[0].
  void rk4_step(double t, double h, std::vector<double>& y) {
    const auto& K = simd::kernels();
    const double* s[4];
    const double half[1] = {0.5};
    const double one[1] = {1.0};
    s[0] = k_[0].data();
    K.lincomb(ytmp_.data(), y.data(), h, half, s, 1, dim_);
    eval(t + 0.5 * h, ytmp_, k_[1]);
    s[0] = k_[1].data();
    K.lincomb(ytmp_.data(), y.data(), h, half, s, 1, dim_);
    eval(t + 0.5 * h, ytmp_, k_[2]);
    s[0] = k_[2].data();
    K.lincomb(ytmp_.data(), y.data(), h, one, s, 1, dim_);
    eval(t + h, ytmp_, k_[3]);
    const double w[4] = {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6};
    const double* all[4] = {k_[0].data(), k_[1].data(), k_[2].data(), k_[3].data()};
    K.lincomb(y.data(), y.data(), h, w, all, 4, dim_);
    eval(t + h, y, k_[0]);
  }

  // Dormand-Prince trial step from (t, y); k_[0] holds f(t, y). Returns the
  // scaled error norm; the candidate state is in ynew_, its derivative in k_[6].
  double dp_step(double t, double h, const std::vector<double>& y, double atol, double rtol) {
    const auto& K = simd::kernels();
    const double* s[7];
    for (int i = 0; i < 7; ++i) s[i] = k_[static_cast<std::size_t>(i)].data();
    const double* rows[5] = {kA2, kA3, kA4, kA5, kA6};
    for (int stage = 1; stage <= 5; ++stage) {
      K.lincomb(ytmp_.data(), y.data(), h, rows[stage - 1], s, static_cast<std::size_t>(stage),
                dim_);
      eval(t + kC[stage] * h, ytmp_, k_[static_cast<std::size_t>(stage)]);
    }
    K.lincomb(ynew_.data(), y.data(), h, kB, s, 6, dim_);
    eval(t + h, ynew_, k_[6]);
    K.lincomb(err_.data(), nullptr, h, kE, s, 7, dim_);
    return K.scaled_rms(err_.data(), y.data(), ynew_.data(), atol, rtol, dim_);
  }

  // Hairer-Norsett-Wanner starting step heuristic for an order-5 method.
  double initial_step(double t, const std::vector<double>& y, double atol, double rtol,
                      double hmax) {
    const auto& K = simd::kernels();
    std::vector<double> zero(dim_, 0.0);
    const double d0 = K.scaled_rms(y.data(), y.data(), zero.data(), atol, rtol, dim_);
    const double d1 = K.scaled_rms(k_[0].data(), y.data(), zero.data(), atol, rtol, dim_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, hmax);
    const double one[1] = {1.0};
    const double* s[1] = {k_[0].data()};
    K.lincomb(ytmp_.data(), y.data(), h0, one, s, 1, dim_);
    eval(t + h0, ytmp_, k_[1]);
    for (std::size_t i = 0; i < dim_; ++i) err_[i] = k_[1][i] - k_[0][i];
    const double d2 = K.scaled_rms(err_.data(), y.data(), zero.data(), atol, rtol, dim_) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5);
    return std::min({100.0 * h0, h1, hmax});
  }

  std::vector<double>& k(std::size_t i) { return k_[i]; }
  std::vector<double>& ynew() { return ynew_; }

 private:
  const OdeRhs& rhs_;
  std::size_t dim_;
  std::array<std::vector<double>, 7> k_;
  std::vector<double> ytmp_, ynew_, err_;
};

Trajectory integrate_rk4(const OdeRhs& rhs, std::vector<double> y, double t0, double tf,
                         const IntegratorConfig& cfg) {
  const std::size_t dim = y.size();
  Trajectory traj(static_cast<Eigen::Index>(dim));
  Stepper st(rhs, dim);
  st.eval(t0, y, st.k(0));
  traj.push(t0, y, st.k(0));
  if (tf == t0) return traj;

  const double hnom = std::isfinite(cfg.max_step) ? cfg.max_step : IntegratorConfig::kDefaultRk4Step;
  const double span = tf - t0;
  const double steps_d = std::ceil(span / hnom - 1e-9);
  if (steps_d > static_cast<double>(cfg.max_steps)) {
    throw IntegrationError("fixed-step budget exhausted", t0);
  }
  const auto steps = std::max<long>(1, static_cast<long>(steps_d));
  const double h = span / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    st.rk4_step(t, h, y);
    if (!all_finite(y) || !all_finite(st.k(0))) {
      throw IntegrationError("non-finite state (probable finite-time blowup)", t + h);
    }
    const double tn = i + 1 == steps ? tf : t0 + static_cast<double>(i + 1) * h;
    traj.push(tn, y, st.k(0));
  }
  return traj;
}

Trajectory integrate_rk45(const OdeRhs& rhs, std::vector<double> y, double t0, double tf,
                          const IntegratorConfig& cfg) {
  const std::size_t dim = y.size();
  Trajectory traj(static_cast<Eigen::Index>(dim));
  Stepper st(rhs, dim);
  st.eval(t0, y, st.k(0));
  if (!all_finite(y) || !all_finite(st.k(0))) {
    throw IntegrationError("non-finite initial state", t0);
  }
  traj.push(t0, y, st.k(0));
  if (tf == t0) return traj;

  const double hmax = std::min(cfg.max_step, tf - t0);
  double h = st.initial_step(t0, y, cfg.abs_tol, cfg.rel_tol, hmax);
  double t = t0;
  long attempts = 0;
  while (t < tf) {
    if (++attempts > cfg.max_steps) {
      throw IntegrationError("step budget exhausted (probable finite-time blowup)", t);
    }
    bool last = false;
    if (t + h >= tf || tf - (t + h) < 1e-12 * std::max(1.0, std::fabs(tf))) {
      h = tf - t;
      last = true;
    }
    if (h <= 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t))) {
      throw IntegrationError("step size underflow", t);
    }
    const double err = st.dp_step(t, h, y, cfg.abs_tol, cfg.rel_tol);
    if (!std::isfinite(err) || !all_finite(st.ynew())) {
      h *= kMinFactor;
      continue;
    }
    if (err <= 1.0) {
      t = last ? tf : t + h;
      std::swap(y, st.ynew());
      std::swap(st.k(0), st.k(6));  // first-same-as-last
      traj.push(t, y, st.k(0));
      const double factor =
          err == 0.0 ? kMaxFactor
                     : std::clamp(kSafety * std::pow(err, -1.0 / 5), kMinFactor, kMaxFactor);
      h = std::min(h * factor, hmax);
    } else {
      h *= std::max(kMinFactor, kSafety * std::pow(err, -1.0 / 5));
    }
  }
  return traj;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw std::invalid_argument("integrator tolerances must be positive");
  }
  if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
}

void Trajectory::push(double t, std::span<const double> y, std::span<const double> dydt) {
  times_.push_back(t);
  states_.insert(states_.end(), y.begin(), y.end());
  derivs_.insert(derivs_.end(), dydt.begin(), dydt.end());
}

Eigen::Map<const Eigen::VectorXd> Trajectory::state(std::size_t k) const {
  return Eigen::Map<const Eigen::VectorXd>(states_.data() + k * static_cast<std::size_t>(dim_),
                                           dim_);
}

Eigen::Map<const Eigen::VectorXd> Trajectory::derivative(std::size_t k) const {
  return Eigen::Map<const Eigen::VectorXd>(derivs_.data() + k * static_cast<std::size_t>(dim_),
                                           dim_);
}

Eigen::VectorXd Trajectory::at(double t) const {
  Eigen::VectorXd out(dim_);
  at(t, std::span<double>(out.data(), static_cast<std::size_t>(dim_)));
  return out;
}

void Trajectory::at(double t, std::span<double> out) const {
  if (times_.size() == 1 || t <= times_.front()) {
    const auto s = state(0);
    std::copy(s.data(), s.data() + dim_, out.begin());
    return;
  }
  if (t >= times_.back()) {
    const auto s = state(times_.size() - 1);
    std::copy(s.data(), s.data() + dim_, out.begin());
    return;
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double t0 = times_[k];
  const double h = times_[k + 1] - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  // Hermite basis; the derivative weights carry the factor h.
  const double w[4] = {2 * s3 - 3 * s2 + 1, (s3 - 2 * s2 + s) * h, -2 * s3 + 3 * s2,
                       (s3 - s2) * h};
  const std::size_t d = static_cast<std::size_t>(dim_);
  const double* v[4] = {states_.data() + k * d, derivs_.data() + k * d,
                        states_.data() + (k + 1) * d, derivs_.data() + (k + 1) * d};
  simd::kernels().lincomb(out.data(), nullptr, 1.0, w, v, 4, d);
}

Trajectory integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double tf,
                         const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(tf >= t0)) throw std::invalid_argument("integration requires tf >= t0");
  std::vector<double> y(y0.data(), y0.data() + y0.size());
  return cfg.method == IntegratorConfig::Method::kRk4 ? integrate_rk4(rhs, std::move(y), t0, tf, cfg)
                                                      : integrate_rk45(rhs, std::move(y), t0, tf, cfg);
}

std::vector<Eigen::VectorXd> sample_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0,
                                        std::span<const double> times,
                                        const IntegratorConfig& cfg) {
  std::vector<Eigen::VectorXd> out;
  if (times.empty()) return out;
  out.reserve(times.size());
  out.push_back(y0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (times[k] == times[k - 1]) {
      out.push_back(out.back());
      continue;
    }
    out.push_back(integrate_ode(rhs, out.back(), times[k - 1], times[k], cfg).back());
  }
  return out;
}

std::vector<double> uniform_grid(double t0, double t1, int n) {
  if (n < 2) return {t0};
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = t0 + (t1 - t0) * i / (n - 1);
  grid.back() = t1;
  return grid;
}

OdeRhs system_rhs(const SystemDef& sys) {
  return [&sys](double t, std::span<const double> y, std::span<double> dydt) {
    eval_field(sys.f, y, t, dydt);
  };
}

Trajectory integrate(const SystemDef& sys, const Eigen::VectorXd& x0, double t0, double tf,
                     const IntegratorConfig& cfg) {
  if (x0.size() != sys.n) throw std::invalid_argument("initial state has wrong dimension");
  return integrate_ode(system_rhs(sys), x0, t0, tf, cfg);
}

Eigen::VectorXd flow_map(const SystemDef& sys, const Eigen::VectorXd& x0, double t0, double t,
                         const IntegratorConfig& cfg) {
  if (t == t0) return x0;
  return integrate(sys, x0, t0, t, cfg).back();
}

TransitionMatrix transition_matrix(const SystemDef& sys, const Eigen::VectorXd& x0, double t0,
                                   double t, const IntegratorConfig& cfg) {
  const auto n = static_cast<std::size_t>(sys.n);
  if (x0.size() != sys.n) throw std::invalid_argument("initial state has wrong dimension");
  Eigen::VectorXd y0(static_cast<Eigen::Index>(n + n * n));
  y0.head(sys.n) = x0;
  Eigen::Map<Eigen::MatrixXd>(y0.data() + n, sys.n, sys.n).setIdentity();

  OdeRhs rhs = [&sys, n](double tau, std::span<const double> y, std::span<double> dydt) {
    const auto x = y.first(n);
    eval_field(sys.f, x, tau, dydt.first(n));
    for (std::size_t j = 0; j < n; ++j) {
      jacobian_vector_product(sys.f, x, tau, y.subspan(n + j * n, n), dydt.subspan(n + j * n, n));
    }
  };
  const Trajectory traj = integrate_ode(rhs, y0, t0, t, cfg);
  const Eigen::VectorXd yf = traj.back();
  TransitionMatrix out;
  out.t0 = t0;
  out.t = t;
  out.endpoint = yf.head(sys.n);
  out.phi = Eigen::Map<const Eigen::MatrixXd>(yf.data() + n, sys.n, sys.n);
  return out;
}

}  // namespace ctk
