#include "ctk/metric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctk/errors.hpp"
#include "ctk/system.hpp"

namespace ctk {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Discrete path energy and its gradient for the polyline a = X_0, X_1..X_N,
// X_{N+1} = b. Nodes are the rows of `interior` (N x n).
class PathEnergy {
 public:
  PathEnergy(const MetricSpec& m, Eigen::VectorXd a, Eigen::VectorXd b, int nodes)
      : m_(m), a_(std::move(a)), b_(std::move(b)), nodes_(nodes), ds_(1.0 / (nodes + 1)) {}

  Eigen::VectorXd node(const Eigen::MatrixXd& interior, int k) const {
    if (k == 0) return a_;
    if (k == nodes_ + 1) return b_;
    return interior.row(k - 1).transpose();
  }

  // +inf when the path leaves the region where the metric is defined.
  double energy(const Eigen::MatrixXd& interior) const {
    try {
      double e = 0.0;
      for (int k = 0; k <= nodes_; ++k) {
        const Eigen::VectorXd p = node(interior, k);
        const Eigen::VectorXd q = node(interior, k + 1);
        const Eigen::VectorXd d = q - p;
        e += d.dot(metric_matrix(m_, 0.5 * (p + q)) * d);
      }
      return e / ds_;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  double length(const Eigen::MatrixXd& interior) const {
    double len = 0.0;
    for (int k = 0; k <= nodes_; ++k) {
      const Eigen::VectorXd p = node(interior, k);
      const Eigen::VectorXd q = node(interior, k + 1);
      len += metric_norm(m_, 0.5 * (p + q), q - p);
    }
    return len;
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& interior) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(interior.rows(), interior.cols());
    for (int k = 0; k <= nodes_; ++k) {
      const Eigen::VectorXd p = node(interior, k);
      const Eigen::VectorXd q = node(interior, k + 1);
      const Eigen::VectorXd d = q - p;
      const Eigen::VectorXd mid = 0.5 * (p + q);
      const Eigen::VectorXd md = metric_matrix(m_, mid) * d;
      Eigen::VectorXd dm = Eigen::VectorXd::Zero(d.size());
      if (m_.kind == MetricSpec::Kind::kDiagonalExpr) {
        // grad_x (d^T M(x) d) = J_m(x)^T (d .* d)
        dm = jacobian_ad(m_.diagonal, mid, 0.0).transpose() * d.cwiseProduct(d);
      }
      if (k >= 1) g.row(k - 1) += (-2.0 * md + 0.5 * dm).transpose() / ds_;
      if (k + 1 <= nodes_) g.row(k) += (2.0 * md + 0.5 * dm).transpose() / ds_;
    }
    return g;
  }

 private:
  const MetricSpec& m_;
  Eigen::VectorXd a_, b_;
  int nodes_;
  double ds_;
};

// Applies (T (x) Mbar)^{-1} with T = tridiag(-1, 2, -1): the inverse Hessian
// of the path energy for a constant metric Mbar, up to the factor 2/ds.
Eigen::MatrixXd precondition(const Eigen::MatrixXd& g, const Eigen::MatrixXd& mbar_inv,
                             double ds) {
  const Eigen::Index N = g.rows();
  Eigen::MatrixXd x = g;
  // Thomas algorithm, all columns at once.
  std::vector<double> c(static_cast<std::size_t>(N), 0.0);
  double denom = 2.0;
  c[0] = -1.0 / denom;
  x.row(0) /= denom;
  for (Eigen::Index i = 1; i < N; ++i) {
    denom = 2.0 + c[static_cast<std::size_t>(i - 1)];
    c[static_cast<std::size_t>(i)] = -1.0 / denom;
    x.row(i) = (x.row(i) + x.row(i - 1)) / denom;
  }
  for (Eigen::Index i = N - 2; i >= 0; --i) {
    x.row(i) -= c[static_cast<std::size_t>(i)] * x.row(i + 1);
  }
  return (x * mbar_inv.transpose()) * (ds / 2.0);
}

}  // namespace

std::string_view metric_kind_name(MetricSpec::Kind kind) {
  switch (kind) {
    case MetricSpec::Kind::kEuclidean: return "euclidean";
    case MetricSpec::Kind::kConstant: return "constant";
    case MetricSpec::Kind::kDiagonalExpr: return "expr";
  }
  return "?";
}

Eigen::MatrixXd metric_matrix(const MetricSpec& m, const Eigen::VectorXd& x) {
  switch (m.kind) {
    case MetricSpec::Kind::kEuclidean: return Eigen::MatrixXd::Identity(x.size(), x.size());
    case MetricSpec::Kind::kConstant: return m.P;
    case MetricSpec::Kind::kDiagonalExpr: {
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.size(), x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const auto& e = m.diagonal[static_cast<std::size_t>(i)];
        const double v = e.evaluate<double>(as_span(x), 0.0);
        if (!(v > 0.0)) throw DomainError("metric entry is not positive", e.offset());
        out(i, i) = v;
      }
      return out;
    }
  }
  return {};
}

Eigen::MatrixXd metric_derivative(const MetricSpec& m, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& xdot) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.size(), x.size());
  if (m.kind != MetricSpec::Kind::kDiagonalExpr) return out;
  std::vector<Dual> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k) xd[static_cast<std::size_t>(k)] = Dual(x(k), xdot(k));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out(i, i) = m.diagonal[static_cast<std::size_t>(i)]
                    .evaluate<Dual>(std::span<const Dual>(xd), Dual(0.0))
                    .deriv;
  }
  return out;
}

double metric_norm(const MetricSpec& m, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  if (x.size() != v.size()) throw std::invalid_argument("metric_norm: dimension mismatch");
  switch (m.kind) {
    case MetricSpec::Kind::kEuclidean: return v.norm();
    case MetricSpec::Kind::kConstant: return std::sqrt(std::max(0.0, v.dot(m.P * v)));
    case MetricSpec::Kind::kDiagonalExpr: {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const auto& e = m.diagonal[static_cast<std::size_t>(i)];
        const double mi = e.evaluate<double>(as_span(x), 0.0);
        if (!(mi > 0.0)) throw DomainError("metric entry is not positive", e.offset());
        sum += mi * v(i) * v(i);
      }
      return std::sqrt(sum);
    }
  }
  return 0.0;
}

GeodesicResult geodesic_distance(const MetricSpec& m, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, const GeodesicOptions& opts) {
  if (a.size() != b.size()) throw std::invalid_argument("geodesic endpoints differ in dimension");
  GeodesicResult result;
  if ((a - b).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    return result;
  }
  if (m.is_flat() && !opts.force_optimizer) {
    result.distance = metric_norm(m, a, b - a);
    result.polyline = {a, b};
    return result;
  }
  if (opts.interior_nodes < 1) throw std::invalid_argument("geodesic needs interior nodes");

  const int N = opts.interior_nodes;
  const double ds = 1.0 / (N + 1);
  const PathEnergy path(m, a, b, N);
  Eigen::MatrixXd interior(N, a.size());
  for (int k = 1; k <= N; ++k) interior.row(k - 1) = (a + (b - a) * (k * ds)).transpose();

  const Eigen::MatrixXd mbar_inv = metric_matrix(m, 0.5 * (a + b)).inverse();
  double energy = path.energy(interior);
  result.converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    result.iterations = it + 1;
    const Eigen::MatrixXd dir = -precondition(path.gradient(interior), mbar_inv, ds);
    double step = 1.0;
    double trial_energy = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd trial;
    while (step > 1e-12) {
      trial = interior + step * dir;
      trial_energy = path.energy(trial);
      if (trial_energy < energy) break;
      step *= 0.5;
    }
    if (!(trial_energy < energy)) {
      // No representable decrease left along the descent direction.
      result.converged = true;
      break;
    }
    const double improvement = energy - trial_energy;
    interior = std::move(trial);
    energy = trial_energy;
    if (improvement < opts.energy_tolerance * std::max(1.0, energy)) {
      result.converged = true;
      break;
    }
  }
  result.distance = path.length(interior);
  result.polyline.reserve(static_cast<std::size_t>(N + 2));
  for (int k = 0; k <= N + 1; ++k) result.polyline.push_back(path.node(interior, k));
  return result;
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& p) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).operatorSqrt();
}

Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& p) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).operatorInverseSqrt();
}

}  // namespace ctk
