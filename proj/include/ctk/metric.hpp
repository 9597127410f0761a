#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ctk/expr.hpp"

namespace ctk {

// Riemannian metric in a single global chart: M(x) = I, a constant SPD
// matrix P, or diag(m_1(x), ..., m_n(x)) with expression entries.
struct MetricSpec {
  enum class Kind { kEuclidean, kConstant, kDiagonalExpr };

  Kind kind = Kind::kEuclidean;
  Eigen::MatrixXd P;
  std::vector<Expr> diagonal;

  static MetricSpec euclidean() { return {}; }
  static MetricSpec constant(Eigen::MatrixXd p) {
    MetricSpec m;
    m.kind = Kind::kConstant;
    m.P = std::move(p);
    return m;
  }
  static MetricSpec diagonal_expr(std::vector<Expr> entries) {
    MetricSpec m;
    m.kind = Kind::kDiagonalExpr;
    m.diagonal = std::move(entries);
    return m;
  }

  // Flat metrics have constant coefficients in the chart.
  bool is_flat() const { return kind != Kind::kDiagonalExpr; }
};

std::string_view metric_kind_name(MetricSpec::Kind kind);

// M(x). Throws DomainError for a non-positive diagonal entry.
Eigen::MatrixXd metric_matrix(const MetricSpec& m, const Eigen::VectorXd& x);

// d/dt M(x(t)) along a direction xdot, i.e. sum_j dM/dx_j xdot_j. Zero for
// flat metrics.
Eigen::MatrixXd metric_derivative(const MetricSpec& m, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& xdot);

// sqrt(v^T M(x) v).
double metric_norm(const MetricSpec& m, const Eigen::VectorXd& x, const Eigen::VectorXd& v);

struct GeodesicOptions {
  int interior_nodes = 64;
  int max_iterations = 5000;
  double energy_tolerance = 1e-10;
  // Run the path optimizer even when a closed form is available.
  bool force_optimizer = false;
};

struct GeodesicResult {
  double distance = 0.0;
  std::vector<Eigen::VectorXd> polyline;
  bool converged = true;
  int iterations = 0;
};

// Geodesic distance between a and b. Closed form for flat metrics; otherwise
// minimizes the discrete path energy over a polyline and returns its length.
GeodesicResult geodesic_distance(const MetricSpec& m, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, const GeodesicOptions& opts = {});

// Symmetric square root and inverse square root of an SPD matrix.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& p);
Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& p);

}  // namespace ctk
