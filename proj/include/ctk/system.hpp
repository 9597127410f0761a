#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ctk/expr.hpp"
#include "ctk/metric.hpp"

namespace ctk {

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
  double diameter() const { return (upper - lower).norm(); }
};

// dx/dt = f(x, t) together with the optional commuting companion field h(x),
// the Riemannian metric, and the region of interest. Immutable once parsed.
struct SystemDef {
  std::string name = "unnamed";
  int n = 0;
  std::vector<std::string> state_names;
  std::vector<Expr> f;
  std::optional<std::vector<Expr>> h;
  MetricSpec metric;
  Box domain;
  std::optional<Eigen::VectorXd> equilibrium;

  bool time_varying() const;
};

SystemDef parse_system_text(std::string_view text);
SystemDef parse_system_file(const std::filesystem::path& path);

// Builds and validates a system from expression strings; names default to
// x1..xn and the domain to [-1, 1]^n.
SystemDef make_system(const std::vector<std::string>& f,
                      std::optional<std::vector<std::string>> h = std::nullopt,
                      MetricSpec metric = MetricSpec::euclidean(),
                      std::optional<Box> domain = std::nullopt);

// Field evaluation helpers shared by every analysis.
void eval_field(std::span<const Expr> f, std::span<const double> x, double t,
                std::span<double> out);
Eigen::VectorXd eval_field(std::span<const Expr> f, const Eigen::VectorXd& x, double t);

// Exact Jacobian by one dual-number pass per coordinate direction.
Eigen::MatrixXd jacobian_ad(std::span<const Expr> f, const Eigen::VectorXd& x, double t);

// J(x,t) v by a single dual pass seeded with v. Writes f(x,t) to `value` when
// it is non-empty.
void jacobian_vector_product(std::span<const Expr> f, std::span<const double> x, double t,
                             std::span<const double> v, std::span<double> jv,
                             std::span<double> value = {});

}  // namespace ctk
