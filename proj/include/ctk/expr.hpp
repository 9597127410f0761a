#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctk/dual.hpp"

namespace ctk {

enum class NodeKind {
  kConstant,
  kVariable,
  kTime,
  kNegate,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kFunction,
};

enum class Func { kSin, kCos, kTan, kExp, kLog, kSqrt, kTanh, kSinh, kCosh, kAtan };

// Immutable scalar expression over the state variables x1..xn and time t.
// Copies share the underlying tree, so an Expr is cheap to pass by value and
// safe to read from several threads.
class Expr {
 public:
  struct Node;

  Expr() = default;

  static Expr constant(double value, std::size_t offset = 0);
  // `index` is 1-based, matching the x1..xn naming of the DSL.
  static Expr variable(int index, std::size_t offset = 0);
  static Expr time(std::size_t offset = 0);
  static Expr negate(Expr operand, std::size_t offset = 0);
  static Expr binary(NodeKind op, Expr lhs, Expr rhs, std::size_t offset = 0);
  static Expr function(Func f, Expr arg, std::size_t offset = 0);

  bool empty() const { return node_ == nullptr; }
  NodeKind kind() const;
  double constant_value() const;
  int variable_index() const;
  Func function_id() const;
  std::size_t offset() const;
  Expr lhs() const;
  Expr rhs() const;

  // Largest variable index referenced, 0 when none.
  int max_variable() const;
  bool references_time() const;
  // True when the tree has no variable and no time leaf.
  bool is_constant() const;

  // Evaluates at state x and time t. Throws DomainError when an elementary
  // function leaves its domain. Instantiated for double and Dual.
  template <class T>
  T evaluate(std::span<const T> x, const T& t) const;

  // Fully parenthesized rendering that re-parses to a structurally identical
  // tree. `names` defaults to x1..xn.
  std::string to_string(std::span<const std::string> names = {}) const;

  friend bool structurally_equal(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

std::string_view function_name(Func f);

// Parses one expression. Identifiers resolve to entries of `names` (the
// declared state names), `t`, `pi`, or a function call.
Expr parse_expression(std::string_view src, std::span<const std::string> names);

// Same, with the default state names x1..xn.
Expr parse_expression(std::string_view src, int n);

double eval_expr(const Expr& e, std::span<const double> x, double t);

std::vector<std::string> default_state_names(int n);

}  // namespace ctk
