#include "ctk/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include "ctk/errors.hpp"

namespace ctk {

struct Expr::Node {
  NodeKind kind = NodeKind::kConstant;
  double value = 0.0;
  int index = 0;
  Func func = Func::kSin;
  std::size_t offset = 0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
  // Cached facts about the subtree, filled at construction.
  int max_var = 0;
  bool uses_time = false;
  // For kPow with a constant exponent: its value.
  std::optional<double> const_exponent;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

constexpr std::array<std::pair<std::string_view, Func>, 10> kFunctions{{
    {"sin", Func::kSin},
    {"cos", Func::kCos},
    {"tan", Func::kTan},
    {"exp", Func::kExp},
    {"log", Func::kLog},
    {"sqrt", Func::kSqrt},
    {"tanh", Func::kTanh},
    {"sinh", Func::kSinh},
    {"cosh", Func::kCosh},
    {"atan", Func::kAtan},
}};

std::optional<Func> lookup_function(std::string_view name) {
  for (const auto& [n, f] : kFunctions) {
    if (n == name) return f;
  }
  return std::nullopt;
}

// Integer exponents in [0, kMaxIntExponent] are evaluated by repeated
// multiplication and accept a negative base.
constexpr double kMaxIntExponent = 1024.0;

bool is_nonneg_int_exponent(double e) {
  return e >= 0.0 && e <= kMaxIntExponent && std::floor(e) == e;
}

template <class T>
T apply_function(Func f, const T& a, std::size_t offset) {
  using std::atan, std::cos, std::cosh, std::exp, std::log, std::sin,
      std::sinh, std::sqrt, std::tan, std::tanh;
  switch (f) {
    case Func::kSin: return sin(a);
    case Func::kCos: return cos(a);
    case Func::kTan: return tan(a);
    case Func::kExp: return exp(a);
    case Func::kLog:
      if (!(value_of(a) > 0.0)) throw DomainError("log of non-positive value", offset);
      return log(a);
    case Func::kSqrt:
      if (value_of(a) < 0.0) throw DomainError("sqrt of negative value", offset);
      return sqrt(a);
    case Func::kTanh: return tanh(a);
    case Func::kSinh: return sinh(a);
    case Func::kCosh: return cosh(a);
    case Func::kAtan: return atan(a);
  }
  return a;
}

template <class T>
T eval_node(const Expr::Node& n, std::span<const T> x, const T& t) {
  switch (n.kind) {
    case NodeKind::kConstant: return T(n.value);
    case NodeKind::kVariable: return x[static_cast<std::size_t>(n.index - 1)];
    case NodeKind::kTime: return t;
    case NodeKind::kNegate: return -eval_node(*n.lhs, x, t);
    case NodeKind::kAdd: return eval_node(*n.lhs, x, t) + eval_node(*n.rhs, x, t);
    case NodeKind::kSub: return eval_node(*n.lhs, x, t) - eval_node(*n.rhs, x, t);
    case NodeKind::kMul: return eval_node(*n.lhs, x, t) * eval_node(*n.rhs, x, t);
    case NodeKind::kDiv: {
      const T num = eval_node(*n.lhs, x, t);
      const T den = eval_node(*n.rhs, x, t);
      if (value_of(den) == 0.0) throw DomainError("division by zero", n.offset);
      return num / den;
    }
    case NodeKind::kPow: {
      const T base = eval_node(*n.lhs, x, t);
      if (n.const_exponent && is_nonneg_int_exponent(*n.const_exponent)) {
        return pow_int(base, static_cast<unsigned>(*n.const_exponent));
      }
      if (!(value_of(base) > 0.0)) {
        throw DomainError("non-integer or negative exponent needs a positive base",
                          n.offset);
      }
      return pow_pos(base, eval_node(*n.rhs, x, t));
    }
    case NodeKind::kFunction:
      return apply_function(n.func, eval_node(*n.lhs, x, t), n.offset);
  }
  return T(0.0);
}

NodePtr make_node(Expr::Node n) { return std::make_shared<const Expr::Node>(std::move(n)); }

// ---------------------------------------------------------------------------
// Lexer / recursive-descent parser.

enum class Tok { kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kCaret, kLParen, kRParen, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::size_t offset = 0;
  std::string_view text;
  double number = 0.0;
};

constexpr int kMaxDepth = 200;

class Parser {
 public:
  Parser(std::string_view src, std::span<const std::string> names)
      : src_(src), names_(names) {
    advance();
  }

  Expr parse() {
    Expr e = parse_expr();
    if (tok_.kind != Tok::kEnd) fail("unexpected token '" + std::string(tok_.text) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_.offset); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t offset) const {
    throw ParseError(msg, offset);
  }

  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::kEnd;
      return;
    }
    const char c = src_[pos_];
    auto single = [&](Tok k) {
      tok_.kind = k;
      tok_.text = src_.substr(pos_, 1);
      ++pos_;
    };
    switch (c) {
      case '+': single(Tok::kPlus); return;
      case '-': single(Tok::kMinus); return;
      case '*': single(Tok::kStar); return;
      case '/': single(Tok::kSlash); return;
      case '^': single(Tok::kCaret); return;
      case '(': single(Tok::kLParen); return;
      case ')': single(Tok::kRParen); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      tok_.kind = Tok::kIdent;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    fail_at("unexpected character", pos_);
  }

  void lex_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t count = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++count;
      }
      return count;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail_at("malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail_at("malformed exponent", start);
    }
    tok_.kind = Tok::kNumber;
    tok_.text = src_.substr(start, pos_ - start);
    const auto res = std::from_chars(tok_.text.data(), tok_.text.data() + tok_.text.size(),
                                     tok_.number);
    if (res.ec != std::errc() || !std::isfinite(tok_.number)) {
      fail_at("number out of range", start);
    }
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p(p) {
      if (++p.depth_ > kMaxDepth) p.fail("expression nested too deeply");
    }
    ~DepthGuard() { --p.depth_; }
    Parser& p;
  };

  // expr := term (("+"|"-") term)*
  Expr parse_expr() {
    DepthGuard guard(*this);
    Expr lhs = parse_term();
    while (tok_.kind == Tok::kPlus || tok_.kind == Tok::kMinus) {
      const NodeKind op = tok_.kind == Tok::kPlus ? NodeKind::kAdd : NodeKind::kSub;
      const std::size_t at = tok_.offset;
      advance();
      lhs = Expr::binary(op, lhs, parse_term(), at);
    }
    return lhs;
  }

  // term := unary (("*"|"/") unary)*
  Expr parse_term() {
    Expr lhs = parse_unary();
    while (tok_.kind == Tok::kStar || tok_.kind == Tok::kSlash) {
      const NodeKind op = tok_.kind == Tok::kStar ? NodeKind::kMul : NodeKind::kDiv;
      const std::size_t at = tok_.offset;
      advance();
      lhs = Expr::binary(op, lhs, parse_unary(), at);
    }
    return lhs;
  }

  // unary := "-" unary | power
  Expr parse_unary() {
    DepthGuard guard(*this);
    if (tok_.kind == Tok::kMinus) {
      const std::size_t at = tok_.offset;
      advance();
      return Expr::negate(parse_unary(), at);
    }
    return parse_power();
  }

  // power := atom ("^" unary)?   -- right associative, binds tighter than
  // the prefix minus: -x^2 is -(x^2), 2^-x is 2^(-x).
  Expr parse_power() {
    Expr base = parse_atom();
    if (tok_.kind == Tok::kCaret) {
      const std::size_t at = tok_.offset;
      advance();
      return Expr::binary(NodeKind::kPow, base, parse_unary(), at);
    }
    return base;
  }

  Expr parse_atom() {
    const Token tok = tok_;
    switch (tok.kind) {
      case Tok::kNumber:
        advance();
        return Expr::constant(tok.number, tok.offset);
      case Tok::kLParen: {
        advance();
        Expr inner = parse_expr();
        if (tok_.kind != Tok::kRParen) fail("expected ')'");
        advance();
        return inner;
      }
      case Tok::kIdent:
        advance();
        return resolve_identifier(tok);
      case Tok::kEnd:
        fail("unexpected end of input");
      default:
        fail("expected operand, found '" + std::string(tok.text) + "'");
    }
  }

  Expr resolve_identifier(const Token& tok) {
    if (tok_.kind == Tok::kLParen) {
      const auto f = lookup_function(tok.text);
      if (!f) fail_at("unknown function '" + std::string(tok.text) + "'", tok.offset);
      advance();
      Expr arg = parse_expr();
      if (tok_.kind != Tok::kRParen) fail("expected ')'");
      advance();
      return Expr::function(*f, arg, tok.offset);
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == tok.text) return Expr::variable(static_cast<int>(i) + 1, tok.offset);
    }
    if (tok.text == "t") return Expr::time(tok.offset);
    if (tok.text == "pi") return Expr::constant(std::numbers::pi, tok.offset);
    if (lookup_function(tok.text)) {
      fail_at("function '" + std::string(tok.text) + "' needs an argument", tok.offset);
    }
    if (is_indexed_x(tok.text)) {
      fail_at("variable index out of range: '" + std::string(tok.text) + "' (state dimension " +
                  std::to_string(names_.size()) + ")",
              tok.offset);
    }
    fail_at("unknown identifier '" + std::string(tok.text) + "'", tok.offset);
  }

  static bool is_indexed_x(std::string_view s) {
    if (s.size() < 2 || s[0] != 'x') return false;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
  }

  std::string_view src_;
  std::span<const std::string> names_;
  std::size_t pos_ = 0;
  Token tok_;
  int depth_ = 0;
};

void append_number(std::string& out, double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

void render(const Expr& e, std::span<const std::string> names, std::string& out) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      append_number(out, e.constant_value());
      return;
    case NodeKind::kVariable: {
      const auto i = static_cast<std::size_t>(e.variable_index() - 1);
      if (i < names.size()) {
        out += names[i];
      } else {
        out += "x" + std::to_string(e.variable_index());
      }
      return;
    }
    case NodeKind::kTime:
      out += "t";
      return;
    case NodeKind::kNegate:
      out += "(-";
      render(e.lhs(), names, out);
      out += ")";
      return;
    case NodeKind::kFunction:
      out += function_name(e.function_id());
      out += "(";
      render(e.lhs(), names, out);
      out += ")";
      return;
    default: {
      static constexpr std::string_view kOps[] = {" + ", " - ", " * ", " / ", "^"};
      const auto op = static_cast<int>(e.kind()) - static_cast<int>(NodeKind::kAdd);
      out += "(";
      render(e.lhs(), names, out);
      out += kOps[op];
      render(e.rhs(), names, out);
      out += ")";
      return;
    }
  }
}

bool nodes_equal(const Expr::Node* a, const Expr::Node* b) {
  if (a == b) return true;
  if (a == nullptr || b == nullptr) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::kConstant: return a->value == b->value;
    case NodeKind::kVariable: return a->index == b->index;
    case NodeKind::kTime: return true;
    case NodeKind::kFunction:
      return a->func == b->func && nodes_equal(a->lhs.get(), b->lhs.get());
    default:
      return nodes_equal(a->lhs.get(), b->lhs.get()) && nodes_equal(a->rhs.get(), b->rhs.get());
  }
}

}  // namespace

Expr Expr::constant(double value, std::size_t offset) {
  Node n;
  n.kind = NodeKind::kConstant;
  n.value = value;
  n.offset = offset;
  return Expr(make_node(std::move(n)));
}

Expr Expr::variable(int index, std::size_t offset) {
  Node n;
  n.kind = NodeKind::kVariable;
  n.index = index;
  n.offset = offset;
  n.max_var = index;
  return Expr(make_node(std::move(n)));
}

Expr Expr::time(std::size_t offset) {
  Node n;
  n.kind = NodeKind::kTime;
  n.offset = offset;
  n.uses_time = true;
  return Expr(make_node(std::move(n)));
}

Expr Expr::negate(Expr operand, std::size_t offset) {
  Node n;
  n.kind = NodeKind::kNegate;
  n.offset = offset;
  n.max_var = operand.node_->max_var;
  n.uses_time = operand.node_->uses_time;
  n.lhs = std::move(operand.node_);
  return Expr(make_node(std::move(n)));
}

Expr Expr::binary(NodeKind op, Expr lhs, Expr rhs, std::size_t offset) {
  Node n;
  n.kind = op;
  n.offset = offset;
  n.max_var = std::max(lhs.node_->max_var, rhs.node_->max_var);
  n.uses_time = lhs.node_->uses_time || rhs.node_->uses_time;
  if (op == NodeKind::kPow && rhs.is_constant()) {
    try {
      n.const_exponent = rhs.evaluate<double>({}, 0.0);
    } catch (const DomainError&) {
      // Left unset; evaluation reports the error at its source node.
    }
  }
  n.lhs = std::move(lhs.node_);
  n.rhs = std::move(rhs.node_);
  return Expr(make_node(std::move(n)));
}

Expr Expr::function(Func f, Expr arg, std::size_t offset) {
  Node n;
  n.kind = NodeKind::kFunction;
  n.func = f;
  n.offset = offset;
  n.max_var = arg.node_->max_var;
  n.uses_time = arg.node_->uses_time;
  n.lhs = std::move(arg.node_);
  return Expr(make_node(std::move(n)));
}

NodeKind Expr::kind() const { return node_->kind; }
double Expr::constant_value() const { return node_->value; }
int Expr::variable_index() const { return node_->index; }
Func Expr::function_id() const { return node_->func; }
std::size_t Expr::offset() const { return node_->offset; }
Expr Expr::lhs() const { return Expr(node_->lhs); }
Expr Expr::rhs() const { return Expr(node_->rhs); }
int Expr::max_variable() const { return node_ ? node_->max_var : 0; }
bool Expr::references_time() const { return node_ && node_->uses_time; }
bool Expr::is_constant() const { return max_variable() == 0 && !references_time(); }

template <class T>
T Expr::evaluate(std::span<const T> x, const T& t) const {
  return eval_node<T>(*node_, x, t);
}

template double Expr::evaluate<double>(std::span<const double>, const double&) const;
template Dual Expr::evaluate<Dual>(std::span<const Dual>, const Dual&) const;

std::string Expr::to_string(std::span<const std::string> names) const {
  std::string out;
  render(*this, names, out);
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  return nodes_equal(a.node_.get(), b.node_.get());
}

std::string_view function_name(Func f) {
  for (const auto& [n, g] : kFunctions) {
    if (g == f) return n;
  }
  return "?";
}

Expr parse_expression(std::string_view src, std::span<const std::string> names) {
  return Parser(src, names).parse();
}

Expr parse_expression(std::string_view src, int n) {
  const auto names = default_state_names(n);
  return parse_expression(src, std::span<const std::string>(names));
}

double eval_expr(const Expr& e, std::span<const double> x, double t) {
  if (e.max_variable() > static_cast<int>(x.size())) {
    throw PreconditionError("expression references x" + std::to_string(e.max_variable()) +
                            " but the state has dimension " + std::to_string(x.size()));
  }
  return e.evaluate<double>(x, t);
}

std::vector<std::string> default_state_names(int n) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

}  // namespace ctk
