#include "ctk/system.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ctk/errors.hpp"

namespace ctk {

namespace {

using nlohmann::json;

struct Entry {
  json value;
  std::size_t offset = 0;  // start of the value text
};

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

bool is_reserved(std::string_view s) {
  static constexpr std::string_view kReserved[] = {"t",    "pi",  "sin",  "cos",  "tan", "exp",
                                                   "log",  "sqrt", "tanh", "sinh", "cosh", "atan"};
  return std::find(std::begin(kReserved), std::end(kReserved), s) != std::end(kReserved);
}

// Strips a '#' comment that is not inside a string literal.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

// Net bracket depth outside string literals.
int bracket_balance(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::map<std::string, Entry> split_entries(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::size_t line_start = pos;
    std::string_view line = strip_comment(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (trim(line).empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_start);
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError("missing key", line_start);

    std::string value(line.substr(eq + 1));
    // Arrays may continue over several lines until the brackets balance.
    while (bracket_balance(value) > 0 && pos < text.size()) {
      eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      value += ' ';
      value += strip_comment(text.substr(pos, eol - pos));
      pos = eol + 1;
    }
    const std::size_t value_offset = line_start + eq + 1;
    if (entries.count(key) != 0) throw ParseError("duplicate key '" + key + "'", line_start);

    Entry entry;
    entry.offset = value_offset;
    try {
      entry.value = json::parse(value);
    } catch (const json::parse_error& e) {
      const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
      throw ParseError("malformed value for '" + key + "'", value_offset + at);
    }
    entries.emplace(key, std::move(entry));
  }
  return entries;
}

std::vector<std::string> string_array(const Entry& e, const std::string& key) {
  if (!e.value.is_array()) throw ParseError("'" + key + "' must be an array of strings", e.offset);
  std::vector<std::string> out;
  for (const auto& item : e.value) {
    if (!item.is_string()) throw ParseError("'" + key + "' must contain strings", e.offset);
    out.push_back(item.get<std::string>());
  }
  return out;
}

Eigen::VectorXd number_array(const Entry& e, const std::string& key) {
  if (!e.value.is_array()) throw ParseError("'" + key + "' must be an array of numbers", e.offset);
  Eigen::VectorXd out(static_cast<Eigen::Index>(e.value.size()));
  for (std::size_t i = 0; i < e.value.size(); ++i) {
    if (!e.value[i].is_number()) throw ParseError("'" + key + "' must contain numbers", e.offset);
    out(static_cast<Eigen::Index>(i)) = e.value[i].get<double>();
  }
  return out;
}

Eigen::MatrixXd number_matrix(const Entry& e, const std::string& key) {
  if (!e.value.is_array() || e.value.empty()) {
    throw ParseError("'" + key + "' must be a nested array of numbers", e.offset);
  }
  const auto rows = static_cast<Eigen::Index>(e.value.size());
  const auto cols = e.value[0].is_array() ? static_cast<Eigen::Index>(e.value[0].size()) : 0;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = e.value[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError("'" + key + "' rows must be arrays of equal length", e.offset);
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) throw ParseError("'" + key + "' must contain numbers", e.offset);
      out(i, j) = v.get<double>();
    }
  }
  return out;
}

std::vector<Expr> parse_exprs(const std::vector<std::string>& src,
                              const std::vector<std::string>& names, std::size_t offset,
                              const std::string& key) {
  std::vector<Expr> out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    try {
      out.push_back(parse_expression(src[i], std::span<const std::string>(names)));
    } catch (const ParseError& e) {
      throw ParseError(key + "[" + std::to_string(i) + "] \"" + src[i] + "\": " + e.what(),
                       offset);
    }
  }
  return out;
}

void validate_constant_metric(const Eigen::MatrixXd& p, int n) {
  if (p.rows() != n || p.cols() != n) {
    throw InputError("metric.P must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if (((p - p.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale) {
    throw InputError("metric.P is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo > 0.0)) {
    std::ostringstream msg;
    msg << "metric.P is not positive definite (eigenvalue " << lo << ")";
    throw InputError(msg.str());
  }
}

// Checks m_i(x) > 0 at the box corners, the center and pseudo-random points.
void validate_diagonal_metric(const std::vector<Expr>& diag, const Box& box) {
  const auto n = box.dim();
  std::vector<Eigen::VectorXd> points;
  points.push_back(0.5 * (box.lower + box.upper));
  if (n <= 10) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Eigen::VectorXd c(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        c(i) = (mask >> i) & 1u ? box.upper(i) : box.lower(i);
      }
      points.push_back(c);
    }
  }
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 256; ++k) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
    }
    points.push_back(p);
  }
  for (const auto& p : points) {
    for (std::size_t i = 0; i < diag.size(); ++i) {
      const double v = diag[i].evaluate<double>(std::span<const double>(p.data(), p.size()), 0.0);
      if (!(v > 0.0)) {
        std::ostringstream msg;
        msg << "metric.m[" << i << "] is not positive on the domain (value " << v << ")";
        throw InputError(msg.str());
      }
    }
  }
}

void validate(SystemDef& sys) {
  const int n = sys.n;
  if (n <= 0) throw InputError("state dimension must be positive");
  if (static_cast<int>(sys.f.size()) != n) {
    throw InputError("f has " + std::to_string(sys.f.size()) + " entries, state dimension is " +
                     std::to_string(n));
  }
  if (sys.h) {
    if (static_cast<int>(sys.h->size()) != n) throw InputError("h dimension mismatch");
    for (const auto& e : *sys.h) {
      if (e.references_time()) throw InputError("h must be time invariant");
    }
  }
  if (sys.domain.lower.size() != n || sys.domain.upper.size() != n) {
    throw InputError("domain dimension mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (!(sys.domain.lower(i) < sys.domain.upper(i))) {
      throw InputError("domain.lower must be below domain.upper in every coordinate");
    }
  }
  if (sys.equilibrium && sys.equilibrium->size() != n) {
    throw InputError("equilibrium dimension mismatch");
  }
  switch (sys.metric.kind) {
    case MetricSpec::Kind::kEuclidean: break;
    case MetricSpec::Kind::kConstant: validate_constant_metric(sys.metric.P, n); break;
    case MetricSpec::Kind::kDiagonalExpr:
      if (static_cast<int>(sys.metric.diagonal.size()) != n) {
        throw InputError("metric.m dimension mismatch");
      }
      for (const auto& e : sys.metric.diagonal) {
        if (e.references_time()) throw InputError("metric.m must be time invariant");
      }
      validate_diagonal_metric(sys.metric.diagonal, sys.domain);
      break;
  }
}

}  // namespace

bool SystemDef::time_varying() const {
  return std::any_of(f.begin(), f.end(), [](const Expr& e) { return e.references_time(); });
}

SystemDef parse_system_text(std::string_view text) {
  auto entries = split_entries(text);
  static const char* kKnown[] = {"name",          "state",         "f",           "h",
                                 "metric.kind",   "metric.P",      "metric.m",    "domain.lower",
                                 "domain.upper",  "equilibrium"};
  for (const auto& [key, entry] : entries) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ParseError("unknown key '" + key + "'", entry.offset);
    }
  }

  SystemDef sys;
  if (auto it = entries.find("name"); it != entries.end()) {
    if (!it->second.value.is_string()) throw ParseError("'name' must be a string", it->second.offset);
    sys.name = it->second.value.get<std::string>();
  }

  auto f_it = entries.find("f");
  if (f_it == entries.end()) throw ParseError("missing required key 'f'", text.size());
  const auto f_src = string_array(f_it->second, "f");

  if (auto it = entries.find("state"); it != entries.end()) {
    sys.state_names = string_array(it->second, "state");
    for (std::size_t i = 0; i < sys.state_names.size(); ++i) {
      const auto& s = sys.state_names[i];
      if (!is_identifier(s) || is_reserved(s)) {
        throw ParseError("invalid state name '" + s + "'", it->second.offset);
      }
      if (std::find(sys.state_names.begin(), sys.state_names.begin() + static_cast<long>(i), s) !=
          sys.state_names.begin() + static_cast<long>(i)) {
        throw ParseError("duplicate state name '" + s + "'", it->second.offset);
      }
    }
  } else {
    sys.state_names = default_state_names(static_cast<int>(f_src.size()));
  }
  sys.n = static_cast<int>(sys.state_names.size());
  sys.f = parse_exprs(f_src, sys.state_names, f_it->second.offset, "f");

  if (auto it = entries.find("h"); it != entries.end()) {
    sys.h = parse_exprs(string_array(it->second, "h"), sys.state_names, it->second.offset, "h");
  }

  sys.domain.lower = Eigen::VectorXd::Constant(sys.n, -1.0);
  sys.domain.upper = Eigen::VectorXd::Constant(sys.n, 1.0);
  if (auto it = entries.find("domain.lower"); it != entries.end()) {
    sys.domain.lower = number_array(it->second, "domain.lower");
  }
  if (auto it = entries.find("domain.upper"); it != entries.end()) {
    sys.domain.upper = number_array(it->second, "domain.upper");
  }
  if (auto it = entries.find("equilibrium"); it != entries.end()) {
    sys.equilibrium = number_array(it->second, "equilibrium");
  }

  std::string kind;
  if (auto it = entries.find("metric.kind"); it != entries.end()) {
    if (!it->second.value.is_string()) {
      throw ParseError("'metric.kind' must be a string", it->second.offset);
    }
    kind = it->second.value.get<std::string>();
  } else if (entries.count("metric.P") != 0) {
    kind = "constant";
  } else if (entries.count("metric.m") != 0) {
    kind = "expr";
  } else {
    kind = "euclidean";
  }
  if (kind == "euclidean") {
    sys.metric = MetricSpec::euclidean();
  } else if (kind == "constant") {
    auto it = entries.find("metric.P");
    if (it == entries.end()) throw InputError("metric.kind = \"constant\" requires metric.P");
    sys.metric = MetricSpec::constant(number_matrix(it->second, "metric.P"));
  } else if (kind == "expr") {
    auto it = entries.find("metric.m");
    if (it == entries.end()) throw InputError("metric.kind = \"expr\" requires metric.m");
    sys.metric = MetricSpec::diagonal_expr(
        parse_exprs(string_array(it->second, "metric.m"), sys.state_names, it->second.offset,
                    "metric.m"));
  } else {
    throw InputError("unknown metric.kind '" + kind + "'");
  }

  validate(sys);
  return sys;
}

SystemDef parse_system_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open system file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system_text(buf.str());
}

SystemDef make_system(const std::vector<std::string>& f,
                      std::optional<std::vector<std::string>> h, MetricSpec metric,
                      std::optional<Box> domain) {
  SystemDef sys;
  sys.n = static_cast<int>(f.size());
  sys.state_names = default_state_names(sys.n);
  sys.f = parse_exprs(f, sys.state_names, 0, "f");
  if (h) sys.h = parse_exprs(*h, sys.state_names, 0, "h");
  sys.metric = std::move(metric);
  if (domain) {
    sys.domain = *domain;
  } else {
    sys.domain.lower = Eigen::VectorXd::Constant(sys.n, -1.0);
    sys.domain.upper = Eigen::VectorXd::Constant(sys.n, 1.0);
  }
  validate(sys);
  return sys;
}

void eval_field(std::span<const Expr> f, std::span<const double> x, double t,
                std::span<double> out) {
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].evaluate<double>(x, t);
}

Eigen::VectorXd eval_field(std::span<const Expr> f, const Eigen::VectorXd& x, double t) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(f.size()));
  eval_field(f, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), t,
             std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

Eigen::MatrixXd jacobian_ad(std::span<const Expr> f, const Eigen::VectorXd& x, double t) {
  const auto n = x.size();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(f.size()), n);
  std::vector<Dual> xd(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      xd[static_cast<std::size_t>(k)] = Dual(x(k), k == j ? 1.0 : 0.0);
    }
    const Dual td(t, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
      jac(static_cast<Eigen::Index>(i), j) =
          f[i].evaluate<Dual>(std::span<const Dual>(xd), td).deriv;
    }
  }
  return jac;
}

void jacobian_vector_product(std::span<const Expr> f, std::span<const double> x, double t,
                             std::span<const double> v, std::span<double> jv,
                             std::span<double> value) {
  constexpr std::size_t kInline = 16;
  Dual inline_buf[kInline];
  std::vector<Dual> heap;
  Dual* xd = inline_buf;
  if (x.size() > kInline) {
    heap.resize(x.size());
    xd = heap.data();
  }
  for (std::size_t k = 0; k < x.size(); ++k) xd[k] = Dual(x[k], v[k]);
  const std::span<const Dual> xs(xd, x.size());
  const Dual td(t, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Dual r = f[i].evaluate<Dual>(xs, td);
    jv[i] = r.deriv;
    if (!value.empty()) value[i] = r.value;
  }
}

}  // namespace ctk
