#include "ctk/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctk/errors.hpp"

namespace ctk {

namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) {
  return v ? number_or_null(*v) : json(nullptr);
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_or_null(v(i)));
  return out;
}

json config_json(const ConfigEcho& config) {
  json out = json::object();
  for (const auto& [key, value] : config) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            out[key] = number_or_null(v);
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            json arr = json::array();
            for (double d : v) arr.push_back(number_or_null(d));
            out[key] = arr;
          } else {
            out[key] = v;
          }
        },
        value);
  }
  return out;
}

void emit(const json& value, int depth, std::string& out) {
  const std::string indent(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string closing(static_cast<std::size_t>(2 * depth), ' ');
  switch (value.type()) {
    case json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      // nlohmann's default object type is an ordered std::map, so iteration is
      // already in sorted key order.
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += indent;
        out += json(it.key()).dump(-1, ' ', false, json::error_handler_t::replace);
        out += ": ";
        emit(it.value(), depth + 1, out);
      }
      out += "\n" + closing + "}";
      return;
    }
    case json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i > 0) out += ",\n";
        out += indent;
        emit(value[i], depth + 1, out);
      }
      out += "\n" + closing + "]";
      return;
    }
    case json::value_t::number_float: {
      const double d = value.get<double>();
      out += std::isfinite(d) ? format_number(d) : "null";
      return;
    }
    default:
      out += value.dump(-1, ' ', false, json::error_handler_t::replace);
      return;
  }
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  // "-0" would re-read as the integer 0.
  if (std::string_view(buf) == "-0") return "0";
  return buf;
}

json report_to_json(const CertReport& report) {
  json out = json::object();
  out["verdict"] = std::string(verdict_name(report.verdict));
  if (report.rate) {
    out["rate_estimate"] = {{"K", number_or_null(report.rate->K)},
                            {"lambda", number_or_null(report.rate->lambda)},
                            {"r_squared", optional_number(report.rate->r_squared)}};
  } else {
    out["rate_estimate"] = nullptr;
  }
  out["margin"] = number_or_null(report.margin);

  json violations = json::array();
  for (const Violation& v : report.violations) {
    violations.push_back({{"t", number_or_null(v.t)},
                          {"x", vector_json(v.x)},
                          {"v", vector_json(v.v)},
                          {"slack", number_or_null(v.slack)}});
  }
  out["violations"] = std::move(violations);

  if (report.bracket) {
    out["bracket"] = {{"max_residual", number_or_null(report.bracket->max_residual)},
                      {"commuting", report.bracket->commuting}};
  } else {
    out["bracket"] = nullptr;
  }

  if (report.flf) {
    out["flf"] = {{"kind", report.flf->kind},
                  {"p", number_or_null(report.flf->p)},
                  {"delta", optional_number(report.flf->delta)},
                  {"c1", optional_number(report.flf->c1)},
                  {"c2", optional_number(report.flf->c2)},
                  {"k", optional_number(report.flf->k)}};
  } else {
    out["flf"] = nullptr;
  }

  if (report.lyapunov) {
    const LyapunovSummary& l = *report.lyapunov;
    out["lyapunov"] = {{"passed", l.passed},
                       {"positivity_margin", number_or_null(l.positivity_margin)},
                       {"decay_rate", number_or_null(l.decay_rate)},
                       {"expected_rate", number_or_null(l.expected_rate)},
                       {"transport_residual", number_or_null(l.transport_residual)},
                       {"growth_k1", optional_number(l.growth_k1)},
                       {"growth_k2", optional_number(l.growth_k2)},
                       {"growth_q", optional_number(l.growth_q)}};
  } else {
    out["lyapunov"] = nullptr;
  }

  out["samples"] = {{"checked", report.samples_checked}, {"skipped", report.samples_skipped}};
  out["notes"] = report.notes;
  out["config"] = config_json(report.config);
  out["tool_version"] = std::string(kToolVersion);
  return out;
}

std::string canonical_json(const nlohmann::json& value) {
  std::string out;
  emit(value, 0, out);
  out += "\n";
  return out;
}

std::string report_json(const CertReport& report) { return canonical_json(report_to_json(report)); }

std::string curves_csv(const std::vector<Curve>& curves) {
  std::string out = "t,series_id,value\n";
  for (const Curve& c : curves) {
    for (const auto& [t, v] : c.points) {
      out += format_number(t);
      out += ",";
      out += c.series_id;
      out += ",";
      out += format_number(v);
      out += "\n";
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!file) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  if (file.bad()) throw IoError("failed reading " + path.string());
  return buf.str();
}

}  // namespace ctk
