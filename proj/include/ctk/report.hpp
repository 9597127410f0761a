#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctk/certify.hpp"

namespace ctk {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Structured form of the report: verdict, rate_estimate, margin, violations,
// bracket, flf, lyapunov, samples, notes, config, tool_version. Absent
// optional sections are null.
nlohmann::json report_to_json(const CertReport& report);

// Sorted keys, two-space indent, floats as %.12g, non-finite numbers as null,
// trailing newline. Parsing the output and writing it again is byte-identical.
std::string canonical_json(const nlohmann::json& value);

std::string report_json(const CertReport& report);

// Long format with header "t,series_id,value"; one row per curve point.
std::string curves_csv(const std::vector<Curve>& curves);

// %.12g, with "nan", "inf" and "-inf" for non-finite values.
std::string format_number(double value);

// Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ctk
