#include "ctk/report.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "ctk/errors.hpp"

namespace ctk {
namespace {

CertReport sample_report() {
  CertReport r;
  r.verdict = Verdict::kIES;
  r.rate = RateEstimate{1.25, 0.5, 0.987654321012345};
  r.margin = -0.123456789012345678;
  r.violations.push_back({0.5, Eigen::Vector2d(1.0, -2.0), Eigen::Vector2d(0.6, 0.8), 3e-7});
  r.bracket = BracketSummary{1e-17, true};
  r.flf = FlfSummary{"integral-finite", 2.0, 1.0, 0.25, 0.5, 2.0};
  r.config["seed"] = 7LL;
  r.config["tol"] = 1e-9;
  r.config["mode"] = std::string("flf");
  r.config["domain.lower"] = std::vector<double>{-1.0, -2.5};
  r.config["flag"] = true;
  r.config["nan"] = std::numeric_limits<double>::quiet_NaN();
  r.samples_checked = 10;
  r.notes.push_back("quote \" and backslash \\");
  return r;
}

TEST(Report, TopLevelKeys) {
  const nlohmann::json j = report_to_json(CertReport{});
  for (const char* key : {"verdict", "rate_estimate", "margin", "violations", "bracket", "flf",
                          "lyapunov", "samples", "notes", "config", "tool_version"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j.size(), 11u);
  EXPECT_EQ(j["verdict"], "inconclusive");
  EXPECT_EQ(j["tool_version"], "0.1.0");
  EXPECT_TRUE(j["rate_estimate"].is_null());
}

TEST(Report, EmptyViolationsSerializeAsEmptyArray) {
  const std::string text = report_json(CertReport{});
  EXPECT_NE(text.find("\"violations\": []"), std::string::npos);
}

TEST(Report, CanonicalFormat) {
  const std::string text = report_json(sample_report());
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text.back(), '\n');
  EXPECT_NE(text.find("\"margin\": -0.123456789012,"), std::string::npos);
  EXPECT_NE(text.find("\"tol\": 1e-09"), std::string::npos);
  EXPECT_NE(text.find("\"nan\": null"), std::string::npos);
  EXPECT_NE(text.find("\"seed\": 7"), std::string::npos);
  // Keys appear in sorted order at every level.
  EXPECT_LT(text.find("\"bracket\""), text.find("\"config\""));
  EXPECT_LT(text.find("\"config\""), text.find("\"flf\""));
  EXPECT_LT(text.find("\"domain.lower\""), text.find("\"flag\""));
  EXPECT_LT(text.find("\"samples\""), text.find("\"tool_version\""));
  EXPECT_LT(text.find("\"tool_version\""), text.find("\"verdict\""));
}

TEST(Report, RoundTripIsByteIdentical) {
  const std::string first = report_json(sample_report());
  const std::string second = canonical_json(nlohmann::json::parse(first));
  EXPECT_EQ(first, second);
  EXPECT_EQ(canonical_json(nlohmann::json::parse(second)), second);
}

TEST(Report, NumberFormatting) {
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(1e20), "1e+20");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  const nlohmann::json j = {{"a", -0.0}, {"b", 1e308 * 10}, {"c", 2.5}};
  EXPECT_EQ(canonical_json(j), "{\n  \"a\": 0,\n  \"b\": null,\n  \"c\": 2.5\n}\n");
  EXPECT_EQ(canonical_json(nlohmann::json::object()), "{}\n");
}

TEST(Report, ViolationFields) {
  const nlohmann::json j = report_to_json(sample_report());
  const auto& v = j["violations"][0];
  EXPECT_EQ(v["t"], 0.5);
  EXPECT_EQ(v["x"], nlohmann::json::array({1.0, -2.0}));
  EXPECT_EQ(v["v"], nlohmann::json::array({0.6, 0.8}));
  EXPECT_EQ(v["slack"], 3e-7);
  EXPECT_EQ(j["flf"]["delta"], 1.0);
  EXPECT_EQ(j["samples"]["checked"], 10);
  EXPECT_EQ(j["rate_estimate"]["K"], 1.25);
}

TEST(Report, CurvesCsv) {
  std::vector<Curve> curves{{"a", {{0.0, 1.0}, {0.5, 0.25}}}, {"b", {{0.0, 2.0}}}};
  EXPECT_EQ(curves_csv(curves), "t,series_id,value\n0,a,1\n0.5,a,0.25\n0,b,2\n");
  EXPECT_EQ(curves_csv({}), "t,series_id,value\n");
}

TEST(Report, ScalarDecayDistanceCurve) {
  // For dx/dt = -x every pair distance is d(0) e^{-t}.
  const SystemDef sys = make_system({"-x1"});
  SamplePlan plan;
  plan.horizon = 3.0;
  const CertReport r = incremental_rate_estimate(sys, plan);
  ASSERT_FALSE(r.curves.empty());
  for (const Curve& c : r.curves) {
    const double d0 = c.points.front().second;
    for (const auto& [t, d] : c.points) EXPECT_NEAR(d, d0 * std::exp(-t), 1e-7 * d0);
  }
  const std::string csv = curves_csv(r.curves);
  EXPECT_EQ(csv.rfind("t,series_id,value\n", 0), 0u);
}

TEST(Report, FileHelpers) {
  const auto dir = std::filesystem::temp_directory_path() / "ctk_report_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "r.json";
  write_text_file(path, "abc\n");
  EXPECT_EQ(read_text_file(path), "abc\n");
  EXPECT_THROW(read_text_file(dir / "missing.json"), IoError);
  EXPECT_THROW(write_text_file(dir / "no" / "such" / "dir.json", "x"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ctk
