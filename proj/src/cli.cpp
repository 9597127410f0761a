#include "ctk/cli.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctk/certify.hpp"
#include "ctk/errors.hpp"
#include "ctk/flf.hpp"
#include "ctk/krasovskii.hpp"
#include "ctk/lift.hpp"
#include "ctk/lipschitz.hpp"
#include "ctk/report.hpp"
#include "ctk/system.hpp"

namespace ctk {

namespace {

// Thrown for option values CLI11 cannot validate on its own.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct IntegratorArgs {
  std::string method = "rk45";
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();

  void add_to(CLI::App& app) {
    app.add_option("--method", method, "Integrator: rk45 (adaptive) or rk4 (fixed step)")
        ->check(CLI::IsMember({"rk45", "rk4"}))
        ->capture_default_str();
    app.add_option("--rel-tol", rel_tol, "Relative tolerance of the adaptive integrator")
        ->capture_default_str();
    app.add_option("--abs-tol", abs_tol, "Absolute tolerance of the adaptive integrator")
        ->capture_default_str();
    app.add_option("--max-step", max_step,
                   "Largest adaptive step; the step itself for rk4 (default 0.01)");
  }

  IntegratorConfig config() const {
    IntegratorConfig cfg;
    cfg.method = method == "rk4" ? IntegratorConfig::Method::kRk4 : IntegratorConfig::Method::kRk45;
    cfg.rel_tol = rel_tol;
    cfg.abs_tol = abs_tol;
    cfg.max_step = max_step;
    cfg.validate();
    return cfg;
  }
};

struct SamplingArgs {
  int samples = 200;
  int times = 3;
  std::uint64_t seed = 1;
  double t0 = 0.0;
  double horizon = 5.0;

  void add_to(CLI::App& app) {
    app.add_option("--samples", samples, "Sampled states")->capture_default_str();
    app.add_option("--times", times, "Sample times per state (time-varying systems)")
        ->capture_default_str();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--t0", t0, "Start of the time window")->capture_default_str();
    app.add_option("--horizon", horizon, "Length of the time window")->capture_default_str();
  }

  SamplePlan plan() const {
    SamplePlan p;
    p.seed = seed;
    p.states = samples;
    p.times = times;
    p.t0 = t0;
    p.horizon = horizon;
    p.validate();
    return p;
  }
};

struct OutputArgs {
  std::string out;
  std::string curves;
  bool fail_on_verdict = false;

  void add_to(CLI::App& app) {
    app.add_option("--out", out, "Report JSON path (default: standard output)");
    app.add_option("--curves", curves, "Decay-curve CSV path");
    app.add_flag("--fail-on-verdict", fail_on_verdict, "Exit 1 when the verdict is inconclusive");
  }
};

struct CheckArgs {
  std::string system;
  std::string mode;
  double rate = 0.0;
  double K = 1.0;
  double p = 2.0;
  std::string delta = "auto";
  std::string alpha;
  std::string flf = "integral";
  std::string norm = "two";
  int pairs = 20;
  int trajectories = 10;
  int grid_points = 101;
  double tol = 1e-9;
  double rate_threshold = 0.01;
  SamplingArgs sampling;
  IntegratorArgs integrator;
  OutputArgs output;
};

struct SimulateArgs {
  std::string system;
  std::string x0;
  std::string v0;
  double t0 = 0.0;
  double tf = 0.0;
  int points = 101;
  std::string out;
  IntegratorArgs integrator;
};

struct KrasovskiiArgs {
  std::string system;
  bool h_equals_f = false;
  std::string P;
  std::string Q;
  double rate = 0.0;
  double tol = 1e-9;
  double rate_threshold = 0.01;
  SamplingArgs sampling;
  IntegratorArgs integrator;
  OutputArgs output;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": '" + item + "' is not a number");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) {
      throw UsageError(std::string(what) + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

Eigen::VectorXd parse_vector(const std::string& text, const char* what, int n) {
  const auto values = parse_list(text, what);
  if (static_cast<int>(values.size()) != n) {
    throw UsageError(std::string(what) + " has " + std::to_string(values.size()) +
                     " entries but the system has " + std::to_string(n) + " states");
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), n);
}

// A number (1x1) or an array of equal-length rows.
Eigen::MatrixXd read_matrix_file(const std::string& path, int n) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  Eigen::MatrixXd m;
  if (j.is_number()) {
    m = Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  } else if (j.is_array() && !j.empty() && j[0].is_array()) {
    m.resize(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r) {
      if (!j[r].is_array() || j[r].size() != j[0].size()) {
        throw InputError(path + ": rows must have equal length");
      }
      for (std::size_t c = 0; c < j[r].size(); ++c) {
        if (!j[r][c].is_number()) throw InputError(path + ": entries must be numbers");
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
      }
    }
  } else {
    throw InputError(path + ": expected a number or an array of rows");
  }
  if (m.rows() != n || m.cols() != n) {
    throw InputError(path + ": expected a " + std::to_string(n) + "x" + std::to_string(n) +
                     " matrix");
  }
  return m;
}

std::vector<double> time_grid(const SystemDef& sys, const SamplePlan& plan) {
  if (!sys.time_varying() || plan.horizon == 0.0) return {plan.t0};
  return uniform_grid(plan.t0, plan.t0 + plan.horizon, 11);
}

LyapunovSummary summarize(const LyapunovCheck& c) {
  LyapunovSummary s;
  s.passed = c.passed;
  s.positivity_margin = c.positivity_margin;
  s.decay_rate = c.decay_rate;
  s.expected_rate = c.expected_rate;
  s.transport_residual = c.transport_residual;
  if (c.growth) {
    s.growth_k1 = c.growth->k1;
    s.growth_k2 = c.growth->k2;
    s.growth_q = c.growth->q;
  }
  return s;
}

CertReport run_flf(const SystemDef& sys, const CheckArgs& a, const SamplePlan& plan,
                   const IntegratorConfig& cfg, const CheckOptions& opts) {
  std::vector<std::string> notes;
  FlfSpec spec;
  std::optional<FlfBounds> bounds;
  ClassKSpec alpha;
  ConfigEcho extra;
  if (a.flf == "quadratic") {
    spec = FlfSpec::quadratic(sys.metric);
    // Contraction at rate lambda means L V <= -2 lambda V for V = v^T M v.
    alpha = a.rate > 0.0 ? ClassKSpec::linear(2.0 * a.rate) : ClassKSpec::zero();
  } else {
    double delta = 1.0;
    if (a.delta == "auto") {
      if (a.rate > 0.0) {
        delta = choose_delta(a.K, a.rate, a.p);
      } else {
        notes.push_back("--delta auto needs --rate > 0; using delta = 1");
      }
    } else {
      delta = parse_list(a.delta, "--delta").front();
    }
    spec = FlfSpec::integral_finite(a.p, delta, sys.metric);
    if (a.rate > 0.0) {
      const auto grid = time_grid(sys, plan);
      const LipschitzEstimate L = lipschitz_estimate(sys, grid, plan.states, plan.seed);
      extra["lipschitz"] = L.value;
      if (L.value > 0.0) {
        bounds = flf_sandwich_constants(L.value, a.rate, a.K, a.p, delta);
        if (bounds->delta_too_small) {
          notes.push_back("delta too small for a decrease estimate at the claimed K and rate");
        } else {
          alpha = ClassKSpec::linear(bounds->k);
        }
      }
    }
  }
  if (!a.alpha.empty()) alpha = parse_class_k(a.alpha);

  CertReport report = flf_decrease_certify(sys, spec, alpha, plan, cfg, opts, bounds);
  for (auto& n : notes) report.notes.push_back(std::move(n));
  for (auto& [k, v] : extra) report.config[k] = v;
  report.config["flf.form"] = a.flf;
  report.config["flf.K"] = a.K;
  report.config["rate"] = a.rate;
  return report;
}

CertReport run_matrix_measure(const SystemDef& sys, const CheckArgs& a, const SamplePlan& plan,
                              const IntegratorConfig& cfg) {
  MeasureNorm norm = MeasureNorm::kTwo;
  Eigen::MatrixXd P;
  if (a.norm == "one") {
    norm = MeasureNorm::kOne;
  } else if (a.norm == "inf") {
    norm = MeasureNorm::kInf;
  } else if (a.norm == "weighted") {
    if (sys.metric.kind != MetricSpec::Kind::kConstant) {
      throw UsageError("--norm weighted needs a constant metric.P in the system file");
    }
    norm = MeasureNorm::kWeighted;
    P = sys.metric.P;
  }
  const MeasureDecayReport m =
      matrix_measure_decay(sys, norm, P, plan, a.trajectories, cfg, a.grid_points);

  CertReport report;
  report.margin = m.max_measure + a.rate;
  report.samples_checked = static_cast<std::size_t>(plan.states) *
                           static_cast<std::size_t>(sys.time_varying() ? plan.times : 1);
  if (report.margin <= a.tol) {
    const double c = -m.max_measure;
    report.rate = RateEstimate{1.0, c, std::nullopt};
    if (c >= a.rate_threshold) {
      report.verdict = Verdict::kIES;
    } else if (m.max_measure <= a.tol) {
      report.verdict = Verdict::kIS;
    }
  }
  report.notes.push_back("measured decay rate of |f| along " + std::to_string(m.trajectories) +
                         " trajectories: " + format_number(m.measured_rate));
  report.curves = m.curves;
  report.config["mode"] = std::string("matrix-measure");
  report.config["norm"] = a.norm;
  report.config["rate"] = a.rate;
  report.config["tol"] = a.tol;
  report.config["rate_threshold"] = a.rate_threshold;
  report.config["measure.trajectories"] = static_cast<long long>(a.trajectories);
  report.config["measure.grid_points"] = static_cast<long long>(a.grid_points);
  echo_plan(report.config, plan, plan.box_for(sys));
  return report;
}

int emit(const CertReport& report, const OutputArgs& o, std::ostream& out) {
  const std::string text = report_json(report);
  if (o.out.empty()) {
    out << text;
  } else {
    write_text_file(o.out, text);
  }
  if (!o.curves.empty()) write_text_file(o.curves, curves_csv(report.curves));
  return o.fail_on_verdict && report.verdict == Verdict::kInconclusive ? kExitVerdict : kExitOk;
}

int run_check(const CheckArgs& a, std::ostream& out) {
  const SystemDef sys = parse_system_file(a.system);
  const SamplePlan plan = a.sampling.plan();
  const IntegratorConfig cfg = a.integrator.config();
  const CheckOptions opts{a.tol, a.rate_threshold};

  CertReport report;
  if (a.mode == "demidovich") {
    report = demidovich_check(sys, sys.metric, a.rate, plan, opts);
  } else if (a.mode == "flf") {
    report = run_flf(sys, a, plan, cfg, opts);
  } else if (a.mode == "empirical") {
    RateOptions ro;
    ro.pairs = a.pairs;
    ro.grid_points = a.grid_points;
    ro.rate_threshold = a.rate_threshold;
    report = incremental_rate_estimate(sys, plan, cfg, ro);
    report.config["pairs"] = static_cast<long long>(a.pairs);
    report.config["grid_points"] = static_cast<long long>(a.grid_points);
  } else {
    report = run_matrix_measure(sys, a, plan, cfg);
  }
  report.config["rate_threshold"] = a.rate_threshold;
  report.config["command"] = std::string("check");
  report.config["system.name"] = sys.name;
  echo_integrator(report.config, cfg);
  return emit(report, a.output, out);
}

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  const SystemDef sys = parse_system_file(a.system);
  const IntegratorConfig cfg = a.integrator.config();
  if (!(a.tf >= a.t0)) throw UsageError("--tf must not be before --t0");
  if (a.points < 2) throw UsageError("--points must be at least 2");
  const Eigen::VectorXd x0 = parse_vector(a.x0, "--x0", sys.n);
  const auto grid = uniform_grid(a.t0, a.tf, a.points);

  std::vector<Curve> curves;
  const bool lifted = !a.v0.empty();
  std::vector<Eigen::VectorXd> path;
  if (lifted) {
    const Eigen::VectorXd v0 = parse_vector(a.v0, "--v0", sys.n);
    path = a.tf > a.t0 ? sample_ode(complete_lift(sys).rhs(), pack({x0, v0}), grid, cfg)
                       : std::vector<Eigen::VectorXd>(grid.size(), pack({x0, v0}));
  } else {
    path = a.tf > a.t0 ? sample_ode(system_rhs(sys), x0, grid, cfg)
                       : std::vector<Eigen::VectorXd>(grid.size(), x0);
  }
  for (int i = 0; i < sys.n; ++i) curves.push_back({sys.state_names[static_cast<std::size_t>(i)], {}});
  if (lifted) {
    for (int i = 0; i < sys.n; ++i) {
      curves.push_back({"v." + sys.state_names[static_cast<std::size_t>(i)], {}});
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (Eigen::Index i = 0; i < path[g].size(); ++i) {
      curves[static_cast<std::size_t>(i)].points.emplace_back(grid[g], path[g](i));
    }
  }
  const std::string text = curves_csv(curves);
  if (a.out.empty()) {
    out << text;
  } else {
    write_text_file(a.out, text);
  }
  return kExitOk;
}

int run_krasovskii(const KrasovskiiArgs& a, std::ostream& out) {
  SystemDef sys = parse_system_file(a.system);
  if (a.h_equals_f) {
    if (sys.time_varying()) {
      throw PreconditionError("--h-equals-f needs a time-invariant f");
    }
    sys.h = sys.f;
  }
  const SamplePlan plan = a.sampling.plan();
  const IntegratorConfig cfg = a.integrator.config();
  const CheckOptions opts{a.tol, a.rate_threshold};
  if (a.P.empty() != a.Q.empty()) throw UsageError("--P and --Q must be given together");

  CertReport report;
  if (!a.P.empty()) {
    const Eigen::MatrixXd P = read_matrix_file(a.P, sys.n);
    const Eigen::MatrixXd Q = read_matrix_file(a.Q, sys.n);
    report = classical_krasovskii_check(sys, P, Q, plan, cfg, opts);
    report.config["mode"] = std::string("krasovskii-classical");
  } else {
    const BracketReport bracket = commutation_check(sys, plan);
    if (!bracket.commuting) {
      report.notes.push_back("h does not commute with f; W = V(x, h(x)) is not a candidate");
      report.margin = bracket.max_residual;
      report.samples_checked = bracket.samples;
      report.config["tol"] = a.tol;
      report.config["rate_threshold"] = a.rate_threshold;
      report.config["rate"] = a.rate;
      echo_plan(report.config, plan, plan.box_for(sys));
    } else {
      const FlfSpec spec = FlfSpec::quadratic(sys.metric);
      const double k = 2.0 * a.rate;
      const ClassKSpec alpha = k > 0.0 ? ClassKSpec::linear(k) : ClassKSpec::zero();
      report = flf_decrease_certify(sys, spec, alpha, plan, cfg, opts);
      const LyapunovCheck check = krasovskii_verify(sys, spec, k, plan, cfg);
      report.lyapunov = summarize(check);
      if (!check.passed) {
        report.verdict = Verdict::kInconclusive;
        report.notes.push_back("W = V(x, h(x)) failed the trajectory check (" +
                               std::to_string(check.violations.size()) + " violations)");
      }
      report.config["rate"] = a.rate;
    }
    report.bracket = BracketSummary{bracket.max_residual, bracket.commuting};
    report.config["mode"] = std::string("krasovskii-commuting");
  }
  report.config["command"] = std::string("krasovskii");
  report.config["system.name"] = sys.name;
  report.config["h_equals_f"] = a.h_equals_f;
  echo_integrator(report.config, cfg);
  return emit(report, a.output, out);
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Incremental stability analysis of ODE systems", "ctk"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(kToolVersion));

  CheckArgs check;
  CLI::App* check_cmd = app.add_subcommand("check", "Certify or estimate incremental stability");
  check_cmd->add_option("--system", check.system, "System file")->required();
  check_cmd->add_option("--mode", check.mode, "demidovich | flf | empirical | matrix-measure")
      ->required()
      ->check(CLI::IsMember({"demidovich", "flf", "empirical", "matrix-measure"}));
  check_cmd->add_option("--rate", check.rate, "Claimed contraction rate lambda")->capture_default_str();
  check_cmd->add_option("--K", check.K, "Claimed overshoot K >= 1 (flf mode)")->capture_default_str();
  check_cmd->add_option("--p", check.p, "FLF exponent (flf mode)")->capture_default_str();
  check_cmd->add_option("--delta", check.delta, "FLF window length or 'auto' (flf mode)")
      ->capture_default_str();
  check_cmd->add_option("--alpha", check.alpha,
                        "Decrease function zero | linear:a | power:a,q (flf mode; default derived "
                        "from --rate)");
  check_cmd->add_option("--flf", check.flf, "FLF form: integral or quadratic (flf mode)")
      ->check(CLI::IsMember({"integral", "quadratic"}))
      ->capture_default_str();
  check_cmd->add_option("--norm", check.norm, "one | two | inf | weighted (matrix-measure mode)")
      ->check(CLI::IsMember({"one", "two", "inf", "weighted"}))
      ->capture_default_str();
  check_cmd->add_option("--pairs", check.pairs, "Trajectory pairs (empirical mode)")
      ->capture_default_str();
  check_cmd->add_option("--trajectories", check.trajectories,
                        "Trajectories (matrix-measure mode)")
      ->capture_default_str();
  check_cmd->add_option("--grid-points", check.grid_points, "Time grid points per trajectory")
      ->capture_default_str();
  check_cmd->add_option("--tol", check.tol, "Slack on each sampled inequality")->capture_default_str();
  check_cmd->add_option("--rate-threshold", check.rate_threshold, "Smallest rate counted as decay")
      ->capture_default_str();
  check.sampling.add_to(*check_cmd);
  check.integrator.add_to(*check_cmd);
  check.output.add_to(*check_cmd);

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Integrate the system (lifted with --v0)");
  sim_cmd->add_option("--system", sim.system, "System file")->required();
  sim_cmd->add_option("--x0", sim.x0, "Initial state v1,v2,...")->required();
  sim_cmd->add_option("--v0", sim.v0, "Initial tangent vector; simulates the lifted system");
  sim_cmd->add_option("--t0", sim.t0, "Initial time")->capture_default_str();
  sim_cmd->add_option("--tf", sim.tf, "Final time")->required();
  sim_cmd->add_option("--points", sim.points, "Output grid points")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "CSV path (default: standard output)");
  sim.integrator.add_to(*sim_cmd);

  KrasovskiiArgs kr;
  CLI::App* kr_cmd = app.add_subcommand("krasovskii", "Krasovskii-type Lyapunov functions");
  kr_cmd->add_option("--system", kr.system, "System file")->required();
  kr_cmd->add_flag("--h-equals-f", kr.h_equals_f, "Use h = f (autonomous f)");
  kr_cmd->add_option("--P", kr.P, "JSON matrix file for P (classical check)");
  kr_cmd->add_option("--Q", kr.Q, "JSON matrix file for Q (classical check)");
  kr_cmd->add_option("--rate", kr.rate, "Claimed contraction rate lambda (commuting-h check)")
      ->capture_default_str();
  kr_cmd->add_option("--tol", kr.tol, "Slack on each sampled inequality")->capture_default_str();
  kr_cmd->add_option("--rate-threshold", kr.rate_threshold, "Smallest rate counted as decay")
      ->capture_default_str();
  kr.sampling.add_to(*kr_cmd);
  kr.integrator.add_to(*kr_cmd);
  kr.output.add_to(*kr_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (check_cmd->parsed()) return run_check(check, out);
    if (sim_cmd->parsed()) return run_simulate(sim, out);
    return run_krasovskii(kr, out);
  } catch (const IntegrationError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ctk::ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const PreconditionError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace ctk
