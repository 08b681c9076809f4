// mkvsim: simulate McKean-Vlasov particle systems and run the experiment
// suite (averaging, chaos-rate, refinement, coefficient verification).
//
// Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
// 4 verification bound failure.
#include <CLI11.hpp>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "mkv/expr.hpp"
#include "mkv/lab.hpp"
#include "mkv/model.hpp"
#include "mkv/probe.hpp"
#include "mkv/solver.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

struct CommonOptions {
  std::string scenario = "example_4_1";
  std::uint64_t seed = 0;
  std::size_t particles = 100;
  std::size_t steps = 1000;
  std::optional<double> eps;
  std::optional<double> horizon;
  std::string out_dir = ".";
  unsigned threads = 0;  // 0 -> hardware concurrency
  std::string format = "csv";
  std::size_t replications = 0;  // 0 -> subcommand default

  unsigned resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
  }
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--scenario", opt.scenario,
                  "Builtin scenario name or path to a JSON config");
  cmd->add_option("--seed", opt.seed, "Base RNG seed");
  cmd->add_option("--particles", opt.particles, "Interacting particle count");
  cmd->add_option("--steps", opt.steps, "Euler steps over the horizon");
  cmd->add_option("--eps", opt.eps, "Time-scale parameter override");
  cmd->add_option("--horizon", opt.horizon, "Time horizon override")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", opt.out_dir, "Output directory");
  cmd->add_option("--threads", opt.threads,
                  "Worker threads (default: available cores)");
  cmd->add_option("--format", opt.format, "Report format echoed to stdout")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--replications", opt.replications,
                  "Monte Carlo replications (experiment commands)");
}

std::string format_sig(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a_hash(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const std::string& data) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a_hash(data));
  return buf;
}

// Tracks written files so the manifest can list paths and content hashes.
class OutputWriter {
 public:
  explicit OutputWriter(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw mkv::ConfigError("cannot write output file " + path.string());
    }
    out << content;
    files_.push_back({{"path", name}, {"hash", hash_hex(content)}});
  }

  void write_manifest(const nlohmann::json& resolved_config,
                      std::uint64_t seed, const std::string& started) {
    nlohmann::json manifest = {
        {"tool", "mkvsim"},         {"version", kVersion},
        {"seed", seed},             {"started", started},
        {"finished", iso_timestamp()},
        {"config", resolved_config}, {"outputs", files_},
    };
    // Written last so a complete manifest implies complete outputs; the
    // rename makes the final write atomic on POSIX filesystems.
    const auto tmp = dir_ / "manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << manifest.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir_ / "manifest.json");
  }

 private:
  std::filesystem::path dir_;
  nlohmann::json files_ = nlohmann::json::array();
};

struct LoadedConfig {
  mkv::ScenarioOrPair scenario;
  nlohmann::json raw;  // full config file content (empty for builtins)
};

LoadedConfig load_scenario(const CommonOptions& opt) {
  namespace fs = std::filesystem;
  if (opt.scenario.find('/') != std::string::npos ||
      opt.scenario.ends_with(".json") || fs::exists(opt.scenario)) {
    std::ifstream in(opt.scenario);
    if (!in) {
      throw mkv::ConfigError("cannot read config file " + opt.scenario);
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw mkv::ConfigError("config " + opt.scenario + ": " + e.what());
    }
    LoadedConfig cfg{mkv::scenario_from_json(j), std::move(j)};
    if (opt.horizon) {
      if (auto* s = std::get_if<mkv::Scenario>(&cfg.scenario)) {
        s->horizon = *opt.horizon;
      } else {
        auto& pair = std::get<mkv::AveragedPair>(cfg.scenario);
        pair.fast.horizon = pair.averaged.horizon = *opt.horizon;
      }
    }
    return cfg;
  }
  std::map<std::string, double> params;
  if (opt.eps) params["eps"] = *opt.eps;
  if (opt.horizon) params["T"] = *opt.horizon;
  return {mkv::builtin_scenario(opt.scenario, params),
          nlohmann::json::object()};
}

const mkv::Scenario& pick_scenario(const mkv::ScenarioOrPair& sp,
                                   bool prefer_fast) {
  if (const auto* s = std::get_if<mkv::Scenario>(&sp)) return *s;
  const auto& pair = std::get<mkv::AveragedPair>(sp);
  return prefer_fast ? pair.fast : pair.averaged;
}

nlohmann::json resolved_common(const CommonOptions& opt,
                               const std::string& command) {
  return {{"command", command},
          {"scenario", opt.scenario},
          {"seed", opt.seed},
          {"particles", opt.particles},
          {"steps", opt.steps},
          {"eps", opt.eps ? nlohmann::json(*opt.eps) : nlohmann::json()},
          {"horizon",
           opt.horizon ? nlohmann::json(*opt.horizon) : nlohmann::json()},
          {"threads", opt.resolved_threads()},
          {"format", opt.format}};
}

void emit_report(const mkv::ExperimentReport& report, const CommonOptions& opt,
                 OutputWriter& out) {
  const std::string json_body = report.to_json().dump(2) + "\n";
  const std::string csv_body = report.to_csv();
  out.write("report.json", json_body);
  out.write("report.csv", csv_body);
  std::cout << (opt.format == "json" ? json_body : csv_body);
}

int cmd_simulate(const CommonOptions& opt) {
  const std::string started = iso_timestamp();
  const LoadedConfig cfg = load_scenario(opt);
  mkv::Scenario scenario = pick_scenario(cfg.scenario, /*prefer_fast=*/true);
  if (opt.eps && scenario.eps) scenario.eps = *opt.eps;

  mkv::SolverConfig solver;
  solver.steps = opt.steps;
  solver.particles = opt.particles;
  solver.threads = opt.resolved_threads();
  const mkv::Trajectory traj = mkv::simulate(scenario, solver, opt.seed);

  std::string csv = "time,particle_id";
  for (std::size_t c = 1; c <= traj.dim; ++c) {
    csv += ",x" + std::to_string(c);
  }
  csv += '\n';
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    for (std::size_t i = 0; i < traj.particles; ++i) {
      csv += format_sig(traj.times[k]) + ',' + std::to_string(i);
      for (std::size_t c = 0; c < traj.dim; ++c) {
        csv += ',' + format_sig(traj.value(k, i, c));
      }
      csv += '\n';
    }
  }

  OutputWriter out(opt.out_dir);
  out.write("trajectory.csv", csv);
  nlohmann::json resolved = resolved_common(opt, "simulate");
  resolved["scenario_name"] = scenario.name;
  if (!cfg.raw.empty()) resolved["config_file"] = cfg.raw;
  out.write_manifest(resolved, opt.seed, started);
  return 0;
}

int cmd_average(const CommonOptions& opt) {
  const std::string started = iso_timestamp();
  const LoadedConfig cfg = load_scenario(opt);
  const auto* pair = std::get_if<mkv::AveragedPair>(&cfg.scenario);
  if (!pair) {
    throw mkv::ConfigError(
        "average: scenario must provide a fast/averaged pair "
        "(builtin example_4_1 does)");
  }

  mkv::ExperimentPlan plan;
  plan.kind = mkv::ExperimentKind::averaging;
  plan.eps_grid = {0.01, 0.001};
  plan.replications = opt.replications ? opt.replications : 20;
  plan.base_seed = opt.seed;
  plan.particles = opt.particles;
  plan.steps = opt.steps;
  plan.threads = opt.resolved_threads();
  if (cfg.raw.contains("experiment")) {
    const auto& e = cfg.raw.at("experiment");
    plan.eps_grid = e.value("eps_grid", plan.eps_grid);
    plan.replications = e.value("replications", plan.replications);
  }
  if (opt.eps) plan.eps_grid = {*opt.eps};

  const mkv::ExperimentReport report = mkv::run_averaging(*pair, plan);
  OutputWriter out(opt.out_dir);
  emit_report(report, opt, out);
  nlohmann::json resolved = resolved_common(opt, "average");
  resolved["eps_grid"] = plan.eps_grid;
  resolved["replications"] = plan.replications;
  out.write_manifest(resolved, opt.seed, started);
  return 0;
}

int cmd_chaos(const CommonOptions& opt) {
  const std::string started = iso_timestamp();
  const LoadedConfig cfg = load_scenario(opt);
  const mkv::Scenario& scenario =
      pick_scenario(cfg.scenario, /*prefer_fast=*/false);

  mkv::ExperimentPlan plan;
  plan.kind = mkv::ExperimentKind::chaos;
  plan.particle_grid = {50, 100, 200, 400, 800};
  plan.reference_particles = 10000;
  plan.replications = opt.replications ? opt.replications : 10;
  plan.base_seed = opt.seed;
  plan.steps = opt.steps;
  plan.threads = opt.resolved_threads();
  if (cfg.raw.contains("experiment")) {
    const auto& e = cfg.raw.at("experiment");
    plan.particle_grid = e.value("particle_grid", plan.particle_grid);
    plan.reference_particles =
        e.value("reference_particles", plan.reference_particles);
    plan.replications = e.value("replications", plan.replications);
  }

  const mkv::ExperimentReport report = mkv::run_chaos(scenario, plan);
  OutputWriter out(opt.out_dir);
  emit_report(report, opt, out);
  nlohmann::json resolved = resolved_common(opt, "chaos");
  resolved["particle_grid"] = plan.particle_grid;
  resolved["reference_particles"] = plan.reference_particles;
  resolved["replications"] = plan.replications;
  out.write_manifest(resolved, opt.seed, started);
  return 0;
}

int cmd_refine(const CommonOptions& opt) {
  const std::string started = iso_timestamp();
  const LoadedConfig cfg = load_scenario(opt);
  const mkv::Scenario& scenario =
      pick_scenario(cfg.scenario, /*prefer_fast=*/false);

  mkv::ExperimentPlan plan;
  plan.kind = mkv::ExperimentKind::refinement;
  plan.step_grid = {50, 100, 200, 400};
  plan.replications = opt.replications ? opt.replications : 4;
  plan.base_seed = opt.seed;
  plan.particles = opt.particles;
  plan.threads = opt.resolved_threads();
  plan.kappa = scenario.kappa;
  if (cfg.raw.contains("experiment")) {
    const auto& e = cfg.raw.at("experiment");
    plan.step_grid = e.value("step_grid", plan.step_grid);
    plan.replications = e.value("replications", plan.replications);
    plan.kappa = e.value("kappa", plan.kappa);
  }

  const mkv::ExperimentReport report = mkv::run_refinement(scenario, plan);
  OutputWriter out(opt.out_dir);
  emit_report(report, opt, out);
  nlohmann::json resolved = resolved_common(opt, "refine");
  resolved["step_grid"] = plan.step_grid;
  resolved["replications"] = plan.replications;
  resolved["kappa"] = plan.kappa;
  out.write_manifest(resolved, opt.seed, started);
  return 0;
}

int cmd_verify(const CommonOptions& opt,
               const std::vector<std::string>& bound_flags) {
  const std::string started = iso_timestamp();
  const LoadedConfig cfg = load_scenario(opt);
  const mkv::Scenario& scenario =
      pick_scenario(cfg.scenario, /*prefer_fast=*/false);

  mkv::ProbeConfig probe;
  probe.seed = opt.seed;
  std::map<std::string, double> bounds;
  if (cfg.raw.contains("verify")) {
    const auto& v = cfg.raw.at("verify");
    probe.radius = v.value("radius", probe.radius);
    probe.sample_count = v.value("sample_count", probe.sample_count);
    probe.tolerance = v.value("tolerance", probe.tolerance);
    for (const auto& [key, val] :
         v.value("bounds", nlohmann::json::object()).items()) {
      bounds[key] = val.get<double>();
    }
  }
  if (bounds.empty()) {
    const double r2 = probe.radius * probe.radius;
    if (scenario.name == "remark_2_1_drift") {
      bounds["one_sided_drift"] = 3.0 * r2;
    } else if (scenario.name == "example_4_1_averaged") {
      bounds["one_sided_drift"] = 1.0 + r2;
      bounds["kappa"] = 6.0;
    }
  }
  for (const std::string& flag : bound_flags) {
    const auto sep = flag.find('=');
    if (sep == std::string::npos) {
      throw mkv::ConfigError("verify: --bound expects name=value, got '" +
                             flag + "'");
    }
    try {
      bounds[flag.substr(0, sep)] = std::stod(flag.substr(sep + 1));
    } catch (const std::exception&) {
      throw mkv::ConfigError("verify: bad bound value in '" + flag + "'");
    }
  }
  if (bounds.empty()) {
    throw mkv::ConfigError(
        "verify: no declared bounds (use --bound name=value or a config "
        "file with a verify section)");
  }

  const mkv::ProbeReport report = mkv::run_probes(scenario, probe, bounds);
  const nlohmann::json report_json = probe_report_to_json(report, probe);
  const std::string body = report_json.dump(2) + "\n";

  OutputWriter out(opt.out_dir);
  out.write("verify_report.json", body);
  std::cout << body;
  nlohmann::json resolved = resolved_common(opt, "verify");
  resolved["bounds"] = bounds;
  resolved["radius"] = probe.radius;
  out.write_manifest(resolved, opt.seed, started);
  if (!report.all_passed) {
    std::cerr << "verify: declared bound check failed" << std::endl;
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"McKean-Vlasov particle simulator and experiment harness"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::vector<std::string> bound_flags;

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run one particle simulation and write the trajectory");
  CLI::App* average = app.add_subcommand(
      "average", "Averaging-error study across an eps grid");
  CLI::App* chaos = app.add_subcommand(
      "chaos", "Propagation-of-chaos rate study across particle counts");
  CLI::App* refine = app.add_subcommand(
      "refine", "Grid-refinement convergence study");
  CLI::App* verify = app.add_subcommand(
      "verify", "Probe coefficient conditions against declared bounds");
  for (CLI::App* cmd : {simulate, average, chaos, refine, verify}) {
    add_common_flags(cmd, opt);
  }
  verify->add_option("--bound", bound_flags,
                     "Declared bound as name=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opt);
    if (average->parsed()) return cmd_average(opt);
    if (chaos->parsed()) return cmd_chaos(opt);
    if (refine->parsed()) return cmd_refine(opt);
    if (verify->parsed()) return cmd_verify(opt, bound_flags);
  } catch (const mkv::DivergenceError& e) {
    std::cerr << "mkvsim: divergence at particle " << e.particle << ", step "
              << e.step << ": " << e.what() << std::endl;
    return 3;
  } catch (const mkv::ConfigError& e) {
    std::cerr << "mkvsim: " << e.what() << std::endl;
    return 2;
  } catch (const mkv::ParseError& e) {
    std::cerr << "mkvsim: expression error: " << e.what() << std::endl;
    return 2;
  } catch (const mkv::EvalError& e) {
    std::cerr << "mkvsim: evaluation error: " << e.what() << std::endl;
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mkvsim: config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mkvsim: " << e.what() << std::endl;
    return 2;
  }
  return 2;
}
