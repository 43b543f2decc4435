// Command line front end: scenario runs, convergence studies, assumption
// spot checks and the builtin scenario catalog.
//
// Exit codes: 0 success, 1 configuration error, 2 step failure (partial
// trajectory output is kept).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "proxstep/analysis.hpp"
#include "proxstep/scenario_config.hpp"
#include "proxstep/scheme.hpp"
#include "proxstep/trajectory_io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace proxstep;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStepFailure = 2;

int thread_cap(int runs) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) {
    cap = 1;
  }
  if (const char* env = std::getenv("PROXSTEP_THREADS")) {
    try {
      cap = std::max(1, std::stoi(env));
    } catch (...) {
      // ignore malformed values, keep hardware default
    }
  }
  return std::min(cap, std::max(1, runs));
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open output file: " + path.string());
  }
  out << contents;
}

int command_run(const std::string& scenario_arg, std::optional<double> h_flag,
                const std::string& out_dir) {
  const ConfiguredScenario configured = resolve_scenario(scenario_arg);
  std::optional<double> h = h_flag ? h_flag : configured.h;
  if (!h || !(*h > 0.0)) {
    throw ConfigError("no step size: pass --h or set \"h\" in the scenario");
  }

  fs::create_directories(out_dir);
  const SimulationResult result = simulate(configured.scenario, *h);

  write_file(fs::path(out_dir) / "trajectory.csv",
             trajectory_csv(result.trajectory));
  const DiagnosticsReport report =
      diagnose(result.trajectory, configured.scenario);
  write_file(fs::path(out_dir) / "diagnostics.json",
             diagnostics_json(report, configured.scenario.name, *h));

  if (!result.ok()) {
    std::cerr << "proxstep: " << *result.error
              << " (partial trajectory written to " << out_dir << ")\n";
    return kExitStepFailure;
  }
  std::cout << "wrote " << result.trajectory.records.size() << " records to "
            << (fs::path(out_dir) / "trajectory.csv").string() << "\n";
  return kExitOk;
}

int command_converge(const std::string& scenario_arg,
                     const std::vector<double>& h_list_flag,
                     const std::string& out_dir) {
  const ConfiguredScenario configured = resolve_scenario(scenario_arg);
  const std::vector<double>& h_list =
      h_list_flag.empty() ? configured.h_list : h_list_flag;
  if (h_list.size() < 2) {
    throw ConfigError("convergence study needs --h-list with at least two steps");
  }

  fs::create_directories(out_dir);
  ConvergenceTable table;
  try {
    table = convergence_study(configured.scenario, h_list,
                              thread_cap(static_cast<int>(h_list.size())));
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidScenarioError&) {
    throw;
  } catch (const Error& error) {
    std::cerr << "proxstep: " << error.what() << "\n";
    return kExitStepFailure;
  }

  std::ostringstream csv;
  write_convergence_csv(csv, table);
  write_file(fs::path(out_dir) / "convergence.csv", csv.str());
  write_file(fs::path(out_dir) / "convergence.json",
             convergence_json(table, configured.scenario.name));
  for (const ConvergenceRow& row : table.rows) {
    std::cout << "h=" << row.h << " dq_inf=" << row.dq_inf
              << " du_l1=" << row.du_l1 << " rate=" << row.rate << "\n";
  }
  if (!table.note.empty()) {
    std::cout << "note: " << table.note << "\n";
  }
  return kExitOk;
}

int command_check(const std::string& scenario_arg) {
  const ConfiguredScenario configured = resolve_scenario(scenario_arg);
  const Scenario& scenario = configured.scenario;

  // Sample feasible states along a coarse run of the scenario itself; the
  // scheme keeps grid configurations feasible, so these probe the set the
  // dynamics actually visits.
  std::vector<std::pair<double, Vec>> samples;
  samples.emplace_back(0.0, scenario.q0);
  const double h = configured.h.value_or(1e-3);
  const SimulationResult result = simulate(scenario, h);
  const auto& records = result.trajectory.records;
  const std::size_t stride = std::max<std::size_t>(1, records.size() / 16);
  for (std::size_t n = stride; n < records.size(); n += stride) {
    samples.emplace_back(records[n].t, records[n].q);
  }

  if (!scenario.constraints) {
    std::cout << "{\n  \"scenario\": \"" << scenario.name
              << "\",\n  \"note\": \"unconstrained scenario\"\n}\n";
    return kExitOk;
  }
  const AssumptionReport report =
      spot_check_assumptions(*scenario.constraints, samples, 64);
  std::cout << assumption_report_json(report, scenario.name) << "\n";
  return kExitOk;
}

int command_list_builtins() {
  for (const BuiltinInfo& info : builtin_catalog()) {
    std::cout << info.name << "\n    " << info.description << "\n    default h "
              << info.default_h << ", sweep";
    for (double h : info.default_h_list) {
      std::cout << " " << h;
    }
    std::cout << "\n";
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"prediction-correction time stepping for unilateral constraints"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);

  std::string scenario_arg;
  std::string out_dir = ".";
  std::optional<double> h_flag;
  std::vector<double> h_list_flag;

  CLI::App* run = app.add_subcommand("run", "simulate a scenario, write CSV + JSON");
  run->set_help_flag("--help", "print help");
  run->add_option("--scenario", scenario_arg, "builtin name or scenario file")
      ->required();
  run->add_option("--h", h_flag, "time step");
  run->add_option("--out", out_dir, "output directory");

  CLI::App* converge =
      app.add_subcommand("converge", "h-refinement convergence study");
  converge->set_help_flag("--help", "print help");
  converge->add_option("--scenario", scenario_arg, "builtin name or scenario file")
      ->required();
  converge
      ->add_option("--h-list", h_list_flag,
                   "comma-separated halving chain, e.g. 1e-2,5e-3,2.5e-3")
      ->delimiter(',');
  converge->add_option("--out", out_dir, "output directory");

  CLI::App* check =
      app.add_subcommand("check", "spot-check constraint regularity assumptions");
  check->add_option("--scenario", scenario_arg, "builtin name or scenario file")
      ->required();

  app.add_subcommand("list-builtins", "list the builtin scenario catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand("run")) {
      return command_run(scenario_arg, h_flag, out_dir);
    }
    if (app.got_subcommand("converge")) {
      return command_converge(scenario_arg, h_list_flag, out_dir);
    }
    if (app.got_subcommand("check")) {
      return command_check(scenario_arg);
    }
    return command_list_builtins();
  } catch (const ConfigError& error) {
    std::cerr << "proxstep: " << error.what() << "\n";
    return kExitConfig;
  } catch (const InvalidScenarioError& error) {
    std::cerr << "proxstep: " << error.what() << "\n";
    return kExitConfig;
  } catch (const Error& error) {
    std::cerr << "proxstep: " << error.what() << "\n";
    return kExitStepFailure;
  } catch (const std::exception& error) {
    std::cerr << "proxstep: " << error.what() << "\n";
    return kExitConfig;
  }
}
