#pragma once

#include <optional>
#include <string>
#include <vector>

#include "proxstep/scheme.hpp"

namespace proxstep {

/// A scenario plus the run parameters a config file or the builtin catalog
/// attaches to it.
struct ConfiguredScenario {
  Scenario scenario;
  std::optional<double> h;
  std::vector<double> h_list;
};

/// Parses a strict-schema JSON scenario (unknown keys rejected) and
/// validates the resulting scenario. Throws ConfigError on any schema or
/// parse problem.
ConfiguredScenario scenario_from_json_text(const std::string& text);

/// Reads and parses a scenario file. Throws ConfigError (also for I/O).
ConfiguredScenario load_scenario_file(const std::string& path);

// ---------------------------------------------------------------------------
// Builtin catalog
// ---------------------------------------------------------------------------

struct BuiltinInfo {
  std::string name;
  std::string description;
  double default_h = 1e-3;
  std::vector<double> default_h_list;
};

/// The named scenarios shipped with the library.
const std::vector<BuiltinInfo>& builtin_catalog();

bool is_builtin(const std::string& name);

/// Builds a builtin by name; "box-n-spheres" also accepts "box-<k>-spheres"
/// for a configurable sphere count. Throws ConfigError for unknown names.
ConfiguredScenario make_builtin(const std::string& name);

/// Resolves a CLI scenario argument: builtin name if it matches the catalog,
/// else a path to a scenario file.
ConfiguredScenario resolve_scenario(const std::string& name_or_path);

} // namespace proxstep
