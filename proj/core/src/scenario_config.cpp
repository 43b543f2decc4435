#include "proxstep/scenario_config.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "proxstep/particles.hpp"

namespace proxstep {

namespace {

using nlohmann::json;

void require_keys(const json& object, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (const auto& [key, unused] : object.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
  }
}

double number_at(const json& object, const std::string& key,
                 const std::string& where) {
  if (!object.contains(key) || !object[key].is_number()) {
    throw ConfigError("missing or non-numeric \"" + key + "\" in " + where);
  }
  return object[key].get<double>();
}

Vec vector_at(const json& value, const std::string& where) {
  if (!value.is_array()) {
    throw ConfigError(where + " must be an array of numbers");
  }
  Vec result(value.size());
  for (std::size_t k = 0; k < value.size(); ++k) {
    if (!value[k].is_number()) {
      throw ConfigError(where + " must contain only numbers");
    }
    result[static_cast<int>(k)] = value[k].get<double>();
  }
  return result;
}

ForceField parse_force(const json& spec, int dimension,
                       std::shared_ptr<const SphereSystem> spheres) {
  if (!spec.is_object() || !spec.contains("kind")) {
    throw ConfigError("force must be an object with a \"kind\"");
  }
  const std::string kind = spec["kind"].get<std::string>();

  if (kind == "zero") {
    require_keys(spec, "force", {"kind"});
    return {};
  }
  if (kind == "constant") {
    require_keys(spec, "force", {"kind", "value"});
    Vec value = vector_at(spec.at("value"), "force.value");
    if (value.size() != dimension) {
      throw ConfigError("force.value size does not match dimension");
    }
    return [value](double, const Vec&) { return value; };
  }
  if (kind == "affine") {
    require_keys(spec, "force", {"kind", "c0", "c1"});
    Vec c0 = vector_at(spec.at("c0"), "force.c0");
    Vec c1 = vector_at(spec.at("c1"), "force.c1");
    if (c0.size() != dimension || c1.size() != dimension) {
      throw ConfigError("force.c0 / force.c1 size does not match dimension");
    }
    return [c0, c1](double t, const Vec&) -> Vec { return c0 + t * c1; };
  }
  if (kind == "gravity") {
    require_keys(spec, "force", {"kind", "g"});
    Vec g = vector_at(spec.at("g"), "force.g");
    if (spheres) {
      if (g.size() != 3) {
        throw ConfigError("gravity for particles takes a 3-vector");
      }
      Vec force(dimension);
      for (int i = 0; i < spheres->count(); ++i) {
        force.segment<3>(3 * i) = spheres->mass(i) * g;
      }
      return [force](double, const Vec&) { return force; };
    }
    if (g.size() != dimension) {
      throw ConfigError("force.g size does not match dimension");
    }
    return [g](double, const Vec&) { return g; };
  }
  throw ConfigError("unknown force kind \"" + kind + "\"");
}

} // namespace

// ---------------------------------------------------------------------------
// JSON parsing (strict)
// ---------------------------------------------------------------------------

ConfiguredScenario scenario_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& error) {
    throw ConfigError(std::string("scenario JSON parse error: ") + error.what());
  }
  if (!root.is_object()) {
    throw ConfigError("scenario file must hold one JSON object");
  }
  require_keys(root, "scenario",
               {"name", "dimension", "constraints", "particles", "force", "q0",
                "u0", "horizon", "h", "h_list", "restitution", "masses",
                "solver", "screening", "adaptive_force_average"});

  ConfiguredScenario configured;
  Scenario& scenario = configured.scenario;

  if (root.contains("name")) {
    scenario.name = root["name"].get<std::string>();
  }
  scenario.horizon = number_at(root, "horizon", "scenario");

  // --- particles block -----------------------------------------------------
  std::shared_ptr<const SphereSystem> spheres;
  std::vector<std::shared_ptr<const ConstraintSystem>> parts;
  if (root.contains("particles")) {
    const json& block = root["particles"];
    require_keys(block, "particles",
                 {"positions", "velocities", "radii", "masses", "box"});
    if (root.contains("q0") || root.contains("u0") || root.contains("masses")) {
      throw ConfigError(
          "with a particles block, use positions/velocities/masses inside it");
    }
    if (!block.contains("positions") || !block["positions"].is_array() ||
        block["positions"].empty()) {
      throw ConfigError("particles.positions must be a nonempty array");
    }
    const int n = static_cast<int>(block["positions"].size());

    std::vector<RadiusProfile> radii;
    if (!block.contains("radii") || !block["radii"].is_array() ||
        static_cast<int>(block["radii"].size()) != n) {
      throw ConfigError("particles.radii must list one entry per particle");
    }
    for (const json& r : block["radii"]) {
      if (r.is_number()) {
        radii.push_back({r.get<double>(), 0.0});
      } else if (r.is_object()) {
        require_keys(r, "particles.radii[]", {"value", "rate"});
        RadiusProfile profile;
        profile.value = number_at(r, "value", "particles.radii[]");
        profile.rate = r.contains("rate") ? r["rate"].get<double>() : 0.0;
        radii.push_back(profile);
      } else {
        throw ConfigError("particles.radii entries must be numbers or objects");
      }
    }

    std::vector<double> masses(n, 1.0);
    if (block.contains("masses")) {
      const Vec m = vector_at(block["masses"], "particles.masses");
      if (m.size() != n) {
        throw ConfigError("particles.masses must list one entry per particle");
      }
      for (int i = 0; i < n; ++i) {
        masses[i] = m[i];
      }
    }

    spheres = std::make_shared<SphereSystem>(std::move(radii), std::move(masses),
                                             scenario.horizon);
    scenario.dimension = 3 * n;
    scenario.metric = spheres->mass_metric();

    scenario.q0 = Vec::Zero(scenario.dimension);
    for (int i = 0; i < n; ++i) {
      const Vec position = vector_at(block["positions"][i], "particles.positions[]");
      if (position.size() != 3) {
        throw ConfigError("particle positions must be 3-vectors");
      }
      scenario.q0.segment<3>(3 * i) = position;
    }
    scenario.u0 = Vec::Zero(scenario.dimension);
    if (block.contains("velocities")) {
      if (!block["velocities"].is_array() ||
          static_cast<int>(block["velocities"].size()) != n) {
        throw ConfigError("particles.velocities must list one entry per particle");
      }
      for (int i = 0; i < n; ++i) {
        const Vec velocity =
            vector_at(block["velocities"][i], "particles.velocities[]");
        if (velocity.size() != 3) {
          throw ConfigError("particle velocities must be 3-vectors");
        }
        scenario.u0.segment<3>(3 * i) = velocity;
      }
    }

    if (n >= 2) {
      parts.push_back(non_overlap_constraints(spheres));
    }
    if (block.contains("box")) {
      const json& box_spec = block["box"];
      require_keys(box_spec, "particles.box", {"lo", "hi"});
      BoxBounds box;
      auto parse_faces = [&](const char* key,
                             std::array<std::optional<double>, 3>& faces) {
        if (!box_spec.contains(key)) {
          return;
        }
        const json& arr = box_spec[key];
        if (!arr.is_array() || arr.size() != 3) {
          throw ConfigError("particles.box bounds must be 3-element arrays");
        }
        for (int axis = 0; axis < 3; ++axis) {
          if (arr[axis].is_null()) {
            continue;
          }
          if (!arr[axis].is_number()) {
            throw ConfigError("particles.box bounds must be numbers or null");
          }
          faces[axis] = arr[axis].get<double>();
        }
      };
      parse_faces("lo", box.lo);
      parse_faces("hi", box.hi);
      parts.push_back(box_wall_constraints(spheres, box));
    }

    if (root.contains("dimension") &&
        root["dimension"].get<int>() != scenario.dimension) {
      throw ConfigError("dimension disagrees with the particles block");
    }
  } else {
    if (!root.contains("dimension")) {
      throw ConfigError("scenario needs a dimension (or a particles block)");
    }
    scenario.dimension = root["dimension"].get<int>();
    if (!root.contains("q0") || !root.contains("u0")) {
      throw ConfigError("scenario needs q0 and u0");
    }
    scenario.q0 = vector_at(root["q0"], "q0");
    scenario.u0 = vector_at(root["u0"], "u0");
    if (root.contains("masses")) {
      scenario.metric = MassMetric(vector_at(root["masses"], "masses"));
    }
  }

  // --- constraint blocks ----------------------------------------------------
  if (root.contains("constraints")) {
    if (!root["constraints"].is_array()) {
      throw ConfigError("constraints must be an array");
    }
    std::vector<AffineWall> walls;
    for (const json& entry : root["constraints"]) {
      if (!entry.is_object() || !entry.contains("kind")) {
        throw ConfigError("constraint entries must be objects with a \"kind\"");
      }
      const std::string kind = entry["kind"].get<std::string>();
      if (kind != "affine") {
        throw ConfigError("unknown constraint kind \"" + kind +
                          "\" (file-loadable kinds: affine; sphere contacts come "
                          "from the particles block)");
      }
      require_keys(entry, "constraints[]", {"kind", "a", "b", "c"});
      AffineWall wall;
      wall.normal = vector_at(entry.at("a"), "constraints[].a");
      if (wall.normal.size() != scenario.dimension) {
        throw ConfigError("constraint normal size does not match dimension");
      }
      wall.offset = entry.contains("b") ? entry["b"].get<double>() : 0.0;
      wall.drift = entry.contains("c") ? entry["c"].get<double>() : 0.0;
      walls.push_back(std::move(wall));
    }
    if (!walls.empty()) {
      parts.push_back(make_affine_walls(scenario.dimension, std::move(walls)));
    }
  }
  if (!parts.empty()) {
    scenario.constraints = combine_systems(std::move(parts));
  }

  // --- force, run parameters -------------------------------------------------
  if (root.contains("force")) {
    scenario.force = parse_force(root["force"], scenario.dimension, spheres);
  }
  if (root.contains("restitution")) {
    scenario.restitution = root["restitution"].get<double>();
  }
  if (root.contains("solver")) {
    const json& solver = root["solver"];
    require_keys(solver, "solver", {"tolerance", "max_sweeps"});
    if (solver.contains("tolerance")) {
      scenario.solver.tolerance = solver["tolerance"].get<double>();
    }
    if (solver.contains("max_sweeps")) {
      scenario.solver.max_sweeps = solver["max_sweeps"].get<int>();
    }
  }
  if (root.contains("screening")) {
    const json& screening = root["screening"];
    require_keys(screening, "screening",
                 {"enabled", "velocity_cap", "gradient_bound", "margin"});
    scenario.screening.enabled =
        screening.contains("enabled") && screening["enabled"].get<bool>();
    if (screening.contains("velocity_cap")) {
      scenario.screening.velocity_cap = screening["velocity_cap"].get<double>();
    }
    if (screening.contains("gradient_bound")) {
      scenario.screening.gradient_bound = screening["gradient_bound"].get<double>();
    }
    if (screening.contains("margin")) {
      scenario.screening.margin = screening["margin"].get<double>();
    }
  }
  if (root.contains("adaptive_force_average")) {
    scenario.adaptive_force_average = root["adaptive_force_average"].get<bool>();
  }
  if (root.contains("h")) {
    configured.h = root["h"].get<double>();
  }
  if (root.contains("h_list")) {
    const Vec list = vector_at(root["h_list"], "h_list");
    for (int k = 0; k < list.size(); ++k) {
      configured.h_list.push_back(list[k]);
    }
  }

  try {
    validate(scenario);
  } catch (const Error& error) {
    throw ConfigError(std::string("invalid scenario: ") + error.what());
  }
  return configured;
}

ConfiguredScenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open scenario file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_json_text(buffer.str());
}

// ---------------------------------------------------------------------------
// Builtin catalog
// ---------------------------------------------------------------------------

namespace {

const std::vector<double> kDefaultSweep = {1e-2, 5e-3, 2.5e-3, 1.25e-3};

ConfiguredScenario make_bouncing_ball() {
  ConfiguredScenario configured;
  Scenario& s = configured.scenario;
  s.name = "bouncing-ball";
  s.dimension = 1;
  s.constraints = make_affine_walls(1, {AffineWall{Vec::Ones(1), 0.0, 0.0}});
  s.force = [](double, const Vec&) { return -Vec::Ones(1); };
  s.q0 = Vec::Ones(1);
  s.u0 = Vec::Zero(1);
  s.horizon = 2.0;
  configured.h = 1e-3;
  configured.h_list = kDefaultSweep;
  validate(s);
  return configured;
}

ConfiguredScenario make_two_ball() {
  ConfiguredScenario configured;
  Scenario& s = configured.scenario;
  s.name = "two-ball";
  auto spheres = std::make_shared<SphereSystem>(
      std::vector<RadiusProfile>{{1.0, 0.0}, {1.0, 0.0}},
      std::vector<double>{1.0, 1.0}, 3.0);
  s.dimension = 6;
  s.metric = spheres->mass_metric();
  s.constraints = non_overlap_constraints(spheres);
  s.q0 = Vec::Zero(6);
  s.q0 << -2.0, 0.0, 0.0, 2.0, 0.0, 0.0;
  s.u0 = Vec::Zero(6);
  s.u0 << 1.0, 0.0, 0.0, -1.0, 0.0, 0.0;
  s.horizon = 3.0;
  configured.h = 1e-3;
  configured.h_list = kDefaultSweep;
  validate(s);
  return configured;
}

ConfiguredScenario make_resting_sphere() {
  ConfiguredScenario configured;
  Scenario& s = configured.scenario;
  s.name = "resting-sphere";
  auto spheres = std::make_shared<SphereSystem>(
      std::vector<RadiusProfile>{{1.0, 0.0}}, std::vector<double>{1.0}, 2.0);
  s.dimension = 3;
  s.metric = spheres->mass_metric();
  BoxBounds box;
  box.lo[2] = 0.0;
  s.constraints = box_wall_constraints(spheres, box);
  Vec gravity(3);
  gravity << 0.0, 0.0, -1.0;
  s.force = [gravity](double, const Vec&) { return gravity; };
  s.q0 = Vec::Zero(3);
  s.q0[2] = 1.0; // resting on the floor from the start
  s.u0 = Vec::Zero(3);
  s.horizon = 2.0;
  configured.h = 1e-3;
  configured.h_list = kDefaultSweep;
  validate(s);
  return configured;
}

ConfiguredScenario make_box_spheres(int n) {
  if (n < 1 || n > 64) {
    throw ConfigError("box-n-spheres supports 1..64 spheres");
  }
  ConfiguredScenario configured;
  Scenario& s = configured.scenario;
  s.name = "box-" + std::to_string(n) + "-spheres";
  const double radius = 0.12;
  auto spheres = std::make_shared<SphereSystem>(
      std::vector<RadiusProfile>(n, RadiusProfile{radius, 0.0}),
      std::vector<double>(n, 1.0), 2.5);
  s.dimension = 3 * n;
  s.metric = spheres->mass_metric();

  BoxBounds box;
  box.lo = {0.0, 0.0, 0.0};
  box.hi = {1.0, 1.0, 0.45 + 0.4 * n};
  std::vector<std::shared_ptr<const ConstraintSystem>> parts;
  if (n >= 2) {
    parts.push_back(non_overlap_constraints(spheres));
  }
  parts.push_back(box_wall_constraints(spheres, box));
  s.constraints = combine_systems(std::move(parts));

  Vec gravity = Vec::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    gravity[3 * i + 2] = -1.0;
  }
  s.force = [gravity](double, const Vec&) { return gravity; };

  // a vertical column of spheres dropping onto the floor
  s.q0 = Vec::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    s.q0[3 * i + 0] = 0.5;
    s.q0[3 * i + 1] = 0.5;
    s.q0[3 * i + 2] = 0.15 + 0.4 * i;
  }
  s.u0 = Vec::Zero(3 * n);
  s.horizon = 2.5;
  configured.h = 2e-3;
  configured.h_list = kDefaultSweep;
  validate(s);
  return configured;
}

ConfiguredScenario make_moving_wall() {
  ConfiguredScenario configured;
  Scenario& s = configured.scenario;
  s.name = "moving-wall";
  s.dimension = 1;
  s.constraints = make_affine_walls(1, {AffineWall{Vec::Ones(1), 0.0, -1.0}});
  s.q0 = 2.0 * Vec::Ones(1);
  s.u0 = Vec::Zero(1);
  s.horizon = 3.0;
  configured.h = 1e-3;
  configured.h_list = kDefaultSweep;
  validate(s);
  return configured;
}

ConfiguredScenario make_rotating_wall() {
  ConfiguredScenario configured;
  Scenario& s = configured.scenario;
  s.name = "rotating-wall";
  s.dimension = 2;
  const double omega = 0.5;
  const double offset = 0.5;
  FunctionalConstraint wall;
  wall.value = [omega, offset](double t, const Vec& q) {
    return std::cos(omega * t) * q[0] + std::sin(omega * t) * q[1] - offset;
  };
  wall.gradient = [omega](double t, const Vec&) {
    Vec grad(2);
    grad << std::cos(omega * t), std::sin(omega * t);
    return grad;
  };
  wall.time_derivative = [omega](double t, const Vec& q) {
    return omega * (-std::sin(omega * t) * q[0] + std::cos(omega * t) * q[1]);
  };
  wall.time_dependent = true;
  s.constraints = make_functional_system(2, {std::move(wall)});
  s.q0 = Vec::Zero(2);
  s.q0[0] = 1.0;
  s.u0 = Vec::Zero(2);
  s.horizon = 4.0;
  configured.h = 1e-3;
  configured.h_list = kDefaultSweep;
  validate(s);
  return configured;
}

} // namespace

const std::vector<BuiltinInfo>& builtin_catalog() {
  static const std::vector<BuiltinInfo> catalog = {
      {"bouncing-ball",
       "1D ball dropped from height 1 onto a fixed floor under unit gravity; "
       "closed form q(t) = max(0, 1 - t^2/2) until sustained contact",
       1e-3, kDefaultSweep},
      {"two-ball",
       "two unit spheres in head-on approach at speeds +/-1; inelastic contact "
       "leaves both at the momentum-conserving mean velocity",
       1e-3, kDefaultSweep},
      {"resting-sphere",
       "one sphere resting on the floor under unit gravity; the contact "
       "intensity balances the weight",
       1e-3, kDefaultSweep},
      {"box-n-spheres",
       "a column of n spheres (default 4, \"box-<n>-spheres\" to change) "
       "dropping and stacking inside a box under unit gravity",
       2e-3, kDefaultSweep},
      {"moving-wall",
       "1D point overtaken by a wall advancing at unit speed; exact solution "
       "q(t) = max(2, t)",
       1e-3, kDefaultSweep},
      {"rotating-wall",
       "2D point swept by a rotating line constraint (genuinely time-dependent "
       "gradient)",
       1e-3, kDefaultSweep},
  };
  return catalog;
}

namespace {

// "box-<k>-spheres" => k, or nullopt
std::optional<int> parse_box_count(const std::string& name) {
  const std::string prefix = "box-";
  const std::string suffix = "-spheres";
  if (name.size() <= prefix.size() + suffix.size() ||
      name.compare(0, prefix.size(), prefix) != 0 ||
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  const std::string middle =
      name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (middle == "n") {
    return 4;
  }
  try {
    std::size_t used = 0;
    const int k = std::stoi(middle, &used);
    if (used != middle.size() || k < 1) {
      return std::nullopt;
    }
    return k;
  } catch (...) {
    return std::nullopt;
  }
}

} // namespace

bool is_builtin(const std::string& name) {
  if (parse_box_count(name)) {
    return true;
  }
  for (const BuiltinInfo& info : builtin_catalog()) {
    if (info.name == name) {
      return true;
    }
  }
  return false;
}

ConfiguredScenario make_builtin(const std::string& name) {
  if (const auto box_count = parse_box_count(name)) {
    return make_box_spheres(*box_count);
  }
  if (name == "bouncing-ball") {
    return make_bouncing_ball();
  }
  if (name == "two-ball") {
    return make_two_ball();
  }
  if (name == "resting-sphere") {
    return make_resting_sphere();
  }
  if (name == "moving-wall") {
    return make_moving_wall();
  }
  if (name == "rotating-wall") {
    return make_rotating_wall();
  }
  throw ConfigError("unknown builtin scenario \"" + name + "\"");
}

ConfiguredScenario resolve_scenario(const std::string& name_or_path) {
  if (is_builtin(name_or_path)) {
    return make_builtin(name_or_path);
  }
  return load_scenario_file(name_or_path);
}

} // namespace proxstep
