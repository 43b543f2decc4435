#include "proxstep/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <utility>

namespace proxstep {

namespace {

constexpr double kFeasibilityTol = 1e-9;
constexpr double kNewContactTol = 1e-12;

Vec zero_force(int dim) { return Vec::Zero(dim); }

// Saturated rows of the projection: slack below a velocity-scaled tolerance.
ActiveSet saturated_rows(const HalfspaceSystem& halfspaces, const Vec& point) {
  ActiveSet active;
  active.threshold = 1e-8 * (1.0 + point.lpNorm<Eigen::Infinity>());
  for (int row = 0; row < halfspaces.size(); ++row) {
    const double slack = halfspaces.normal(row).dot(point) - halfspaces.offset(row);
    if (slack <= active.threshold) {
      active.indices.push_back(halfspaces.source(row));
    }
  }
  return active;
}

struct CoreStep {
  Vec predicted;
  ProjectionResult projection;
  HalfspaceSystem halfspaces;
  Vec force_avg;
};

CoreStep core_step(double t_n, const Vec& q_n, const Vec& u_n,
                   const Scenario& scenario, double h,
                   const Vec* warm_multipliers) {
  const double t_next = t_n + h;
  Vec force_avg = scenario.force
                      ? (scenario.adaptive_force_average
                             ? average_force_adaptive(scenario.force, t_n, h, q_n)
                             : average_force(scenario.force, t_n, h, q_n))
                      : zero_force(scenario.dimension);

  HalfspaceSystem halfspaces =
      scenario.constraints
          ? linearized_velocity_set(*scenario.constraints, t_next, q_n, h,
                                    scenario.screening)
          : HalfspaceSystem(scenario.dimension, VelocitySetKind::Linearized);

  Vec predicted = u_n + h * scenario.metric.apply_inverse(force_avg);

  // Warm start maps per-constraint intensities onto the materialized rows.
  Vec warm_rows;
  const Vec* warm = nullptr;
  if (warm_multipliers != nullptr && halfspaces.size() > 0) {
    warm_rows = Vec::Zero(halfspaces.size());
    for (int row = 0; row < halfspaces.size(); ++row) {
      const int src = halfspaces.source(row);
      if (src >= 0 && src < warm_multipliers->size()) {
        warm_rows[row] = (*warm_multipliers)[src] * h;
      }
    }
    warm = &warm_rows;
  }

  ProjectionResult projection =
      project(predicted, halfspaces, scenario.metric, scenario.solver, warm);

  return {std::move(predicted), std::move(projection), std::move(halfspaces),
          std::move(force_avg)};
}

StepRecord assemble_record(double t_n, const Vec& q_n, const Vec& u_n,
                           const Scenario& scenario, double h, CoreStep&& core,
                           const Vec& u_next) {
  const int p = scenario.constraints ? scenario.constraints->size() : 0;

  Vec lambda = Vec::Zero(p);
  Vec reaction = Vec::Zero(scenario.dimension); // sum_i lambda_i grad g_i
  for (int row = 0; row < core.halfspaces.size(); ++row) {
    const double mu = core.projection.multipliers[row];
    const int src = core.halfspaces.source(row);
    if (src >= 0) {
      lambda[src] = mu / h;
    }
    if (mu != 0.0) {
      reaction += (mu / h) * core.halfspaces.normal(row);
    }
  }

  StepRecord record;
  record.t = t_n + h;
  record.q = q_n + h * u_next;
  record.u = u_next;
  record.lambda = std::move(lambda);
  record.active = saturated_rows(core.halfspaces, core.projection.point);
  record.residuals.kkt = core.projection.kkt_residual;
  const Vec balance = scenario.metric.apply((u_next - u_n) / h) -
                      core.force_avg - reaction;
  record.residuals.balance = balance.lpNorm<Eigen::Infinity>();
  return record;
}

} // namespace

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void validate(Scenario& scenario) {
  if (scenario.dimension <= 0) {
    throw InvalidScenarioError("scenario dimension must be positive");
  }
  if (scenario.q0.size() != scenario.dimension ||
      scenario.u0.size() != scenario.dimension) {
    throw InvalidScenarioError("initial state size does not match dimension");
  }
  if (!(scenario.horizon > 0.0)) {
    throw InvalidScenarioError("horizon must be positive");
  }
  if (scenario.restitution < 0.0 || scenario.restitution > 1.0) {
    throw InvalidScenarioError("restitution must lie in [0, 1]");
  }
  if (scenario.metric.dim() == 0) {
    scenario.metric = MassMetric::identity(scenario.dimension);
  } else if (scenario.metric.dim() != scenario.dimension) {
    throw InvalidScenarioError("mass metric size does not match dimension");
  }
  if (scenario.constraints &&
      scenario.constraints->dimension() != scenario.dimension) {
    throw InvalidScenarioError("constraint system dimension mismatch");
  }
  if (scenario.restitution > 0.0 && scenario.constraints &&
      scenario.constraints->time_dependent()) {
    throw UnsupportedTimeDependentError(
        "restitution > 0 requires time-independent constraints");
  }

  if (!scenario.constraints) {
    return;
  }
  // Initial feasibility: strictly feasible, or on the boundary with an
  // admissible initial velocity.
  const Vec values = evaluate_all(*scenario.constraints, 0.0, scenario.q0);
  bool boundary = false;
  for (int i = 0; i < values.size(); ++i) {
    const double scaled_tol = kFeasibilityTol * (1.0 + std::abs(values[i]));
    if (values[i] < -scaled_tol) {
      throw InvalidScenarioError("initial configuration violates constraint " +
                                 std::to_string(i) + " (value " +
                                 std::to_string(values[i]) + ")");
    }
    boundary = boundary || values[i] <= scaled_tol;
  }
  if (boundary) {
    const HalfspaceSystem cone =
        admissible_velocity_cone(*scenario.constraints, 0.0, scenario.q0);
    if (!cone.contains(scenario.u0, kFeasibilityTol)) {
      throw InvalidScenarioError(
          "initial configuration touches the boundary and the initial "
          "velocity is not admissible there");
    }
  }
}

std::uint64_t scenario_fingerprint(const Scenario& scenario) {
  // FNV-1a over the defining data.
  std::uint64_t hash = 1469598103934665603ull;
  auto mix_bytes = [&hash](const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < size; ++k) {
      hash ^= bytes[k];
      hash *= 1099511628211ull;
    }
  };
  auto mix_double = [&](double x) { mix_bytes(&x, sizeof(x)); };

  mix_bytes(scenario.name.data(), scenario.name.size());
  const std::int64_t dim = scenario.dimension;
  mix_bytes(&dim, sizeof(dim));
  mix_double(scenario.horizon);
  mix_double(scenario.restitution);
  for (int i = 0; i < scenario.q0.size(); ++i) {
    mix_double(scenario.q0[i]);
  }
  for (int i = 0; i < scenario.u0.size(); ++i) {
    mix_double(scenario.u0[i]);
  }
  for (int i = 0; i < scenario.metric.dim(); ++i) {
    mix_double(scenario.metric.diagonal()[i]);
  }
  return hash;
}

// ---------------------------------------------------------------------------
// Force averaging
// ---------------------------------------------------------------------------

Vec average_force(const ForceField& f, double t, double h, const Vec& q) {
  return 0.5 * (f(t, q) + f(t + h, q));
}

namespace {

Vec adaptive_simpson(const ForceField& f, const Vec& q, double a, double b,
                     const Vec& fa, const Vec& fm, const Vec& fb,
                     const Vec& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const Vec fl = f(0.5 * (a + m), q);
  const Vec fr = f(0.5 * (m + b), q);
  const Vec left = (m - a) / 6.0 * (fa + 4.0 * fl + fm);
  const Vec right = (b - m) / 6.0 * (fm + 4.0 * fr + fb);
  const Vec sum = left + right;
  if (depth <= 0 || (sum - whole).lpNorm<Eigen::Infinity>() <= 15.0 * tol) {
    return sum + (sum - whole) / 15.0;
  }
  return adaptive_simpson(f, q, a, m, fa, fl, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, q, m, b, fm, fr, fb, right, 0.5 * tol, depth - 1);
}

} // namespace

Vec average_force_adaptive(const ForceField& f, double t, double h, const Vec& q,
                           double tol) {
  const double a = t;
  const double b = t + h;
  const Vec fa = f(a, q);
  const Vec fm = f(0.5 * (a + b), q);
  const Vec fb = f(b, q);
  const Vec whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const Vec integral =
      adaptive_simpson(f, q, a, b, fa, fm, fb, whole, tol * h, 30);
  return integral / h;
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

StepRecord step(double t_n, const Vec& q_n, const Vec& u_n,
                const Scenario& scenario, double h,
                const Vec* warm_multipliers) {
  CoreStep core = core_step(t_n, q_n, u_n, scenario, h, warm_multipliers);
  const Vec u_next = core.projection.point;
  return assemble_record(t_n, q_n, u_n, scenario, h, std::move(core), u_next);
}

StepRecord step_with_restitution(double t_n, const Vec& q_n, const Vec& u_n,
                                 const Scenario& scenario, double h,
                                 const Vec* previous_lambda,
                                 const Vec* warm_multipliers) {
  const double e = scenario.restitution;
  if (e > 0.0 && scenario.constraints && scenario.constraints->time_dependent()) {
    throw UnsupportedTimeDependentError(
        "restitution > 0 requires time-independent constraints");
  }

  CoreStep core = core_step(t_n, q_n, u_n, scenario, h, warm_multipliers);
  Vec u_next = core.projection.point;

  if (e != 0.0) {
    bool new_contact = false;
    for (int row = 0; row < core.halfspaces.size() && !new_contact; ++row) {
      if (core.projection.multipliers[row] <= kNewContactTol) {
        continue;
      }
      const int src = core.halfspaces.source(row);
      const bool was_active = previous_lambda != nullptr && src >= 0 &&
                              src < previous_lambda->size() &&
                              (*previous_lambda)[src] > kNewContactTol;
      new_contact = !was_active;
    }
    if (new_contact) {
      // Reflect the normal component removed by the projection.
      u_next = core.projection.point - e * (core.predicted - core.projection.point);
    }
  }
  return assemble_record(t_n, q_n, u_n, scenario, h, std::move(core), u_next);
}

// ---------------------------------------------------------------------------
// Simulation loop
// ---------------------------------------------------------------------------

SimulationResult simulate(const Scenario& scenario, double h) {
  if (!(h > 0.0)) {
    throw InvalidScenarioError("step size must be positive");
  }
  Scenario checked = scenario;
  validate(checked);

  const double T = checked.horizon;
  auto n_full = static_cast<long long>(std::floor(T / h + 1e-9));
  double remainder = T - static_cast<double>(n_full) * h;
  if (remainder <= 1e-9 * T) {
    remainder = 0.0;
  }

  SimulationResult result;
  Trajectory& traj = result.trajectory;
  traj.h = h;
  traj.scenario_hash = scenario_fingerprint(checked);

  StepRecord initial;
  initial.n = 0;
  initial.t = 0.0;
  initial.q = checked.q0;
  initial.u = checked.u0;
  initial.lambda =
      Vec::Zero(checked.constraints ? checked.constraints->size() : 0);
  traj.records.push_back(std::move(initial));

  const bool with_restitution = checked.restitution > 0.0;
  const long long total_steps = n_full + (remainder > 0.0 ? 1 : 0);
  Vec warm; // previous step's intensities, reused as the dual warm start

  for (long long n = 0; n < total_steps; ++n) {
    const StepRecord& last = traj.records.back();
    const double step_h = (n < n_full) ? h : remainder;
    const double t_n = (n < n_full) ? static_cast<double>(n) * h
                                    : static_cast<double>(n_full) * h;
    try {
      StepRecord next =
          with_restitution
              ? step_with_restitution(t_n, last.q, last.u, checked, step_h,
                                      &last.lambda, warm.size() ? &warm : nullptr)
              : step(t_n, last.q, last.u, checked, step_h,
                     warm.size() ? &warm : nullptr);
      next.n = static_cast<int>(n) + 1;
      warm = next.lambda;
      traj.records.push_back(std::move(next));
    } catch (const Error& failure) {
      result.error = std::string("step ") + std::to_string(n + 1) +
                     " failed: " + failure.what();
      result.failed_step = static_cast<int>(n) + 1;
      return result;
    }
  }
  return result;
}

} // namespace proxstep
