#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "proxstep/constraints.hpp"
#include "proxstep/projection.hpp"
#include "proxstep/types.hpp"

namespace proxstep {

/// External force field f(t, q).
using ForceField = std::function<Vec(double, const Vec&)>;

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Everything needed to run the time stepping scheme on one problem.
///
/// The initial configuration must be strictly feasible, or feasible with an
/// initial velocity admissible at the boundary; validate() enforces this.
struct Scenario {
  std::string name;
  int dimension = 0;
  std::shared_ptr<const ConstraintSystem> constraints; ///< null = unconstrained
  ForceField force;                                    ///< null = zero force
  Vec q0;
  Vec u0;
  double horizon = 0.0;
  MassMetric metric = MassMetric::identity(0); ///< resized by validate() if empty
  double restitution = 0.0;
  SolverParams solver;
  RowScreening screening;
  bool adaptive_force_average = false;
};

/// Checks sizes, parameter ranges and initial feasibility; fills in an
/// identity metric when none was provided. Throws InvalidScenarioError
/// (or UnsupportedTimeDependentError for restitution > 0 with
/// time-dependent constraints).
void validate(Scenario& scenario);

/// Stable identifier of a scenario's defining data (name, sizes, initial
/// state, horizon, restitution).
std::uint64_t scenario_fingerprint(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

struct StepResiduals {
  double kkt = 0.0;     ///< projection KKT residual
  double balance = 0.0; ///< discrete momentum balance residual (inf norm)
};

/// State after step n of the scheme, at time t = t^n.
struct StepRecord {
  int n = 0;
  double t = 0.0;
  Vec q;
  Vec u;
  Vec lambda;      ///< contact intensities, one per constraint (empty if p = 0)
  ActiveSet active; ///< rows saturated by the projection this step
  StepResiduals residuals;
};

struct Trajectory {
  std::vector<StepRecord> records;
  double h = 0.0;
  std::uint64_t scenario_hash = 0;

  int steps() const { return static_cast<int>(records.size()) - 1; }
};

/// Outcome of a run; on step failure the trajectory holds every record up to
/// the last successful step.
struct SimulationResult {
  Trajectory trajectory;
  std::optional<std::string> error;
  int failed_step = -1;

  bool ok() const { return !error.has_value(); }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Time average of f over [t, t + h] at frozen q, by 2-point trapezoid
/// (exact for forces affine in t).
Vec average_force(const ForceField& f, double t, double h, const Vec& q);

/// Same average by adaptive Simpson refinement to the given tolerance, for
/// forces that are merely integrable.
Vec average_force_adaptive(const ForceField& f, double t, double h, const Vec& q,
                           double tol = 1e-10);

/// One prediction-correction step from (t_n, q_n, u_n):
///   v       = u_n + h M^{-1} f_n        (f_n = time-averaged force)
///   u_next  = projection of v onto the linearized velocity set at
///             (t_n + h, q_n) in the mass metric
///   q_next  = q_n + h u_next
/// Contact intensities are the projection multipliers divided by h.
/// `warm_multipliers`, when given, seeds the projection (size p).
StepRecord step(double t_n, const Vec& q_n, const Vec& u_n,
                const Scenario& scenario, double h,
                const Vec* warm_multipliers = nullptr);

/// Variant applying the restitution rule: with P the projected velocity and
/// v the predicted one, u_next = P - e (v - P) whenever a contact is newly
/// active this step (its intensity was zero the step before), else P.
/// Reduces exactly to step() at e = 0. Requires time-independent
/// constraints for e > 0. `previous_lambda` identifies new contacts; null
/// means all contacts count as new.
StepRecord step_with_restitution(double t_n, const Vec& q_n, const Vec& u_n,
                                 const Scenario& scenario, double h,
                                 const Vec* previous_lambda = nullptr,
                                 const Vec* warm_multipliers = nullptr);

/// Runs the scheme from t = 0 to the horizon with constant step h (one
/// shortened final step when h does not divide the horizon). Record 0 is the
/// initial state with zero intensities. Step failures abort the run and are
/// reported in the result together with the partial trajectory.
SimulationResult simulate(const Scenario& scenario, double h);

} // namespace proxstep
