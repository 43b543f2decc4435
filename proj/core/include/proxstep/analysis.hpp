#pragma once

#include <span>
#include <string>
#include <vector>

#include "proxstep/constraints.hpp"
#include "proxstep/scheme.hpp"
#include "proxstep/types.hpp"

namespace proxstep {

// ---------------------------------------------------------------------------
// Trajectory observables
// ---------------------------------------------------------------------------

/// Total variation sum |u_{k+1} - u_k| of a sampled velocity path.
double total_variation(std::span<const Vec> samples);

/// Constraint violation of a trajectory, at grid times and at 4 interior
/// points per step (piecewise affine interpolation of q), normalized by the
/// measured gradient-norm lower bound so values are distances.
struct FeasibilityProfile {
  double grid_max = 0.0;
  double midstep_max = 0.0;
  double gradient_norm_min = 0.0; ///< the normalization used
  double gradient_norm_max = 0.0;
};

FeasibilityProfile feasibility_profile(const Trajectory& trajectory,
                                       const ConstraintSystem& cs);

/// Least-squares slope c of values ~ c * h through the origin.
double fit_slope_through_origin(std::span<const double> h_values,
                                std::span<const double> values);

/// Steps whose velocity jump exceeds jump_tol * (1 + h * force_scale), with
/// the force scale estimated from contact-free steps. Runs of adjacent
/// detections are coalesced into one event; the returned time is the time of
/// the largest jump within the event.
std::vector<double> detect_impacts(const Trajectory& trajectory, double jump_tol);

/// One impact event located by detect_impacts, with the velocities across
/// the whole event (a discrete impact can span adjacent steps).
struct ImpactEvent {
  double t = 0.0;     ///< time of the largest jump
  int first_step = 0; ///< n of the record before the event
  int last_step = 0;  ///< n of the record after the event
  Vec u_before;
  Vec u_after;
};

std::vector<ImpactEvent> impact_events(const Trajectory& trajectory,
                                       double jump_tol);

/// Defect of the inelastic impact law at each detected event:
///   | u_after - P_C(u_before) |_M
/// with C the admissible velocity cone at the post-event state. The defect
/// carries an intrinsic O(h) term; meaningful thresholds must shrink with h.
struct ImpactDefect {
  double t = 0.0;
  double defect = 0.0;
};

std::vector<ImpactDefect> check_impact_law(const Trajectory& trajectory,
                                           const ConstraintSystem& cs,
                                           const MassMetric& metric,
                                           double tol_act, double jump_tol);

// ---------------------------------------------------------------------------
// Per-run diagnostics report
// ---------------------------------------------------------------------------

/// Measurable counterparts of the scheme's qualitative guarantees for one
/// run. All entries are finite and >= 0.
struct DiagnosticsReport {
  double max_constraint_violation = 0.0; ///< at grid times
  double midstep_violation = 0.0;
  double feasibility_slope = 0.0;   ///< midstep violation / h
  double total_variation = 0.0;
  double sup_velocity = 0.0;
  double multiplier_mass = 0.0;     ///< sum_n h sum_i lambda_i^n
  double support_defect = 0.0;      ///< sum_n h sum_i lambda_i^n max(0, g_i(t^n, q^n))
  double max_kkt_residual = 0.0;
  double max_balance_residual = 0.0;
  std::vector<ImpactDefect> impact_law_defects;
  double impact_jump_tol = 0.0;     ///< detection threshold used
  double impact_tol_act = 0.0;      ///< cone activity tolerance used
};

/// Assembles the full report for a completed run; impact detection and law
/// checking use h-scaled default tolerances derived from the trajectory.
DiagnosticsReport diagnose(const Trajectory& trajectory, const Scenario& scenario);

// ---------------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------------

/// One refinement comparison: solutions at h and h/2 compared on the finer
/// grid (q piecewise affine, u piecewise constant on (t^n, t^{n+1}]).
/// `rate` is log2 of the ratio to the previous row's position difference
/// (NaN on the first row).
struct ConvergenceRow {
  double h = 0.0;
  double dq_inf = 0.0; ///< max-norm position difference on the finest grid
  double du_l1 = 0.0;  ///< exact L1 distance of the piecewise-constant velocities
  double rate = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  bool monotone = true;  ///< position differences decreased along the chain
  std::string note;      ///< "possible non-uniqueness" when they did not
};

/// Runs the scenario for every step in the halving chain h_list (each entry
/// half the previous, all dividing the horizon) and assembles the Cauchy
/// table. Runs execute in parallel up to max_threads. Throws on invalid
/// chains; propagates simulation failures.
ConvergenceTable convergence_study(const Scenario& scenario,
                                   std::span<const double> h_list,
                                   int max_threads = 1);

} // namespace proxstep
