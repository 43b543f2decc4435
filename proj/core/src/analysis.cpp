#include "proxstep/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "proxstep/projection.hpp"

namespace proxstep {

// ---------------------------------------------------------------------------
// Elementary observables
// ---------------------------------------------------------------------------

double total_variation(std::span<const Vec> samples) {
  if (samples.size() < 2) {
    throw Error("total variation needs at least two samples");
  }
  double var = 0.0;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    var += (samples[k + 1] - samples[k]).norm();
  }
  return var;
}

FeasibilityProfile feasibility_profile(const Trajectory& trajectory,
                                       const ConstraintSystem& cs) {
  FeasibilityProfile profile;
  profile.gradient_norm_min = std::numeric_limits<double>::infinity();

  double grid_raw = 0.0;
  double mid_raw = 0.0;
  const auto& records = trajectory.records;
  for (std::size_t n = 0; n < records.size(); ++n) {
    for (int i = 0; i < cs.size(); ++i) {
      grid_raw = std::max(grid_raw, -cs.value(i, records[n].t, records[n].q));
      const double norm = cs.gradient(i, records[n].t, records[n].q).norm();
      profile.gradient_norm_min = std::min(profile.gradient_norm_min, norm);
      profile.gradient_norm_max = std::max(profile.gradient_norm_max, norm);
    }
    if (n + 1 < records.size()) {
      // 4 interior samples of the piecewise affine interpolant
      const double dt = records[n + 1].t - records[n].t;
      for (int s = 1; s <= 4; ++s) {
        const double theta = static_cast<double>(s) / 5.0;
        const double t_mid = records[n].t + theta * dt;
        const Vec q_mid = records[n].q + (theta * dt) * records[n + 1].u;
        for (int i = 0; i < cs.size(); ++i) {
          mid_raw = std::max(mid_raw, -cs.value(i, t_mid, q_mid));
        }
      }
    }
  }

  if (!std::isfinite(profile.gradient_norm_min) ||
      profile.gradient_norm_min <= 0.0) {
    profile.gradient_norm_min = 1.0; // no rows or degenerate gradients
  }
  profile.grid_max = std::max(0.0, grid_raw) / profile.gradient_norm_min;
  profile.midstep_max = std::max(0.0, mid_raw) / profile.gradient_norm_min;
  return profile;
}

double fit_slope_through_origin(std::span<const double> h_values,
                                std::span<const double> values) {
  if (h_values.size() != values.size() || h_values.empty()) {
    throw Error("slope fit needs matching nonempty samples");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < h_values.size(); ++k) {
    num += h_values[k] * values[k];
    den += h_values[k] * h_values[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------
// Impact detection
// ---------------------------------------------------------------------------

namespace {

// Estimate of the force scale from contact-free steps: there the velocity
// increment is exactly h * |average force| (in the metric sense).
double contact_free_force_scale(const Trajectory& trajectory) {
  double scale = 0.0;
  const auto& records = trajectory.records;
  for (std::size_t n = 0; n + 1 < records.size(); ++n) {
    const StepRecord& next = records[n + 1];
    const bool contact_free =
        next.lambda.size() == 0 ||
        next.lambda.lpNorm<Eigen::Infinity>() <= 1e-12;
    if (!contact_free) {
      continue;
    }
    const double dt = next.t - records[n].t;
    if (dt > 0.0) {
      scale = std::max(scale, (next.u - records[n].u).norm() / dt);
    }
  }
  return scale;
}

} // namespace

std::vector<ImpactEvent> impact_events(const Trajectory& trajectory,
                                       double jump_tol) {
  if (jump_tol <= 0.0) {
    throw Error("impact jump tolerance must be positive");
  }
  const auto& records = trajectory.records;
  std::vector<ImpactEvent> events;
  if (records.size() < 2) {
    return events;
  }
  const double threshold =
      jump_tol * (1.0 + trajectory.h * contact_free_force_scale(trajectory));

  // A discrete impact may occupy adjacent steps; coalesce runs of detected
  // jumps into one event.
  std::size_t n = 0;
  while (n + 1 < records.size()) {
    const double jump = (records[n + 1].u - records[n].u).norm();
    if (jump <= threshold) {
      ++n;
      continue;
    }
    std::size_t start = n;
    std::size_t largest = n;
    double largest_jump = jump;
    while (n + 1 < records.size() &&
           (records[n + 1].u - records[n].u).norm() > threshold) {
      const double this_jump = (records[n + 1].u - records[n].u).norm();
      if (this_jump > largest_jump) {
        largest_jump = this_jump;
        largest = n;
      }
      ++n;
    }
    ImpactEvent event;
    event.t = records[largest].t;
    event.first_step = records[start].n;
    event.last_step = records[n].n;
    event.u_before = records[start].u;
    event.u_after = records[n].u;
    events.push_back(std::move(event));
  }
  return events;
}

std::vector<double> detect_impacts(const Trajectory& trajectory, double jump_tol) {
  std::vector<double> times;
  for (const ImpactEvent& event : impact_events(trajectory, jump_tol)) {
    times.push_back(event.t);
  }
  return times;
}

std::vector<ImpactDefect> check_impact_law(const Trajectory& trajectory,
                                           const ConstraintSystem& cs,
                                           const MassMetric& metric,
                                           double tol_act, double jump_tol) {
  std::vector<ImpactDefect> defects;
  for (const ImpactEvent& event : impact_events(trajectory, jump_tol)) {
    const StepRecord& after = trajectory.records[event.last_step];
    const HalfspaceSystem cone =
        admissible_velocity_cone(cs, after.t, after.q, tol_act);
    const ProjectionResult projected = project(event.u_before, cone, metric);
    defects.push_back({event.t, metric.norm(event.u_after - projected.point)});
  }
  return defects;
}

// ---------------------------------------------------------------------------
// Per-run report
// ---------------------------------------------------------------------------

DiagnosticsReport diagnose(const Trajectory& trajectory, const Scenario& scenario) {
  DiagnosticsReport report;
  const auto& records = trajectory.records;
  if (records.empty()) {
    return report;
  }

  std::vector<Vec> velocities;
  velocities.reserve(records.size());
  for (const StepRecord& record : records) {
    report.sup_velocity = std::max(report.sup_velocity, record.u.norm());
    report.max_kkt_residual = std::max(report.max_kkt_residual, record.residuals.kkt);
    report.max_balance_residual =
        std::max(report.max_balance_residual, record.residuals.balance);
    velocities.push_back(record.u);
  }
  if (velocities.size() >= 2) {
    report.total_variation = total_variation(velocities);
  }

  for (std::size_t n = 1; n < records.size(); ++n) {
    const double dt = records[n].t - records[n - 1].t;
    if (records[n].lambda.size() > 0) {
      report.multiplier_mass += dt * records[n].lambda.sum();
    }
  }

  if (scenario.constraints) {
    const ConstraintSystem& cs = *scenario.constraints;
    const FeasibilityProfile profile = feasibility_profile(trajectory, cs);
    report.max_constraint_violation = profile.grid_max;
    report.midstep_violation = profile.midstep_max;
    report.feasibility_slope =
        trajectory.h > 0.0 ? profile.midstep_max / trajectory.h : 0.0;

    for (std::size_t n = 1; n < records.size(); ++n) {
      const double dt = records[n].t - records[n - 1].t;
      for (int i = 0; i < cs.size(); ++i) {
        if (records[n].lambda[i] > 0.0) {
          report.support_defect +=
              dt * records[n].lambda[i] *
              std::max(0.0, cs.value(i, records[n].t, records[n].q));
        }
      }
    }

    // h-scaled tolerances: the discrete impact smears over O(h), so both the
    // detection threshold and the cone activity tolerance shrink with h.
    report.impact_jump_tol = 0.05 * (1.0 + report.sup_velocity);
    report.impact_tol_act = 10.0 * trajectory.h * (1.0 + report.sup_velocity) *
                            (1.0 + profile.gradient_norm_max);
    report.impact_law_defects =
        check_impact_law(trajectory, cs, scenario.metric, report.impact_tol_act,
                         report.impact_jump_tol);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

namespace {

// q of the coarse run interpolated at fine grid index m (grids nest 2:1).
Vec coarse_q_at(const std::vector<StepRecord>& coarse, std::size_t m) {
  if (m % 2 == 0) {
    return coarse[m / 2].q;
  }
  return 0.5 * (coarse[m / 2].q + coarse[m / 2 + 1].q);
}

struct PairNorms {
  double dq_inf = 0.0;
  double du_l1 = 0.0;
};

PairNorms compare_refinement(const Trajectory& coarse, const Trajectory& fine) {
  const auto& rc = coarse.records;
  const auto& rf = fine.records;
  if (rf.size() != 2 * rc.size() - 1) {
    throw Error("refinement grids do not nest 2:1");
  }
  PairNorms norms;
  for (std::size_t m = 0; m < rf.size(); ++m) {
    norms.dq_inf = std::max(norms.dq_inf, (coarse_q_at(rc, m) - rf[m].q).norm());
  }
  // both velocity interpolants are constant on each fine interval
  for (std::size_t m = 0; m + 1 < rf.size(); ++m) {
    const double dt = rf[m + 1].t - rf[m].t;
    norms.du_l1 += dt * (rf[m + 1].u - rc[m / 2 + 1].u).norm();
  }
  return norms;
}

} // namespace

ConvergenceTable convergence_study(const Scenario& scenario,
                                   std::span<const double> h_list,
                                   int max_threads) {
  if (h_list.size() < 2) {
    throw Error("convergence study needs at least two step sizes");
  }
  for (std::size_t k = 0; k < h_list.size(); ++k) {
    if (!(h_list[k] > 0.0)) {
      throw Error("step sizes must be positive");
    }
    const double ratio = scenario.horizon / h_list[k];
    if (std::abs(ratio - std::round(ratio)) > 1e-6) {
      throw Error("step size " + std::to_string(h_list[k]) +
                  " does not divide the horizon");
    }
    if (k > 0 && std::abs(h_list[k] - 0.5 * h_list[k - 1]) >
                     1e-9 * h_list[k - 1]) {
      throw Error("step sizes must form a halving chain");
    }
  }

  const int runs = static_cast<int>(h_list.size());
  std::vector<Trajectory> trajectories(runs);
  std::vector<std::exception_ptr> failures(runs);

  auto run_one = [&](int k) {
    try {
      SimulationResult result = simulate(scenario, h_list[k]);
      if (!result.ok()) {
        throw Error("run at h = " + std::to_string(h_list[k]) +
                    " failed: " + *result.error);
      }
      trajectories[k] = std::move(result.trajectory);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min(max_threads, runs));
  if (workers == 1) {
    for (int k = 0; k < runs; ++k) {
      run_one(k);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int k = next.fetch_add(1); k < runs; k = next.fetch_add(1)) {
          run_one(k);
        }
      });
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  for (int k = 0; k < runs; ++k) {
    if (failures[k]) {
      std::rethrow_exception(failures[k]);
    }
  }

  ConvergenceTable table;
  for (int k = 0; k + 1 < runs; ++k) {
    const PairNorms norms = compare_refinement(trajectories[k], trajectories[k + 1]);
    ConvergenceRow row;
    row.h = h_list[k];
    row.dq_inf = norms.dq_inf;
    row.du_l1 = norms.du_l1;
    row.rate = std::numeric_limits<double>::quiet_NaN();
    if (!table.rows.empty() && norms.dq_inf > 0.0 && table.rows.back().dq_inf > 0.0) {
      row.rate = std::log2(table.rows.back().dq_inf / norms.dq_inf);
    }
    table.rows.push_back(row);
  }

  for (std::size_t k = 1; k < table.rows.size(); ++k) {
    if (table.rows[k].dq_inf > table.rows[k - 1].dq_inf + 1e-14) {
      table.monotone = false;
    }
  }
  if (!table.monotone) {
    // convergence holds only up to subsequences; flag, do not fail
    table.note = "possible non-uniqueness: Cauchy differences are not monotone";
  }
  return table;
}

} // namespace proxstep
