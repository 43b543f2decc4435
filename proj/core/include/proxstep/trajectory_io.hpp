#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "proxstep/analysis.hpp"
#include "proxstep/constraints.hpp"
#include "proxstep/scheme.hpp"

namespace proxstep {

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------
// Columns: t, q[0..d), u[0..d), lambda[0..p), active_count, kkt_residual.
// Values are written with 17 significant digits so that re-reading a file
// reproduces every double bit-exactly.

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
std::string trajectory_csv(const Trajectory& trajectory);

/// Parsed trajectory file contents (the CSV does not carry gradients or
/// active indices, only their count).
struct TrajectoryTable {
  int dimension = 0;
  int constraint_count = 0;
  std::vector<double> t;
  std::vector<Vec> q;
  std::vector<Vec> u;
  std::vector<Vec> lambda;
  std::vector<int> active_count;
  std::vector<double> kkt_residual;
};

TrajectoryTable read_trajectory_csv(std::istream& in);

// ---------------------------------------------------------------------------
// JSON / CSV reports
// ---------------------------------------------------------------------------

std::string diagnostics_json(const DiagnosticsReport& report,
                             const std::string& scenario_name, double h);

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);
std::string convergence_json(const ConvergenceTable& table,
                             const std::string& scenario_name);

std::string assumption_report_json(const AssumptionReport& report,
                                   const std::string& scenario_name);

} // namespace proxstep
