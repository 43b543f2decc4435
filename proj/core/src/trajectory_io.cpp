#include "proxstep/trajectory_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "proxstep/errors.hpp"

namespace proxstep {

namespace {

using nlohmann::json;

// 17 significant digits: decimal text that re-reads to the identical double.
std::string full_precision(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", x);
  return buffer;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

} // namespace

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  if (trajectory.records.empty()) {
    throw Error("cannot write an empty trajectory");
  }
  const int d = static_cast<int>(trajectory.records.front().q.size());
  const int p = static_cast<int>(trajectory.records.front().lambda.size());

  out << "t";
  for (int k = 0; k < d; ++k) {
    out << ",q" << k;
  }
  for (int k = 0; k < d; ++k) {
    out << ",u" << k;
  }
  for (int k = 0; k < p; ++k) {
    out << ",lambda" << k;
  }
  out << ",active_count,kkt_residual\n";

  for (const StepRecord& record : trajectory.records) {
    out << full_precision(record.t);
    for (int k = 0; k < d; ++k) {
      out << ',' << full_precision(record.q[k]);
    }
    for (int k = 0; k < d; ++k) {
      out << ',' << full_precision(record.u[k]);
    }
    for (int k = 0; k < p; ++k) {
      out << ',' << full_precision(record.lambda[k]);
    }
    out << ',' << record.active.count() << ','
        << full_precision(record.residuals.kkt) << '\n';
  }
}

std::string trajectory_csv(const Trajectory& trajectory) {
  std::ostringstream out;
  write_trajectory_csv(out, trajectory);
  return out.str();
}

TrajectoryTable read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error("trajectory CSV is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);
  int d = 0;
  int p = 0;
  for (const std::string& name : header) {
    if (name.rfind("q", 0) == 0 && name != "q") {
      ++d;
    } else if (name.rfind("lambda", 0) == 0) {
      ++p;
    }
  }
  const std::size_t expected = 1 + 2 * static_cast<std::size_t>(d) +
                               static_cast<std::size_t>(p) + 2;
  if (header.size() != expected || header.front() != "t") {
    throw Error("unrecognized trajectory CSV header");
  }

  TrajectoryTable table;
  table.dimension = d;
  table.constraint_count = p;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != expected) {
      throw Error("trajectory CSV row has wrong field count");
    }
    auto as_double = [&](std::size_t k) {
      return std::strtod(fields[k].c_str(), nullptr);
    };
    std::size_t col = 0;
    table.t.push_back(as_double(col++));
    Vec q(d), u(d), lambda(p);
    for (int k = 0; k < d; ++k) {
      q[k] = as_double(col++);
    }
    for (int k = 0; k < d; ++k) {
      u[k] = as_double(col++);
    }
    for (int k = 0; k < p; ++k) {
      lambda[k] = as_double(col++);
    }
    table.q.push_back(std::move(q));
    table.u.push_back(std::move(u));
    table.lambda.push_back(std::move(lambda));
    table.active_count.push_back(static_cast<int>(as_double(col++)));
    table.kkt_residual.push_back(as_double(col++));
  }
  return table;
}

// ---------------------------------------------------------------------------
// JSON / CSV reports
// ---------------------------------------------------------------------------

std::string diagnostics_json(const DiagnosticsReport& report,
                             const std::string& scenario_name, double h) {
  json impacts = json::array();
  for (const ImpactDefect& defect : report.impact_law_defects) {
    impacts.push_back({{"t", defect.t}, {"defect", defect.defect}});
  }
  const json out = {
      {"scenario", scenario_name},
      {"h", h},
      {"max_constraint_violation", report.max_constraint_violation},
      {"midstep_violation", report.midstep_violation},
      {"feasibility_slope", report.feasibility_slope},
      {"total_variation", report.total_variation},
      {"sup_velocity", report.sup_velocity},
      {"multiplier_mass", report.multiplier_mass},
      {"support_defect", report.support_defect},
      {"max_kkt_residual", report.max_kkt_residual},
      {"max_balance_residual", report.max_balance_residual},
      {"impact_law_defects", impacts},
      {"impact_jump_tol", report.impact_jump_tol},
      {"impact_tol_act", report.impact_tol_act},
  };
  return out.dump(2);
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
  out << "h,dq_inf,du_l1,rate\n";
  for (const ConvergenceRow& row : table.rows) {
    out << full_precision(row.h) << ',' << full_precision(row.dq_inf) << ','
        << full_precision(row.du_l1) << ',' << full_precision(row.rate) << '\n';
  }
}

std::string convergence_json(const ConvergenceTable& table,
                             const std::string& scenario_name) {
  json rows = json::array();
  for (const ConvergenceRow& row : table.rows) {
    json entry = {{"h", row.h}, {"dq_inf", row.dq_inf}, {"du_l1", row.du_l1}};
    if (std::isfinite(row.rate)) {
      entry["rate"] = row.rate;
    } else {
      entry["rate"] = nullptr;
    }
    rows.push_back(std::move(entry));
  }
  json out = {{"scenario", scenario_name},
              {"rows", rows},
              {"monotone", table.monotone}};
  if (!table.note.empty()) {
    out["note"] = table.note;
  }
  return out.dump(2);
}

std::string assumption_report_json(const AssumptionReport& report,
                                   const std::string& scenario_name) {
  json out = {
      {"scenario", scenario_name},
      {"gradient_norm_min", report.gradient_norm_min},
      {"gradient_norm_max", report.gradient_norm_max},
      {"time_derivative_max", report.time_derivative_max},
      {"second_derivative_max", report.second_derivative_max},
      {"gamma_vacuous", report.gamma_vacuous},
      {"samples_checked", report.samples_checked},
      {"combinations_tried", report.combinations_tried},
      {"flags", report.flags},
  };
  if (report.gamma_estimate) {
    out["gamma_estimate"] = *report.gamma_estimate;
  } else {
    out["gamma_estimate"] = nullptr;
  }
  return out.dump(2);
}

} // namespace proxstep
