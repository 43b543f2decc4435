#pragma once

#include <utility>

#include "proxstep/constraints.hpp"
#include "proxstep/errors.hpp"
#include "proxstep/types.hpp"

namespace proxstep {

// ---------------------------------------------------------------------------
// MassMetric
// ---------------------------------------------------------------------------

/// Diagonal positive metric (u, v)_M = <M u, v> used for projections with
/// heterogeneous masses. Identity by default.
class MassMetric {
public:
  /// Throws InvalidScenarioError unless every entry is > 0.
  explicit MassMetric(Vec diagonal);

  static MassMetric identity(int dim);

  int dim() const { return static_cast<int>(diagonal_.size()); }
  const Vec& diagonal() const { return diagonal_; }

  Vec apply(const Vec& v) const { return diagonal_.cwiseProduct(v); }
  Vec apply_inverse(const Vec& v) const { return v.cwiseQuotient(diagonal_); }

  double dot(const Vec& u, const Vec& v) const {
    return u.dot(diagonal_.cwiseProduct(v));
  }
  double norm(const Vec& v) const;

private:
  Vec diagonal_;
};

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

struct SolverParams {
  double tolerance = 1e-10;       ///< absolute KKT tolerance
  int max_sweeps = 10'000;
  double divergence_scale = 1e12; ///< multiplier blow-up => infeasible
};

/// Result of projecting a point onto a halfspace intersection.
///
/// Satisfies, up to the solver tolerance:
///   feasibility      <a_i, point> >= b_i
///   stationarity     point = input + M^{-1} sum_i multipliers_i a_i
///   complementarity  multipliers_i (<a_i, point> - b_i) = 0
///   nonnegativity    multipliers_i >= 0
/// The projection point is unique; with degenerate rows the multipliers need
/// not be, so consumers should only rely on sum_i multipliers_i a_i.
struct ProjectionResult {
  Vec point;
  Vec multipliers; ///< one entry per row of the halfspace system
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Thrown when the dual sweep hits the iteration budget; carries the best
/// iterate so far.
class MaxIterationsError : public Error {
public:
  MaxIterationsError(const std::string& what, ProjectionResult best)
      : Error(what), best_(std::move(best)) {}
  const ProjectionResult& best() const { return best_; }

private:
  ProjectionResult best_;
};

/// Projects v onto the halfspace intersection in the metric sense
/// (argmin over u in H of (u - v, u - v)_M) and recovers the KKT
/// multipliers, by projected Gauss-Seidel sweeps on the dual.
///
/// Deterministic for fixed inputs: rows are swept in ascending order.
/// `warm_start`, when given, seeds the multipliers (size = rows of H).
/// Throws InfeasibleError when the multipliers diverge and
/// MaxIterationsError when the budget is exhausted.
ProjectionResult project(const Vec& v, const HalfspaceSystem& halfspaces,
                         const MassMetric& metric, const SolverParams& params = {},
                         const Vec* warm_start = nullptr);

/// Independent testing oracle: enumerates active subsets (rows <= 20),
/// solves each equality-constrained minimization in closed form and returns
/// the first subset, in (cardinality, lexicographic) order, whose solution
/// is primal feasible with nonnegative multipliers.
ProjectionResult project_by_enumeration(const Vec& v,
                                        const HalfspaceSystem& halfspaces,
                                        const MassMetric& metric);

/// Splits v into (tangential, normal) parts relative to a polyhedral cone:
/// tangential = projection of v onto the cone, normal = v - tangential,
/// M-orthogonal to it. Throws NotAConeError if any offset is nonzero.
std::pair<Vec, Vec> cone_decompose(const Vec& v, const HalfspaceSystem& cone,
                                   const MassMetric& metric,
                                   const SolverParams& params = {});

} // namespace proxstep
