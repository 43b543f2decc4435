#include "proxstep/projection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace proxstep {

// ---------------------------------------------------------------------------
// MassMetric
// ---------------------------------------------------------------------------

MassMetric::MassMetric(Vec diagonal) : diagonal_(std::move(diagonal)) {
  for (int i = 0; i < diagonal_.size(); ++i) {
    if (!(diagonal_[i] > 0.0)) {
      throw InvalidScenarioError("mass metric entry " + std::to_string(i) +
                                 " is not positive");
    }
  }
}

MassMetric MassMetric::identity(int dim) { return MassMetric(Vec::Ones(dim)); }

double MassMetric::norm(const Vec& v) const {
  return std::sqrt(std::max(0.0, dot(v, v)));
}

// ---------------------------------------------------------------------------
// Shared KKT bookkeeping
// ---------------------------------------------------------------------------

namespace {

// Point reconstructed from the multipliers; keeps stationarity exact.
Vec point_from_multipliers(const Vec& v, const HalfspaceSystem& h,
                           const MassMetric& metric, const Vec& mu) {
  Vec correction = Vec::Zero(v.size());
  for (int i = 0; i < h.size(); ++i) {
    if (mu[i] != 0.0) {
      correction += mu[i] * h.normal(i);
    }
  }
  return v + metric.apply_inverse(correction);
}

// max over rows of feasibility violation and complementarity defect.
double kkt_residual(const HalfspaceSystem& h, const Vec& point, const Vec& mu) {
  double residual = 0.0;
  for (int i = 0; i < h.size(); ++i) {
    const double slack = h.normal(i).dot(point) - h.offset(i);
    residual = std::max(residual, -slack);
    residual = std::max(residual, std::abs(mu[i] * slack));
  }
  return std::max(residual, 0.0);
}

} // namespace

// ---------------------------------------------------------------------------
// Projected Gauss-Seidel on the dual
// ---------------------------------------------------------------------------

ProjectionResult project(const Vec& v, const HalfspaceSystem& halfspaces,
                         const MassMetric& metric, const SolverParams& params,
                         const Vec* warm_start) {
  const int rows = halfspaces.size();
  if (v.size() != halfspaces.dim() || metric.dim() != v.size()) {
    throw Error("projection input dimension mismatch");
  }

  ProjectionResult result;
  if (rows == 0) {
    result.point = v;
    result.multipliers = Vec(0);
    return result;
  }

  Vec mu = Vec::Zero(rows);
  if (warm_start != nullptr) {
    if (warm_start->size() != rows) {
      throw Error("warm start size mismatch");
    }
    mu = warm_start->cwiseMax(0.0);
  }

  // Precompute M^{-1} a_i and the diagonal <a_i, M^{-1} a_i>.
  std::vector<Vec> minv_normals(rows);
  Vec diag(rows);
  for (int i = 0; i < rows; ++i) {
    minv_normals[i] = metric.apply_inverse(halfspaces.normal(i));
    diag[i] = halfspaces.normal(i).dot(minv_normals[i]);
  }

  Vec point = point_from_multipliers(v, halfspaces, metric, mu);
  const double divergence_cap =
      params.divergence_scale * std::max(1.0, v.lpNorm<Eigen::Infinity>());

  int sweep = 0;
  double residual = kkt_residual(halfspaces, point, mu);
  while (residual > params.tolerance && sweep < params.max_sweeps) {
    for (int i = 0; i < rows; ++i) {
      const double slack = halfspaces.normal(i).dot(point) - halfspaces.offset(i);
      const double updated = std::max(0.0, mu[i] - slack / diag[i]);
      const double delta = updated - mu[i];
      if (delta != 0.0) {
        point += delta * minv_normals[i];
        mu[i] = updated;
      }
    }
    ++sweep;
    // Rebase on the multipliers so stationarity stays exact and the residual
    // is measured on the reported iterate, not a drifted one.
    point = point_from_multipliers(v, halfspaces, metric, mu);
    residual = kkt_residual(halfspaces, point, mu);
    if (mu.lpNorm<Eigen::Infinity>() > divergence_cap) {
      throw InfeasibleError(
          "projection multipliers diverged after " + std::to_string(sweep) +
          " sweeps; the halfspace intersection is empty or nearly so "
          "(for the time stepping scheme: reduce h)");
    }
  }

  result.point = std::move(point);
  result.multipliers = mu;
  result.iterations = sweep;
  result.kkt_residual = residual;

  if (result.kkt_residual > params.tolerance) {
    throw MaxIterationsError(
        "projection did not reach tolerance " + std::to_string(params.tolerance) +
            " within " + std::to_string(params.max_sweeps) +
            " sweeps (residual " + std::to_string(result.kkt_residual) + ")",
        std::move(result));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Enumeration oracle
// ---------------------------------------------------------------------------

ProjectionResult project_by_enumeration(const Vec& v,
                                        const HalfspaceSystem& halfspaces,
                                        const MassMetric& metric) {
  const int rows = halfspaces.size();
  if (rows > 20) {
    throw Error("enumeration oracle limited to 20 rows");
  }
  if (v.size() != halfspaces.dim() || metric.dim() != v.size()) {
    throw Error("projection input dimension mismatch");
  }

  ProjectionResult result;
  result.multipliers = Vec::Zero(rows);

  const double scale = std::max(1.0, v.lpNorm<Eigen::Infinity>());
  const double feas_tol = 1e-9 * scale;
  const double dual_tol = 1e-11 * scale;

  // Subsets ordered by cardinality, then lexicographically: the first
  // qualifying subset is the lowest-cardinality one.
  std::vector<std::uint32_t> masks;
  masks.reserve(1u << rows);
  for (std::uint32_t mask = 0; mask < (1u << rows); ++mask) {
    masks.push_back(mask);
  }
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) {
                     const int ca = std::popcount(a), cb = std::popcount(b);
                     return ca != cb ? ca < cb : a < b;
                   });

  for (const std::uint32_t mask : masks) {
    std::vector<int> subset;
    for (int i = 0; i < rows; ++i) {
      if (mask & (1u << i)) {
        subset.push_back(i);
      }
    }
    const int k = static_cast<int>(subset.size());

    // Equality-constrained minimizer: u = v + M^{-1} A^T mu with
    // (A M^{-1} A^T) mu = b - A v.
    Eigen::MatrixXd gram(k, k);
    Eigen::VectorXd rhs(k);
    for (int a = 0; a < k; ++a) {
      const Vec minv_na = metric.apply_inverse(halfspaces.normal(subset[a]));
      for (int b = 0; b < k; ++b) {
        gram(a, b) = halfspaces.normal(subset[b]).dot(minv_na);
      }
      rhs[a] = halfspaces.offset(subset[a]) - halfspaces.normal(subset[a]).dot(v);
    }

    Eigen::VectorXd mu_subset;
    if (k > 0) {
      const auto cod = gram.completeOrthogonalDecomposition();
      mu_subset = cod.solve(rhs); // minimal-norm solution for singular subsets
      if ((gram * mu_subset - rhs).lpNorm<Eigen::Infinity>() > feas_tol) {
        continue; // inconsistent equality system
      }
      if ((mu_subset.array() < -dual_tol).any()) {
        continue;
      }
    } else {
      mu_subset = Eigen::VectorXd(0);
    }

    Vec mu = Vec::Zero(rows);
    for (int a = 0; a < k; ++a) {
      mu[subset[a]] = std::max(0.0, mu_subset[a]);
    }
    const Vec point = point_from_multipliers(v, halfspaces, metric, mu);

    bool feasible = true;
    for (int i = 0; i < rows && feasible; ++i) {
      feasible = halfspaces.normal(i).dot(point) - halfspaces.offset(i) >= -feas_tol;
    }
    if (!feasible) {
      continue;
    }

    result.point = point;
    result.multipliers = mu;
    result.iterations = static_cast<int>(mask);
    result.kkt_residual = kkt_residual(halfspaces, point, mu);
    return result;
  }

  throw InfeasibleError("enumeration found no feasible active subset");
}

// ---------------------------------------------------------------------------
// Cone decomposition
// ---------------------------------------------------------------------------

std::pair<Vec, Vec> cone_decompose(const Vec& v, const HalfspaceSystem& cone,
                                   const MassMetric& metric,
                                   const SolverParams& params) {
  const double offset_tol = 1e-12 * std::max(1.0, v.lpNorm<Eigen::Infinity>());
  for (int i = 0; i < cone.size(); ++i) {
    if (std::abs(cone.offset(i)) > offset_tol) {
      throw NotAConeError("halfspace system has nonzero offset in row " +
                          std::to_string(i) + "; not a cone through the origin");
    }
  }
  const ProjectionResult projected = project(v, cone, metric, params);
  Vec normal = v - projected.point;
  return {projected.point, std::move(normal)};
}

} // namespace proxstep
