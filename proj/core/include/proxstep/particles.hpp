#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "proxstep/constraints.hpp"
#include "proxstep/projection.hpp"
#include "proxstep/scheme.hpp"
#include "proxstep/types.hpp"

namespace proxstep {

/// Sphere radius, possibly growing linearly in time: r(t) = value + rate * t.
struct RadiusProfile {
  double value = 1.0;
  double rate = 0.0;

  double at(double t) const { return value + rate * t; }
  bool constant() const { return rate == 0.0; }
};

// ---------------------------------------------------------------------------
// SphereSystem
// ---------------------------------------------------------------------------

/// N rigid spheres in 3D. Configurations are stacked center coordinates
/// q = (x_0, y_0, z_0, x_1, ...) in R^{3N}. Immutable once built.
class SphereSystem {
public:
  /// Throws InvalidScenarioError unless radii stay positive on [0, horizon]
  /// and masses are positive.
  SphereSystem(std::vector<RadiusProfile> radii, std::vector<double> masses,
               double horizon);

  int count() const { return static_cast<int>(radii_.size()); }
  int dimension() const { return 3 * count(); }
  double radius(int i, double t) const { return radii_[i].at(t); }
  double radius_rate(int i) const { return radii_[i].rate; }
  double mass(int i) const { return masses_[i]; }
  bool radii_constant() const;

  /// Block-diagonal mass metric diag(..., m_i, m_i, m_i, ...).
  MassMetric mass_metric() const;

  Eigen::Vector3d center(const Vec& q, int i) const { return q.segment<3>(3 * i); }

private:
  std::vector<RadiusProfile> radii_;
  std::vector<double> masses_;
};

/// Geometry of one sphere pair at a configuration.
struct ContactPair {
  int i = 0;
  int j = 0;
  double distance = 0.0;          ///< signed gap
  Eigen::Vector3d direction;      ///< unit vector from center i to center j
  Vec gradient;                   ///< stacked gradient of the gap in R^{3N}
};

// ---------------------------------------------------------------------------
// Pair indexing
// ---------------------------------------------------------------------------

/// Row-major index of the pair (i, j), i < j, among all n-choose-2 pairs:
/// (0,1), (0,2), ..., (0,n-1), (1,2), ...
int pair_index(int i, int j, int n);
std::pair<int, int> pair_from_index(int k, int n);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Signed gap |q_i - q_j| - (r_i(t) + r_j(t)): positive iff separated, zero
/// at touching, negative iff overlapping. Throws CoincidentCentersError when
/// the centers (numerically) coincide.
double signed_distance(const SphereSystem& sys, const Vec& q, double t, int i, int j);

/// Gap value, contact direction and stacked gradient for the pair (i, j).
/// The gradient has -direction in block i, +direction in block j, and norm
/// sqrt(2).
ContactPair contact_pair(const SphereSystem& sys, const Vec& q, double t, int i,
                         int j);

/// The N(N-1)/2 non-overlap constraints as a constraint family; constraint
/// k corresponds to pair_from_index(k, N). Time derivative of the gap is
/// -(dr_i + dr_j) for time-dependent radii.
std::shared_ptr<const ConstraintSystem> non_overlap_constraints(
    std::shared_ptr<const SphereSystem> sys);

/// Axis-aligned box walls keeping every sphere inside: for each bounded face
/// and sphere i, the face-to-surface gap is a constraint. Ordering: sphere
/// index outer, then axis 0..2, then (low, high) per bounded face. Unbounded
/// faces are simply absent.
struct BoxBounds {
  std::array<std::optional<double>, 3> lo;
  std::array<std::optional<double>, 3> hi;
};

std::shared_ptr<const ConstraintSystem> box_wall_constraints(
    std::shared_ptr<const SphereSystem> sys, const BoxBounds& box);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Observables of a sphere run, one entry per trajectory record.
struct ParticleDiagnostics {
  std::vector<Eigen::Vector3d> momentum;
  std::vector<double> kinetic_energy; ///< (1/2) (u, u)_M
};

ParticleDiagnostics particle_diagnostics(const SphereSystem& sys,
                                         const Trajectory& trajectory);

} // namespace proxstep
