#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxstep/errors.hpp"
#include "proxstep/types.hpp"

namespace proxstep {

/// Scaled tolerance deciding "g_i = 0" in floating point.
inline constexpr double kActiveTolerance = 1e-9;

/// Gradient rows below this norm are rejected (they would violate the
/// lower gradient bound required of every constraint).
inline constexpr double kZeroGradientTolerance = 1e-12;

// ---------------------------------------------------------------------------
// ConstraintSystem
// ---------------------------------------------------------------------------

/// A finite family of unilateral constraints g_i(t, q) >= 0 on R^d.
///
/// Implementations must be immutable after construction; all methods are
/// const and safe to call concurrently. Evaluation outside the constraint's
/// domain may throw EvaluationDomainError.
class ConstraintSystem {
public:
  virtual ~ConstraintSystem() = default;

  /// Dimension d of the configuration space.
  virtual int dimension() const = 0;

  /// Number of constraints p.
  virtual int size() const = 0;

  /// g_i(t, q).
  virtual double value(int i, double t, const Vec& q) const = 0;

  /// Spatial gradient of g_i at (t, q).
  virtual Vec gradient(int i, double t, const Vec& q) const = 0;

  /// Partial time derivative of g_i at (t, q). Zero for time-independent
  /// families.
  virtual double time_derivative(int i, double t, const Vec& q) const {
    (void)i;
    (void)t;
    (void)q;
    return 0.0;
  }

  /// True if any constraint genuinely depends on t.
  virtual bool time_dependent() const { return false; }
};

// ---------------------------------------------------------------------------
// ActiveSet
// ---------------------------------------------------------------------------

/// Indices of constraints with g_i(t, q) <= threshold at a query point.
struct ActiveSet {
  std::vector<int> indices;
  double threshold = 0.0;

  bool contains(int i) const;
  int count() const { return static_cast<int>(indices.size()); }
};

// ---------------------------------------------------------------------------
// HalfspaceSystem
// ---------------------------------------------------------------------------

/// Which velocity set a HalfspaceSystem encodes.
enum class VelocitySetKind : std::uint8_t {
  Linearized,  ///< first-order-in-space set used by each discrete step
  TangentCone, ///< admissible velocity cone at an active configuration
  Custom,
};

/// A finite intersection of affine halfspaces { u : <a_i, u> >= b_i }.
///
/// An empty row set encodes all of R^d. Rows with numerically zero normal
/// are rejected at construction.
class HalfspaceSystem {
public:
  explicit HalfspaceSystem(int dim, VelocitySetKind kind = VelocitySetKind::Custom)
      : dim_(dim), kind_(kind) {}

  /// Appends a row; `source` identifies the constraint index it came from
  /// (-1 for synthetic rows). Throws ZeroGradientError for a zero normal.
  void add_row(Vec normal, double offset, int source = -1);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(normals_.size()); }
  bool empty() const { return normals_.empty(); }
  VelocitySetKind kind() const { return kind_; }

  const Vec& normal(int row) const { return normals_[row]; }
  double offset(int row) const { return offsets_[row]; }
  int source(int row) const { return sources_[row]; }

  /// min_i (<a_i, u> - b_i); +infinity when there are no rows.
  double margin(const Vec& u) const;

  /// Membership test with tolerance: margin(u) >= -tol.
  bool contains(const Vec& u, double tol = kActiveTolerance) const {
    return margin(u) >= -tol;
  }

private:
  int dim_;
  VelocitySetKind kind_;
  std::vector<Vec> normals_;
  std::vector<double> offsets_;
  std::vector<int> sources_;
};

// ---------------------------------------------------------------------------
// Row screening
// ---------------------------------------------------------------------------

/// Opt-in screening of provably inactive rows when building the linearized
/// velocity set: rows with g_i(t, q) > h * gradient_bound * velocity_cap +
/// margin cannot become active within one step and may be omitted.
/// Disabled by default (all rows kept).
struct RowScreening {
  bool enabled = false;
  double velocity_cap = 0.0;    ///< estimate of sup |u| over the run
  double gradient_bound = 1.0;  ///< upper bound on |grad g_i|
  double margin = 0.0;

  double threshold(double h) const {
    return h * gradient_bound * velocity_cap + margin;
  }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// All constraint values at (t, q), component i equal to g_i(t, q).
Vec evaluate_all(const ConstraintSystem& cs, double t, const Vec& q);

/// Indices with g_i(t, q) <= rho, up to the scaled active tolerance.
ActiveSet active_set(const ConstraintSystem& cs, double t, const Vec& q, double rho);

/// The linearized admissible velocity set at (t_next, q) for step h:
///   { u : g_i(t_next, q) + h <grad g_i(t_next, q), u> >= 0 }.
/// Rows are a_i = grad g_i, offsets b_i = -g_i / h. With screening enabled,
/// rows whose value exceeds the screening threshold are omitted.
HalfspaceSystem linearized_velocity_set(const ConstraintSystem& cs, double t_next,
                                        const Vec& q, double h,
                                        const RowScreening& screening = {});

/// The admissible velocity cone at (t, q): rows grad g_i, offsets
/// -dt g_i, for the constraints active up to tol_act. No active
/// constraints yields the trivial (row-free) system.
HalfspaceSystem admissible_velocity_cone(const ConstraintSystem& cs, double t,
                                         const Vec& q,
                                         double tol_act = kActiveTolerance);

// ---------------------------------------------------------------------------
// Assumption spot checks
// ---------------------------------------------------------------------------

struct SpotCheckParams {
  double almost_active_rho = 0.1; ///< threshold collecting almost-active gradients
  double fd_epsilon = 1e-5;       ///< finite-difference step (scaled by 1 + |q|)
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

/// Empirical estimates of the regularity bounds a constraint family is
/// expected to satisfy. Informational; never a gate.
struct AssumptionReport {
  double gradient_norm_min = 0.0;       ///< empirical lower gradient bound
  double gradient_norm_max = 0.0;       ///< empirical upper gradient bound
  double time_derivative_max = 0.0;     ///< sup |dt g_i|
  double second_derivative_max = 0.0;   ///< sup of FD estimates of 2nd derivatives
  std::optional<double> gamma_estimate; ///< best reverse-triangle constant seen
  bool gamma_vacuous = true;            ///< no sample had almost-active gradients
  int samples_checked = 0;
  int combinations_tried = 0;
  std::vector<std::string> flags;       ///< detected defects (zero gradients, ...)
};

/// Probes the constraint family at the given (t, q) samples: measures
/// gradient-norm bounds, finite-difference derivative bounds, and estimates
/// the reverse-triangle constant over `trials` random nonnegative
/// combinations of almost-active gradients per sample.
AssumptionReport spot_check_assumptions(
    const ConstraintSystem& cs,
    const std::vector<std::pair<double, Vec>>& sample_points, int trials,
    const SpotCheckParams& params = {});

// ---------------------------------------------------------------------------
// Built-in constraint families
// ---------------------------------------------------------------------------

/// A single affine wall  a . q + b + c t >= 0.
struct AffineWall {
  Vec normal;
  double offset = 0.0;
  double drift = 0.0; ///< coefficient of t
};

/// Constraint family made of affine walls.
std::shared_ptr<const ConstraintSystem> make_affine_walls(int dim,
                                                          std::vector<AffineWall> walls);

/// One user-supplied constraint. `value` is required; a missing gradient
/// falls back to central finite differences (lower accuracy, prototyping
/// only), a missing time derivative to zero unless `time_dependent` is set,
/// in which case it is finite-differenced as well.
struct FunctionalConstraint {
  std::function<double(double, const Vec&)> value;
  std::function<Vec(double, const Vec&)> gradient;        // optional
  std::function<double(double, const Vec&)> time_derivative; // optional
  bool time_dependent = false;
};

std::shared_ptr<const ConstraintSystem> make_functional_system(
    int dim, std::vector<FunctionalConstraint> constraints);

/// Concatenates several families over the same configuration space into one,
/// indices ordered by part then by index within the part.
std::shared_ptr<const ConstraintSystem> combine_systems(
    std::vector<std::shared_ptr<const ConstraintSystem>> parts);

} // namespace proxstep
