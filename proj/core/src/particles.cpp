#include "proxstep/particles.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace proxstep {

namespace {
constexpr double kCoincidentTol = 1e-12;
}

// ---------------------------------------------------------------------------
// SphereSystem
// ---------------------------------------------------------------------------

SphereSystem::SphereSystem(std::vector<RadiusProfile> radii,
                           std::vector<double> masses, double horizon)
    : radii_(std::move(radii)), masses_(std::move(masses)) {
  if (radii_.empty() || radii_.size() != masses_.size()) {
    throw InvalidScenarioError("sphere system needs matching radii and masses");
  }
  for (std::size_t i = 0; i < radii_.size(); ++i) {
    const double r0 = radii_[i].at(0.0);
    const double rT = radii_[i].at(horizon);
    if (!(std::min(r0, rT) > 0.0)) {
      throw InvalidScenarioError("sphere " + std::to_string(i) +
                                 " radius must stay positive over the horizon");
    }
    if (!(masses_[i] > 0.0)) {
      throw InvalidScenarioError("sphere " + std::to_string(i) +
                                 " mass must be positive");
    }
  }
}

bool SphereSystem::radii_constant() const {
  for (const RadiusProfile& r : radii_) {
    if (!r.constant()) {
      return false;
    }
  }
  return true;
}

MassMetric SphereSystem::mass_metric() const {
  Vec diag(dimension());
  for (int i = 0; i < count(); ++i) {
    diag.segment<3>(3 * i).setConstant(masses_[i]);
  }
  return MassMetric(std::move(diag));
}

// ---------------------------------------------------------------------------
// Pair indexing (row-major over i < j)
// ---------------------------------------------------------------------------

int pair_index(int i, int j, int n) {
  // pairs (0,1)..(0,n-1) come first, then (1,2)..; offset of block i is
  // i*n - i(i+1)/2.
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<int, int> pair_from_index(int k, int n) {
  int i = 0;
  int block = n - 1;
  while (k >= block) {
    k -= block;
    ++i;
    --block;
  }
  return {i, i + 1 + k};
}

// ---------------------------------------------------------------------------
// Pair geometry
// ---------------------------------------------------------------------------

double signed_distance(const SphereSystem& sys, const Vec& q, double t, int i,
                       int j) {
  const Eigen::Vector3d gap = sys.center(q, j) - sys.center(q, i);
  const double centers = gap.norm();
  if (centers < kCoincidentTol) {
    throw CoincidentCentersError("spheres " + std::to_string(i) + " and " +
                                 std::to_string(j) + " have coincident centers");
  }
  return centers - (sys.radius(i, t) + sys.radius(j, t));
}

ContactPair contact_pair(const SphereSystem& sys, const Vec& q, double t, int i,
                         int j) {
  const Eigen::Vector3d gap = sys.center(q, j) - sys.center(q, i);
  const double centers = gap.norm();
  if (centers < kCoincidentTol) {
    throw CoincidentCentersError("spheres " + std::to_string(i) + " and " +
                                 std::to_string(j) + " have coincident centers");
  }
  ContactPair pair;
  pair.i = i;
  pair.j = j;
  pair.distance = centers - (sys.radius(i, t) + sys.radius(j, t));
  pair.direction = gap / centers;
  pair.gradient = Vec::Zero(sys.dimension());
  pair.gradient.segment<3>(3 * i) = -pair.direction;
  pair.gradient.segment<3>(3 * j) = pair.direction;
  return pair;
}

// ---------------------------------------------------------------------------
// Constraint adapters
// ---------------------------------------------------------------------------

namespace {

class NonOverlapSystem final : public ConstraintSystem {
public:
  explicit NonOverlapSystem(std::shared_ptr<const SphereSystem> sys)
      : sys_(std::move(sys)) {
    const int n = sys_->count();
    pair_count_ = n * (n - 1) / 2;
  }

  int dimension() const override { return sys_->dimension(); }
  int size() const override { return pair_count_; }

  double value(int k, double t, const Vec& q) const override {
    const auto [i, j] = pair_from_index(k, sys_->count());
    return signed_distance(*sys_, q, t, i, j);
  }

  Vec gradient(int k, double t, const Vec& q) const override {
    const auto [i, j] = pair_from_index(k, sys_->count());
    return contact_pair(*sys_, q, t, i, j).gradient;
  }

  double time_derivative(int k, double, const Vec&) const override {
    const auto [i, j] = pair_from_index(k, sys_->count());
    return -(sys_->radius_rate(i) + sys_->radius_rate(j));
  }

  bool time_dependent() const override { return !sys_->radii_constant(); }

private:
  std::shared_ptr<const SphereSystem> sys_;
  int pair_count_ = 0;
};

// One wall constraint: gap between a sphere's surface and a box face.
struct WallFace {
  int sphere = 0;
  int axis = 0;
  bool low = true;
  double position = 0.0;
};

class SphereWallSystem final : public ConstraintSystem {
public:
  SphereWallSystem(std::shared_ptr<const SphereSystem> sys,
                   std::vector<WallFace> faces)
      : sys_(std::move(sys)), faces_(std::move(faces)) {}

  int dimension() const override { return sys_->dimension(); }
  int size() const override { return static_cast<int>(faces_.size()); }

  double value(int k, double t, const Vec& q) const override {
    const WallFace& f = faces_[k];
    const double center = q[3 * f.sphere + f.axis];
    const double r = sys_->radius(f.sphere, t);
    return f.low ? center - f.position - r : f.position - center - r;
  }

  Vec gradient(int k, double, const Vec&) const override {
    const WallFace& f = faces_[k];
    Vec grad = Vec::Zero(sys_->dimension());
    grad[3 * f.sphere + f.axis] = f.low ? 1.0 : -1.0;
    return grad;
  }

  double time_derivative(int k, double, const Vec&) const override {
    return -sys_->radius_rate(faces_[k].sphere);
  }

  bool time_dependent() const override { return !sys_->radii_constant(); }

private:
  std::shared_ptr<const SphereSystem> sys_;
  std::vector<WallFace> faces_;
};

} // namespace

std::shared_ptr<const ConstraintSystem> non_overlap_constraints(
    std::shared_ptr<const SphereSystem> sys) {
  return std::make_shared<NonOverlapSystem>(std::move(sys));
}

std::shared_ptr<const ConstraintSystem> box_wall_constraints(
    std::shared_ptr<const SphereSystem> sys, const BoxBounds& box) {
  std::vector<WallFace> faces;
  for (int i = 0; i < sys->count(); ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      if (box.lo[axis]) {
        faces.push_back({i, axis, true, *box.lo[axis]});
      }
      if (box.hi[axis]) {
        faces.push_back({i, axis, false, *box.hi[axis]});
      }
    }
  }
  return std::make_shared<SphereWallSystem>(std::move(sys), std::move(faces));
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

ParticleDiagnostics particle_diagnostics(const SphereSystem& sys,
                                         const Trajectory& trajectory) {
  ParticleDiagnostics out;
  out.momentum.reserve(trajectory.records.size());
  out.kinetic_energy.reserve(trajectory.records.size());
  const MassMetric metric = sys.mass_metric();
  for (const StepRecord& record : trajectory.records) {
    Eigen::Vector3d momentum = Eigen::Vector3d::Zero();
    for (int i = 0; i < sys.count(); ++i) {
      momentum += sys.mass(i) * record.u.segment<3>(3 * i);
    }
    out.momentum.push_back(momentum);
    out.kinetic_energy.push_back(0.5 * metric.dot(record.u, record.u));
  }
  return out;
}

} // namespace proxstep
