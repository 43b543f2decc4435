#include "proxstep/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include <Eigen/Dense>

namespace proxstep {

namespace {

double active_threshold(double rho, double value) {
  return rho + kActiveTolerance * (1.0 + std::abs(value));
}

} // namespace

bool ActiveSet::contains(int i) const {
  return std::find(indices.begin(), indices.end(), i) != indices.end();
}

// ---------------------------------------------------------------------------
// HalfspaceSystem
// ---------------------------------------------------------------------------

void HalfspaceSystem::add_row(Vec normal, double offset, int source) {
  if (normal.size() != dim_) {
    throw Error("halfspace row dimension mismatch");
  }
  if (normal.norm() < kZeroGradientTolerance) {
    throw ZeroGradientError("halfspace row " + std::to_string(size()) +
                            " has numerically zero normal (|a| = " +
                            std::to_string(normal.norm()) + ")");
  }
  normals_.push_back(std::move(normal));
  offsets_.push_back(offset);
  sources_.push_back(source);
}

double HalfspaceSystem::margin(const Vec& u) const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) {
    m = std::min(m, normals_[i].dot(u) - offsets_[i]);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Vec evaluate_all(const ConstraintSystem& cs, double t, const Vec& q) {
  Vec values(cs.size());
  for (int i = 0; i < cs.size(); ++i) {
    values[i] = cs.value(i, t, q);
  }
  return values;
}

ActiveSet active_set(const ConstraintSystem& cs, double t, const Vec& q, double rho) {
  ActiveSet result;
  result.threshold = rho;
  for (int i = 0; i < cs.size(); ++i) {
    const double g = cs.value(i, t, q);
    if (g <= active_threshold(rho, g)) {
      result.indices.push_back(i);
    }
  }
  return result;
}

HalfspaceSystem linearized_velocity_set(const ConstraintSystem& cs, double t_next,
                                        const Vec& q, double h,
                                        const RowScreening& screening) {
  HalfspaceSystem result(cs.dimension(), VelocitySetKind::Linearized);
  const double screen = screening.enabled
                            ? screening.threshold(h)
                            : std::numeric_limits<double>::infinity();
  for (int i = 0; i < cs.size(); ++i) {
    const double g = cs.value(i, t_next, q);
    if (g > screen) {
      continue; // cannot become active within one step
    }
    result.add_row(cs.gradient(i, t_next, q), -g / h, i);
  }
  return result;
}

HalfspaceSystem admissible_velocity_cone(const ConstraintSystem& cs, double t,
                                         const Vec& q, double tol_act) {
  HalfspaceSystem result(cs.dimension(), VelocitySetKind::TangentCone);
  for (int i = 0; i < cs.size(); ++i) {
    const double g = cs.value(i, t, q);
    if (g <= active_threshold(tol_act, g)) {
      result.add_row(cs.gradient(i, t, q), -cs.time_derivative(i, t, q), i);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Assumption spot checks
// ---------------------------------------------------------------------------

namespace {

// Largest |second directional difference| of g_i over coordinate axes and a
// few random directions; a cheap stand-in for the Hessian norm.
double second_difference_bound(const ConstraintSystem& cs, int i, double t,
                               const Vec& q, double eps, std::mt19937_64& rng) {
  const double g0 = cs.value(i, t, q);
  double bound = 0.0;
  auto probe = [&](const Vec& dir) {
    const double gp = cs.value(i, t, q + eps * dir);
    const double gm = cs.value(i, t, q - eps * dir);
    bound = std::max(bound, std::abs(gp - 2.0 * g0 + gm) / (eps * eps));
  };
  for (int k = 0; k < q.size(); ++k) {
    Vec dir = Vec::Zero(q.size());
    dir[k] = 1.0;
    probe(dir);
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Vec dir(q.size());
    for (int k = 0; k < q.size(); ++k) {
      dir[k] = gauss(rng);
    }
    if (dir.norm() > 1e-12) {
      probe(dir / dir.norm());
    }
  }
  return bound;
}

} // namespace

AssumptionReport spot_check_assumptions(
    const ConstraintSystem& cs,
    const std::vector<std::pair<double, Vec>>& sample_points, int trials,
    const SpotCheckParams& params) {
  AssumptionReport report;
  report.gradient_norm_min = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (const auto& [t, q] : sample_points) {
    const double eps = params.fd_epsilon * (1.0 + q.norm());
    const double eps_t = params.fd_epsilon * (1.0 + std::abs(t));
    std::vector<Vec> almost_active;

    for (int i = 0; i < cs.size(); ++i) {
      const double g = cs.value(i, t, q);
      const Vec grad = cs.gradient(i, t, q);
      const double grad_norm = grad.norm();
      report.gradient_norm_min = std::min(report.gradient_norm_min, grad_norm);
      report.gradient_norm_max = std::max(report.gradient_norm_max, grad_norm);
      report.time_derivative_max =
          std::max(report.time_derivative_max, std::abs(cs.time_derivative(i, t, q)));
      if (grad_norm < kZeroGradientTolerance) {
        report.flags.push_back("zero gradient for constraint " + std::to_string(i) +
                               " at t=" + std::to_string(t));
      }

      // second derivatives, all by finite differences
      report.second_derivative_max = std::max(
          report.second_derivative_max, second_difference_bound(cs, i, t, q, eps, rng));
      const Vec grad_tp = cs.gradient(i, t + eps_t, q);
      const Vec grad_tm = cs.gradient(i, t - eps_t, q);
      report.second_derivative_max = std::max(
          report.second_derivative_max, (grad_tp - grad_tm).norm() / (2.0 * eps_t));
      const double g_tp = cs.value(i, t + eps_t, q);
      const double g_tm = cs.value(i, t - eps_t, q);
      report.second_derivative_max =
          std::max(report.second_derivative_max,
                   std::abs(g_tp - 2.0 * g + g_tm) / (eps_t * eps_t));

      if (g <= params.almost_active_rho) {
        almost_active.push_back(grad);
      }
    }

    if (almost_active.empty()) {
      continue;
    }
    report.gamma_vacuous = false;
    for (int trial = 0; trial < trials; ++trial) {
      double weighted_norm_sum = 0.0;
      Vec combination = Vec::Zero(cs.dimension());
      for (const Vec& grad : almost_active) {
        const double lambda = unit(rng);
        weighted_norm_sum += lambda * grad.norm();
        combination += lambda * grad;
      }
      ++report.combinations_tried;
      const double denom = combination.norm();
      if (denom < 1e-14 * (1.0 + weighted_norm_sum)) {
        report.flags.push_back(
            "degenerate almost-active combination at t=" + std::to_string(t) +
            " (opposing gradients); reverse-triangle constant unbounded here");
        continue;
      }
      const double ratio = weighted_norm_sum / denom;
      if (!report.gamma_estimate || ratio > *report.gamma_estimate) {
        report.gamma_estimate = ratio;
      }
    }
    ++report.samples_checked;
  }

  if (sample_points.empty()) {
    report.gradient_norm_min = 0.0;
  }
  report.samples_checked = static_cast<int>(sample_points.size());
  return report;
}

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------

namespace {

class AffineWallSystem final : public ConstraintSystem {
public:
  AffineWallSystem(int dim, std::vector<AffineWall> walls)
      : dim_(dim), walls_(std::move(walls)) {
    for (const AffineWall& wall : walls_) {
      if (wall.normal.size() != dim_) {
        throw Error("affine wall normal dimension mismatch");
      }
      if (wall.normal.norm() < kZeroGradientTolerance) {
        throw ZeroGradientError("affine wall with zero normal");
      }
    }
  }

  int dimension() const override { return dim_; }
  int size() const override { return static_cast<int>(walls_.size()); }

  double value(int i, double t, const Vec& q) const override {
    const AffineWall& w = walls_[i];
    return w.normal.dot(q) + w.offset + w.drift * t;
  }

  Vec gradient(int i, double, const Vec&) const override {
    return walls_[i].normal;
  }

  double time_derivative(int i, double, const Vec&) const override {
    return walls_[i].drift;
  }

  bool time_dependent() const override {
    return std::any_of(walls_.begin(), walls_.end(),
                       [](const AffineWall& w) { return w.drift != 0.0; });
  }

private:
  int dim_;
  std::vector<AffineWall> walls_;
};

class FunctionalSystem final : public ConstraintSystem {
public:
  FunctionalSystem(int dim, std::vector<FunctionalConstraint> constraints)
      : dim_(dim), constraints_(std::move(constraints)) {
    for (const FunctionalConstraint& c : constraints_) {
      if (!c.value) {
        throw Error("functional constraint without value callable");
      }
    }
  }

  int dimension() const override { return dim_; }
  int size() const override { return static_cast<int>(constraints_.size()); }

  double value(int i, double t, const Vec& q) const override {
    return constraints_[i].value(t, q);
  }

  Vec gradient(int i, double t, const Vec& q) const override {
    const FunctionalConstraint& c = constraints_[i];
    if (c.gradient) {
      return c.gradient(t, q);
    }
    // central-difference fallback, prototyping accuracy only
    const double eps = 1e-6 * (1.0 + q.norm());
    Vec grad(dim_);
    Vec probe = q;
    for (int k = 0; k < dim_; ++k) {
      const double saved = probe[k];
      probe[k] = saved + eps;
      const double gp = c.value(t, probe);
      probe[k] = saved - eps;
      const double gm = c.value(t, probe);
      probe[k] = saved;
      grad[k] = (gp - gm) / (2.0 * eps);
    }
    return grad;
  }

  double time_derivative(int i, double t, const Vec& q) const override {
    const FunctionalConstraint& c = constraints_[i];
    if (c.time_derivative) {
      return c.time_derivative(t, q);
    }
    if (!c.time_dependent) {
      return 0.0;
    }
    const double eps = 1e-6 * (1.0 + std::abs(t));
    return (c.value(t + eps, q) - c.value(t - eps, q)) / (2.0 * eps);
  }

  bool time_dependent() const override {
    return std::any_of(
        constraints_.begin(), constraints_.end(),
        [](const FunctionalConstraint& c) { return c.time_dependent; });
  }

private:
  int dim_;
  std::vector<FunctionalConstraint> constraints_;
};

class CompositeSystem final : public ConstraintSystem {
public:
  explicit CompositeSystem(std::vector<std::shared_ptr<const ConstraintSystem>> parts)
      : parts_(std::move(parts)) {
    if (parts_.empty()) {
      throw Error("composite constraint system needs at least one part");
    }
    dim_ = parts_.front()->dimension();
    for (const auto& part : parts_) {
      if (!part) {
        throw Error("composite constraint system with null part");
      }
      if (part->dimension() != dim_) {
        throw Error("composite constraint system parts disagree on dimension");
      }
      offsets_.push_back(total_);
      total_ += part->size();
    }
  }

  int dimension() const override { return dim_; }
  int size() const override { return total_; }

  double value(int i, double t, const Vec& q) const override {
    const auto [part, local] = locate(i);
    return parts_[part]->value(local, t, q);
  }

  Vec gradient(int i, double t, const Vec& q) const override {
    const auto [part, local] = locate(i);
    return parts_[part]->gradient(local, t, q);
  }

  double time_derivative(int i, double t, const Vec& q) const override {
    const auto [part, local] = locate(i);
    return parts_[part]->time_derivative(local, t, q);
  }

  bool time_dependent() const override {
    return std::any_of(parts_.begin(), parts_.end(),
                       [](const auto& p) { return p->time_dependent(); });
  }

private:
  std::pair<int, int> locate(int i) const {
    for (int p = static_cast<int>(parts_.size()) - 1; p >= 0; --p) {
      if (i >= offsets_[p]) {
        return {p, i - offsets_[p]};
      }
    }
    throw Error("constraint index out of range");
  }

  std::vector<std::shared_ptr<const ConstraintSystem>> parts_;
  std::vector<int> offsets_;
  int dim_ = 0;
  int total_ = 0;
};

} // namespace

std::shared_ptr<const ConstraintSystem> make_affine_walls(
    int dim, std::vector<AffineWall> walls) {
  return std::make_shared<AffineWallSystem>(dim, std::move(walls));
}

std::shared_ptr<const ConstraintSystem> make_functional_system(
    int dim, std::vector<FunctionalConstraint> constraints) {
  return std::make_shared<FunctionalSystem>(dim, std::move(constraints));
}

std::shared_ptr<const ConstraintSystem> combine_systems(
    std::vector<std::shared_ptr<const ConstraintSystem>> parts) {
  if (parts.size() == 1) {
    return parts.front();
  }
  return std::make_shared<CompositeSystem>(std::move(parts));
}

} // namespace proxstep
