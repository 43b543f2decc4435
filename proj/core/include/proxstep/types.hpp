#pragma once

#include <Eigen/Core>

namespace proxstep {

/// Dense column vector used for configurations, velocities and multipliers.
using Vec = Eigen::VectorXd;

} // namespace proxstep
