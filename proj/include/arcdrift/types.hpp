#pragma once

#include <Eigen/Dense>

namespace arcdrift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// One latent trajectory, column t-1 holds z_t (d x T).
using Trajectory = Eigen::MatrixXd;

} // namespace arcdrift
