#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "rmst/dataset.hpp"
#include "rmst/gmm.hpp"

namespace rmst {

// Identity link with independence working correlation: least squares on the
// pseudo-observations with a robust (sandwich) covariance.
struct GeeFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd sandwich_cov;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  double confidence = 0.95;
};

GeeFit gee_fit(const DesignMatrix& design, const Eigen::VectorXd& y, double confidence = 0.95);

struct RmstDifference {
  double estimate = 0.0;  // arm 1 minus arm 0
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double rmst_arm0 = 0.0;
  double rmst_arm1 = 0.0;
};

// Separate KM integrals per arm; variance per arm is
// sum over event times t_j < tau of (int_{t_j}^tau S)^2 d_j / (n_j (n_j - d_j)).
RmstDifference km_diff_rmst(const Dataset& data, double tau, double confidence = 0.95);

}  // namespace rmst
