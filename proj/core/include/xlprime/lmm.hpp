#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xlprime/design.hpp"

namespace xlp {

/// ML fit of y ~ N(X beta, sigma2 I + tau2 Z Z^T) with one random intercept per group.
struct LmmFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov;
  double sigma2 = 0.0;
  double tau2 = 0.0;
  double lambda = 0.0;  ///< tau2 / sigma2
  double loglik = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t g = 0;
  std::vector<std::string> column_names;
  std::vector<int> groups;
  bool converged = true;
  int iterations = 0;
};

struct LmmOptions {
  double log_lambda_min = -12.0;
  double log_lambda_max = 12.0;
  int grid_points = 49;  ///< coarse scan before the bounded refinement
  int max_iterations = 200;
};

/// Profiles beta and sigma2 out analytically and maximizes over log(lambda) in
/// [log_lambda_min, log_lambda_max] (plus the lambda = 0 boundary). Each evaluation costs
/// O(n p + g p^2 + p^3) using the block structure of the covariance.
LmmFit fit_lmm(const DesignMatrix& design, const LmmOptions& options = {});

/// Profiled log-likelihood at a fixed lambda >= 0.
double profile_loglik(const DesignMatrix& design, double lambda);

}  // namespace xlp
