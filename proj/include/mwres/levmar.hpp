#pragma once

#include <Eigen/Dense>

#include <functional>

namespace mwres {

struct LeastSquaresOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;   // relative
  double cost_tolerance = 1e-14;   // relative reduction of the sum of squares
  double diff_step = 1e-7;         // central-difference step; parameters should be O(1)
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  Eigen::MatrixXd covariance;  // s² (JᵀJ)⁻¹ with s² = RSS / (m − p)
  Eigen::MatrixXd jacobian;
  double rss = 0.0;
  int iterations = 0;
  int status = 0;
  bool converged = false;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, double step);

/// Damped least squares (MINPACK-style Levenberg-Marquardt via Eigen) with a
/// central-difference Jacobian. The returned point is the lowest-cost iterate.
LeastSquaresResult solve_least_squares(const ResidualFunction& residuals, const Eigen::VectorXd& x0,
                                       int n_residuals, const LeastSquaresOptions& options = {});

/// s² (JᵀJ)⁻¹ via a pseudo-inverse so rank deficiency does not throw.
Eigen::MatrixXd linearized_covariance(const Eigen::MatrixXd& jacobian, double rss);

}  // namespace mwres
