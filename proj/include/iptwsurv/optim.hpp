#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace iptwsurv {

/// Objective for maximization: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  // Initial inverse Hessian from central differences of the gradient at the start.
  bool hessian_start = true;
  double hessian_step = 1e-5;
};

struct BfgsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> trace;  // objective at every accepted iterate
};

/// Quasi-Newton ascent with a backtracking Armijo line search. Accepted steps never
/// decrease f; convergence is max |gradient| <= tolerance.
BfgsResult bfgs_maximize(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

/// Central-difference Hessian of f from its analytic gradient.
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double step = 1e-5);

}  // namespace iptwsurv
