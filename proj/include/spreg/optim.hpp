#pragma once

#include <Eigen/Dense>
#include <functional>

namespace spreg {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd gradient;
};

struct OptimOptions {
  double grad_tol = 1e-6;   // sup-norm of the gradient at convergence
  int max_iterations = 500;
};

/// BFGS maximization with Armijo backtracking. `grad` may be empty, in which
/// case central finite differences (step fd_step) are used.
OptimResult maximize_bfgs(const Objective& f, const Gradient& grad, Eigen::VectorXd start,
                          const OptimOptions& opts = {}, double fd_step = 1e-6);

/// Central-difference gradient.
Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double step = 1e-6);

/// Central-difference Hessian (symmetric).
Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double step = 1e-5);

}  // namespace spreg
