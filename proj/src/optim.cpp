#include "spreg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spreg {

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index p = x.size();
  Eigen::MatrixXd H(p, p);
  Eigen::VectorXd xp = x;
  const double f0 = f(x);
  Eigen::VectorXd h(p);
  for (Eigen::Index i = 0; i < p; ++i) h(i) = step * std::max(1.0, std::abs(x(i)));
  for (Eigen::Index i = 0; i < p; ++i) {
    xp(i) = x(i) + h(i);
    const double fp = f(xp);
    xp(i) = x(i) - h(i);
    const double fm = f(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
    for (Eigen::Index j = i + 1; j < p; ++j) {
      xp(i) = x(i) + h(i);
      xp(j) = x(j) + h(j);
      const double fpp = f(xp);
      xp(j) = x(j) - h(j);
      const double fpm = f(xp);
      xp(i) = x(i) - h(i);
      const double fmm = f(xp);
      xp(j) = x(j) + h(j);
      const double fmp = f(xp);
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

OptimResult maximize_bfgs(const Objective& f, const Gradient& grad, Eigen::VectorXd start,
                          const OptimOptions& opts, double fd_step) {
  const auto g_of = [&](const Eigen::VectorXd& x) {
    return grad ? grad(x) : fd_gradient(f, x, fd_step);
  };
  const Eigen::Index p = start.size();
  Eigen::VectorXd x = std::move(start);
  double fx = f(x);
  if (!std::isfinite(fx)) throw std::invalid_argument("maximize_bfgs: objective not finite at start");
  Eigen::VectorXd g = g_of(x);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(p, p);
  OptimResult res;
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = Hinv * g;
    if (dir.dot(g) <= 0.0) {  // not an ascent direction; reset
      Hinv.setIdentity();
      dir = g;
    }
    // Armijo backtracking.
    double step = 1.0;
    const double slope = g.dot(dir);
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new >= fx + 1e-4 * step * slope) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      res.converged = g.lpNorm<Eigen::Infinity>() <= 1e-4;  // stalled near optimum
      break;
    }
    const Eigen::VectorXd g_new = g_of(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;  // note: maximization, y = grad change
    const double sy = -s.dot(y);          // positive when curvature is concave
    if (sy > 1e-12) {
      const Eigen::VectorXd hy = Hinv * (-y);
      const double yhy = -y.dot(hy);
      // BFGS update of the inverse Hessian of -f.
      Hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }
  res.x = x;
  res.value = fx;
  res.gradient = g;
  if (!res.converged && g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) res.converged = true;
  return res;
}

}  // namespace spreg
