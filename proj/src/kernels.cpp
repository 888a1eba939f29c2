#include "spreg/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace spreg {

double matern(double d, double sigma2, double nu, double rho) {
  if (d < 0.0) throw std::invalid_argument("matern: distance must be >= 0");
  if (sigma2 <= 0.0 || rho <= 0.0)
    throw std::invalid_argument("matern: sigma2 and rho must be positive");
  const double x = std::sqrt(2.0 * nu) * d / rho;
  if (nu == 0.5) return sigma2 * std::exp(-x);
  if (nu == 1.5) return sigma2 * (1.0 + x) * std::exp(-x);
  if (nu == 2.5) return sigma2 * (1.0 + x + x * x / 3.0) * std::exp(-x);
  throw std::invalid_argument("matern: unsupported smoothness; nu must be 1/2, 3/2, or 5/2");
}

}  // namespace spreg
