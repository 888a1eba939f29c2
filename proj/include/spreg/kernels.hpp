#pragma once

namespace spreg {

/// Matern covariance at distance d, restricted to the half-integer
/// smoothnesses nu in {1/2, 3/2, 5/2} (closed forms).
double matern(double d, double sigma2, double nu, double rho);

}  // namespace spreg
