#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>

#include "spreg/areal_graph.hpp"
#include "spreg/fit_result.hpp"
#include "spreg/moran.hpp"

namespace spreg {

enum class MixedKind { car, rsr, bsf };

std::string to_string(MixedKind kind);
MixedKind mixed_kind_from_string(const std::string& s);

struct MixedModelSpec {
  MixedKind kind = MixedKind::rsr;
  int q = 100;                    // basis size (rsr/bsf)
  double prior_beta_var = 100.0;  // spherical Gaussian prior on beta
  double tau_shape = 0.5;
  double tau_scale = 2000.0;      // gamma prior with large mean
  bool rho_fixed = false;         // car only; otherwise uniform(0,1) prior
  double rho_value = 0.5;
  double sigma_eta = 0.1;         // spherical proposal sd for eta
  int thin = 5;
};

/// Post-burn-in draws, thinned. effect_draws has q columns for rsr/bsf and n
/// for car.
struct PosteriorSamples {
  Eigen::MatrixXd beta_draws;
  Eigen::MatrixXd effect_draws;
  Eigen::VectorXd tau_draws;
  Eigen::VectorXd rho_draws;        // empty unless rho was sampled
  Eigen::MatrixXd beta_tilde_draws; // empty until adjusted_beta is run
  std::map<std::string, double> acceptance;
  Eigen::VectorXd p_hat;            // posterior mean fitted probabilities
  Eigen::MatrixXd basis;            // rsr/bsf basis columns (empty for car)
  Eigen::MatrixXd penalty;          // B'QB for rsr/bsf, Q Laplacian
  MixedModelSpec spec;
  int iterations = 0;
  int burn_in = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// Traditional Bayesian CAR mixed model: single-site random walks for psi,
/// block random walk for beta, Gibbs for tau, logit random walk for rho.
PosteriorSamples fit_car_mcmc(const Eigen::VectorXd& z, const ArealGraph& graph,
                              const Eigen::MatrixXd& X, const MixedModelSpec& spec,
                              int iterations, int burn_in, std::uint64_t seed);

/// Shared basis + penalty, reusable across chains and replicates. The
/// penalty is B'QB with Q the Laplacian; slicing to q <= basis.q takes the
/// leading columns/block.
struct BasisContext {
  MoranBasis basis;
  Eigen::MatrixXd penalty;
};
BasisContext make_basis_context(const ArealGraph& graph, const Eigen::MatrixXd& X,
                                MixedKind kind, int q_max);

/// RSR (basis from M_x) or BSF (basis from M_1) sampler with the SAMM prior
/// eta ~ N{0, (tau B'QB)^{-1}}, Q the Laplacian. `shared` optionally supplies
/// a precomputed basis.
PosteriorSamples fit_basis_mcmc(const Eigen::VectorXd& z, const ArealGraph& graph,
                                const Eigen::MatrixXd& X, const MixedModelSpec& spec,
                                int iterations, int burn_in, std::uint64_t seed,
                                const BasisContext* shared = nullptr);

/// Fully conjugate Gibbs sampler for a Gaussian response with identity link
/// and known noise variance. Used by the MCMC validity checks.
PosteriorSamples fit_car_gauss_gibbs(const Eigen::VectorXd& y, const ArealGraph& graph,
                                     const Eigen::MatrixXd& X, const MixedModelSpec& spec,
                                     double noise_var, double fixed_tau, int iterations,
                                     int burn_in, std::uint64_t seed);

struct GammaParams {
  double shape;
  double rate;
};

/// Conjugate gamma full conditional for tau given effects eta with prior
/// precision tau * penalty and gamma(shape, scale) prior on tau.
GammaParams tau_full_conditional(const Eigen::VectorXd& effects, const Eigen::MatrixXd& penalty,
                                 double shape, double scale);

/// Posterior-predictive regression adjustment: one beta_tilde draw per
/// retained iteration, drawn from N{delta, (X'X)^{-1}X' Sigma^(k) X(X'X)^{-1}}
/// with Sigma^(k) the covariance of the unrestricted intrinsic spatial effect
/// at the sampled tau (Laplacian pseudoinverse over tau). Fills samples.beta_tilde_draws.
void adjusted_beta(PosteriorSamples& samples, const Eigen::MatrixXd& X, const ArealGraph& graph,
                   std::uint64_t seed);

/// Verifies Xb + psi = X delta + (I-P_x) psi with delta = b + (X'X)^{-1}X'psi.
/// Returns the max absolute residual of the identity.
double decomposition_check(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& psi);

/// Posterior medians, equal-tailed credible intervals, posterior-mean fitted
/// surface. Uses beta_tilde draws for intervals when present.
FitResult posterior_summary(const PosteriorSamples& samples, double level = 0.95);

/// Persist draws as a directory of CSVs plus meta.json.
void save_samples(const PosteriorSamples& samples, const std::string& dir);

}  // namespace spreg
