#include "spreg/mixed.hpp"

#include "spreg/glm.hpp"
#include "spreg/rng.hpp"
#include "spreg/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace spreg {

std::string to_string(MixedKind kind) {
  switch (kind) {
    case MixedKind::car: return "car";
    case MixedKind::rsr: return "rsr";
    case MixedKind::bsf: return "bsf";
  }
  return "?";
}

MixedKind mixed_kind_from_string(const std::string& s) {
  if (s == "car") return MixedKind::car;
  if (s == "rsr") return MixedKind::rsr;
  if (s == "bsf") return MixedKind::bsf;
  throw std::invalid_argument("unknown mixed-model kind: " + s);
}

namespace {

// Proposal scale adapted toward a target acceptance rate during burn-in only,
// frozen afterward.
class AdaptiveScale {
 public:
  AdaptiveScale(double initial, double target) : scale_(initial), target_(target) {}
  double scale() const { return scale_; }
  void record(bool accepted, bool adapting) {
    ++tries_;
    if (accepted) ++accepts_;
    ++window_tries_;
    if (accepted) ++window_accepts_;
    if (adapting && window_tries_ == 50) {
      const double rate = static_cast<double>(window_accepts_) / window_tries_;
      scale_ *= std::exp(std::clamp(rate - target_, -0.5, 0.5));
      window_tries_ = window_accepts_ = 0;
    }
  }
  double rate() const { return tries_ ? static_cast<double>(accepts_) / tries_ : 0.0; }
  void reset_counts() { tries_ = accepts_ = 0; }

 private:
  double scale_;
  double target_;
  long tries_ = 0, accepts_ = 0;
  int window_tries_ = 0, window_accepts_ = 0;
};

double bernoulli_loglik(const Eigen::VectorXd& z, const Eigen::VectorXd& eta) {
  return logistic_log_lik(z, eta);
}

Eigen::MatrixXd beta_proposal_chol(const Eigen::VectorXd& z, const Eigen::MatrixXd& X) {
  // Proposal covariance from the ordinary-GLM asymptotic covariance.
  const LogisticFit glm = fit_logistic(z, X);
  Eigen::MatrixXd cov = glm.cov;
  cov.diagonal().array() += 1e-10;
  return Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
}

void check_acceptance(PosteriorSamples& out, const std::string& block, double rate) {
  out.acceptance[block] = rate;
  if (rate < 0.05 || rate > 0.9)
    out.warnings.push_back("acceptance rate for " + block + " block is " + std::to_string(rate) +
                           ", outside (0.05, 0.9)");
}

// Newton (IRLS) maximization of the penalized Bernoulli log likelihood
// loglik(z, D coef) - coef' P coef / 2. Used to start chains at the
// posterior mode so the smoothing precision's full conditional opens at a
// sensible value instead of collapsing the effects to zero.
Eigen::VectorXd penalized_irls(const Eigen::VectorXd& z, const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& P, int max_iter = 25) {
  const Eigen::Index m = D.cols();
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(D.rows());
  auto objective = [&](const Eigen::VectorXd& c, const Eigen::VectorXd& l) {
    return logistic_log_lik(z, l) - 0.5 * c.dot(P * c);
  };
  double obj = objective(coef, lin);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd p(lin.size()), w(lin.size());
    for (Eigen::Index i = 0; i < lin.size(); ++i) {
      p(i) = logistic(lin(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-10);
    }
    const Eigen::VectorXd grad = D.transpose() * (z - p) - P * coef;
    Eigen::MatrixXd hess = D.transpose() * w.asDiagonal() * D + P;
    hess.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = Eigen::LLT<Eigen::MatrixXd>(hess).solve(grad);
    double alpha = 1.0;
    bool moved = false;
    for (int h = 0; h < 30; ++h, alpha /= 2.0) {
      const Eigen::VectorXd cand = coef + alpha * step;
      const Eigen::VectorXd lin_cand = D * cand;
      const double cand_obj = objective(cand, lin_cand);
      if (cand_obj > obj) {
        coef = cand;
        lin = lin_cand;
        obj = cand_obj;
        moved = true;
        break;
      }
    }
    if (!moved || step.lpNorm<Eigen::Infinity>() * alpha < 1e-8) break;
  }
  return coef;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(12);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << "\n";
  }
}

}  // namespace

GammaParams tau_full_conditional(const Eigen::VectorXd& effects, const Eigen::MatrixXd& penalty,
                                 double shape, double scale) {
  const double quad = effects.size() ? effects.dot(penalty * effects) : 0.0;
  return {shape + static_cast<double>(effects.size()) / 2.0, 1.0 / scale + quad / 2.0};
}

BasisContext make_basis_context(const ArealGraph& graph, const Eigen::MatrixXd& X,
                                MixedKind kind, int q_max) {
  if (kind != MixedKind::rsr && kind != MixedKind::bsf)
    throw std::invalid_argument("make_basis_context: kind must be rsr or bsf");
  const Eigen::MatrixXd residual_to =
      kind == MixedKind::rsr ? X : Eigen::MatrixXd::Ones(graph.n, 1);
  const Eigen::MatrixXd op = moran_operator(graph, residual_to);
  BasisContext ctx;
  ctx.basis = principal_eigs(op, q_max, residual_to);
  const Eigen::MatrixXd Q = laplacian(graph);
  ctx.penalty = ctx.basis.vectors.transpose() * Q * ctx.basis.vectors;
  return ctx;
}

PosteriorSamples fit_basis_mcmc(const Eigen::VectorXd& z, const ArealGraph& graph,
                                const Eigen::MatrixXd& X, const MixedModelSpec& spec,
                                int iterations, int burn_in, std::uint64_t seed,
                                const BasisContext* shared) {
  if (spec.kind != MixedKind::rsr && spec.kind != MixedKind::bsf)
    throw std::invalid_argument("fit_basis_mcmc: kind must be rsr or bsf");
  const Eigen::Index p = X.cols();
  const int q = spec.q;
  PosteriorSamples out;
  out.spec = spec;
  out.iterations = iterations;
  out.burn_in = burn_in;
  out.seed = seed;

  if (q > 0) {
    BasisContext local;
    const BasisContext* ctx = shared;
    if (!ctx) {
      local = make_basis_context(graph, X, spec.kind, q);
      ctx = &local;
    }
    if (ctx->basis.q < q)
      throw std::invalid_argument("fit_basis_mcmc: shared basis has fewer than q columns");
    if (ctx->basis.values(q - 1) <= 1e-8)
      throw std::invalid_argument("fit_basis_mcmc: q exceeds the number of positive Moran "
                                  "eigenvalues (only attractive patterns are retained)");
    out.basis = ctx->basis.vectors.leftCols(q);
    out.penalty = ctx->penalty.topLeftCorner(q, q);
  } else {
    out.basis.resize(graph.n, 0);
    out.penalty.resize(0, 0);
  }

  Rng rng(seed);
  const Eigen::MatrixXd bprop_chol = beta_proposal_chol(z, X);
  Eigen::VectorXd beta = fit_logistic(z, X).beta;
  Eigen::VectorXd eta_coef = Eigen::VectorXd::Zero(q);
  double tau = 1.0;
  if (q > 0 && spec.kind == MixedKind::rsr) {
    // Start rsr at the penalized mode (tau = 1) and open tau at its full
    // conditional there; a cold start at eta = 0 drives the first tau draw to
    // its prior-mean scale (~1e5 here), which freezes eta at zero for the
    // whole run. The basis is orthogonal to X, so the mode start does not
    // pre-load any particular split of the collinear direction. For bsf the
    // basis overlaps C(X) and the mode's split depends on the arbitrary
    // starting tau, so bsf keeps the plain logistic start (the tau warm-up
    // below prevents the cold-start freeze instead).
    Eigen::MatrixXd D(graph.n, p + q);
    D << X, out.basis;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(p + q, p + q);
    P.topLeftCorner(p, p).diagonal().setConstant(1.0 / spec.prior_beta_var);
    P.bottomRightCorner(q, q) = out.penalty;
    const Eigen::VectorXd coef = penalized_irls(z, D, P);
    beta = coef.head(p);
    eta_coef = coef.tail(q);
    const GammaParams g0 =
        tau_full_conditional(eta_coef, out.penalty, spec.tau_shape, spec.tau_scale);
    // Full-conditional mean at the mode, capped at 1: the mode understates the
    // posterior quadratic form (no trace term), and an inflated first tau can
    // freeze eta near the mode for the whole run.
    tau = std::min(g0.shape / g0.rate, 1.0);
  }
  // Hold tau fixed early in burn-in so eta first equilibrates at the starting
  // smoothness; only then let the two adapt jointly.
  const int tau_warm_up = std::min(burn_in / 2, 2000);
  Eigen::VectorXd lin = X * beta + out.basis * eta_coef;  // current linear predictor
  double loglik = bernoulli_loglik(z, lin);

  AdaptiveScale beta_scale(1.0, 0.25);
  // The eta proposal keeps the fixed default sd: tuning it to a target
  // acceptance rate would rescale the step by the basis size and change how
  // far the weakly penalized directions travel in a fixed budget, which is
  // part of the model's advertised behavior as q grows.
  AdaptiveScale eta_scale(spec.sigma_eta, 0.25);
  // Compensated directional moves for rsr only: the basis is orthogonal to X,
  // so shifting one beta coordinate is a pure scalar move that sharpens beta
  // mixing at no cost. For bsf the basis deliberately overlaps C(X) and the
  // model is defined by the plain block/single-site updates; compensated moves
  // would alter its effective exploration of the collinear direction.
  const bool ridge_moves = spec.kind == MixedKind::rsr;
  const Eigen::MatrixXd comp = out.basis.transpose() * X;        // q x p
  const Eigen::MatrixXd resid_dirs = X - out.basis * comp;       // n x p
  std::vector<AdaptiveScale> dir_scales(static_cast<std::size_t>(p), AdaptiveScale(1.0, 0.4));

  const int retained = (iterations - burn_in) / spec.thin;
  out.beta_draws.resize(retained, p);
  out.effect_draws.resize(retained, q);
  out.tau_draws.resize(retained);
  out.p_hat = Eigen::VectorXd::Zero(graph.n);
  int kept = 0;
  long phat_count = 0;

  const double beta_prior_prec = 1.0 / spec.prior_beta_var;
  for (int it = 0; it < iterations; ++it) {
    const bool adapting = it < burn_in;
    // beta block
    {
      Eigen::VectorXd step(p);
      for (Eigen::Index j = 0; j < p; ++j) step(j) = rng.normal();
      const Eigen::VectorXd beta_prop = beta + beta_scale.scale() * (bprop_chol * step);
      const Eigen::VectorXd lin_prop = lin + X * (beta_prop - beta);
      const double ll_prop = bernoulli_loglik(z, lin_prop);
      const double lr = ll_prop - loglik -
                        0.5 * beta_prior_prec * (beta_prop.squaredNorm() - beta.squaredNorm());
      const bool acc = std::log(rng.uniform()) < lr;
      if (acc) {
        beta = beta_prop;
        lin = lin_prop;
        loglik = ll_prop;
      }
      beta_scale.record(acc, adapting);
    }
    // eta block (spherical proposal)
    if (q > 0) {
      Eigen::VectorXd eta_prop(q);
      for (int j = 0; j < q; ++j) eta_prop(j) = eta_coef(j) + eta_scale.scale() * rng.normal();
      const Eigen::VectorXd lin_prop = lin + out.basis * (eta_prop - eta_coef);
      const double ll_prop = bernoulli_loglik(z, lin_prop);
      const double prior_diff =
          eta_prop.dot(out.penalty * eta_prop) - eta_coef.dot(out.penalty * eta_coef);
      const double lr = ll_prop - loglik - 0.5 * tau * prior_diff;
      const bool acc = std::log(rng.uniform()) < lr;
      if (acc) {
        eta_coef = eta_prop;
        lin = lin_prop;
        loglik = ll_prop;
      }
      eta_scale.record(acc, false);
    }
    // compensated beta-direction moves
    for (Eigen::Index j = 0; ridge_moves && j < p; ++j) {
      auto& ds = dir_scales[static_cast<std::size_t>(j)];
      const double delta = ds.scale() * rng.normal();
      const Eigen::VectorXd lin_prop = lin + delta * resid_dirs.col(j);
      const double ll_prop = bernoulli_loglik(z, lin_prop);
      const double beta_j_prop = beta(j) + delta;
      double lr = ll_prop - loglik -
                  0.5 * beta_prior_prec * (beta_j_prop * beta_j_prop - beta(j) * beta(j));
      Eigen::VectorXd eta_prop;
      if (q > 0) {
        eta_prop = eta_coef - delta * comp.col(j);
        lr -= 0.5 * tau *
              (eta_prop.dot(out.penalty * eta_prop) - eta_coef.dot(out.penalty * eta_coef));
      }
      const bool acc = std::log(rng.uniform()) < lr;
      if (acc) {
        beta(j) = beta_j_prop;
        if (q > 0) eta_coef = eta_prop;
        lin = lin_prop;
        loglik = ll_prop;
      }
      ds.record(acc, adapting);
    }
    // tau Gibbs
    if (q > 0 && it >= tau_warm_up) {
      const GammaParams g = tau_full_conditional(eta_coef, out.penalty, spec.tau_shape, spec.tau_scale);
      tau = rng.gamma(g.shape, g.rate);
    }
    if (it >= burn_in) {
      for (int i = 0; i < graph.n; ++i) out.p_hat(i) += logistic(lin(i));
      ++phat_count;
      if ((it - burn_in) % spec.thin == 0 && kept < retained) {
        out.beta_draws.row(kept) = beta.transpose();
        if (q > 0) out.effect_draws.row(kept) = eta_coef.transpose();
        out.tau_draws(kept) = tau;
        ++kept;
      }
    }
  }
  out.beta_draws.conservativeResize(kept, p);
  out.effect_draws.conservativeResize(kept, q);
  out.tau_draws.conservativeResize(kept);
  out.p_hat /= static_cast<double>(phat_count);
  check_acceptance(out, "beta", beta_scale.rate());
  if (q > 0) check_acceptance(out, "eta", eta_scale.rate());
  if (ridge_moves) {
    double dir_rate = 0.0;
    for (const auto& ds : dir_scales) dir_rate += ds.rate();
    check_acceptance(out, "beta_dir", dir_rate / static_cast<double>(p));
  }
  return out;
}

PosteriorSamples fit_car_mcmc(const Eigen::VectorXd& z, const ArealGraph& graph,
                              const Eigen::MatrixXd& X, const MixedModelSpec& spec,
                              int iterations, int burn_in, std::uint64_t seed) {
  const Eigen::Index p = X.cols();
  const int n = graph.n;
  PosteriorSamples out;
  out.spec = spec;
  out.iterations = iterations;
  out.burn_in = burn_in;
  out.seed = seed;
  out.basis.resize(n, 0);

  // Precompute the generalized eigenvalues of A with respect to diag(A1) so
  // log|Q(rho)| = sum log d_i + sum log(1 - rho lambda_i) is O(n) per rho.
  Eigen::VectorXd car_eigs;
  double log_det_d = 0.0;
  {
    Eigen::VectorXd dinv_sqrt = graph.degrees.array().sqrt().inverse();
    const Eigen::MatrixXd W =
        dinv_sqrt.asDiagonal() * graph.adjacency * dinv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    car_eigs = es.eigenvalues();
    log_det_d = graph.degrees.array().log().sum();
  }
  const auto log_det_q = [&](double rho) {
    return log_det_d + (1.0 - rho * car_eigs.array()).log().sum();
  };

  Rng rng(seed);
  const Eigen::MatrixXd bprop_chol = beta_proposal_chol(z, X);
  Eigen::VectorXd beta = fit_logistic(z, X).beta;
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  double tau = 1.0;
  double rho = spec.rho_fixed ? spec.rho_value : 0.5;
  {
    // Penalized-mode start (tau = 1): a cold start at psi = 0 would send the
    // first tau draw to its prior-mean scale and freeze psi at zero.
    Eigen::MatrixXd D(n, p + n);
    D << X, Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(p + n, p + n);
    P.topLeftCorner(p, p).diagonal().setConstant(1.0 / spec.prior_beta_var);
    P.bottomRightCorner(n, n) = car_precision(graph, rho);
    const Eigen::VectorXd coef = penalized_irls(z, D, P, 15);
    beta = coef.head(p);
    psi = coef.tail(n);
  }
  Eigen::VectorXd lin = X * beta + psi;
  double loglik = bernoulli_loglik(z, lin);
  // Hold tau and rho fixed early in burn-in: the penalized mode understates
  // psi's posterior roughness, and a tau draw taken before psi equilibrates
  // lands far above the posterior scale and freezes the spatial effects.
  const int warm_up = std::min(burn_in / 2, 3000);

  AdaptiveScale beta_scale(1.0, 0.25);
  AdaptiveScale psi_scale(1.0, 0.4);
  AdaptiveScale rho_scale(1.0, 0.4);
  // <v, w>_Q(rho) = sum_i d_i v_i w_i - rho * sum_{(i,j) in E} (v_i w_j + v_j w_i)
  const auto cross_form = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& w, double r) {
    double d = 0.0;
    for (int i = 0; i < n; ++i) d += graph.degrees(i) * v(i) * w(i);
    double a = 0.0;
    for (const auto& [i, j] : graph.edges) a += v(i) * w(j) + v(j) * w(i);
    return d - r * a;
  };

  const int thin = spec.thin;
  const int effect_thin = 10 * thin;  // psi is large; keep storage bounded
  const int retained = (iterations - burn_in) / thin;
  const int eff_retained = (iterations - burn_in) / effect_thin;
  out.beta_draws.resize(retained, p);
  out.tau_draws.resize(retained);
  out.rho_draws.resize(spec.rho_fixed ? 0 : retained);
  out.effect_draws.resize(eff_retained, n);
  out.p_hat = Eigen::VectorXd::Zero(n);
  int kept = 0, eff_kept = 0;
  long phat_count = 0;

  const double beta_prior_prec = 1.0 / spec.prior_beta_var;
  const auto quad_form = [&](const Eigen::VectorXd& v, double r) {
    double d = 0.0;
    for (int i = 0; i < n; ++i) d += graph.degrees(i) * v(i) * v(i);
    double a = 0.0;
    for (const auto& [i, j] : graph.edges) a += v(i) * v(j);
    return d - 2.0 * r * a;
  };

  for (int it = 0; it < iterations; ++it) {
    const bool adapting = it < burn_in;
    // beta block
    {
      Eigen::VectorXd step(p);
      for (Eigen::Index j = 0; j < p; ++j) step(j) = rng.normal();
      const Eigen::VectorXd beta_prop = beta + beta_scale.scale() * (bprop_chol * step);
      const Eigen::VectorXd lin_prop = lin + X * (beta_prop - beta);
      const double ll_prop = bernoulli_loglik(z, lin_prop);
      const double lr = ll_prop - loglik -
                        0.5 * beta_prior_prec * (beta_prop.squaredNorm() - beta.squaredNorm());
      const bool acc = std::log(rng.uniform()) < lr;
      if (acc) {
        beta = beta_prop;
        lin = lin_prop;
        loglik = ll_prop;
      }
      beta_scale.record(acc, adapting);
    }
    // single-site psi updates
    {
      int site_accepts = 0;
      for (int i = 0; i < n; ++i) {
        const double prop = psi(i) + psi_scale.scale() * rng.normal();
        double nb_sum = 0.0;
        for (int j : graph.neighbors[static_cast<std::size_t>(i)]) nb_sum += psi(j);
        const double d_i = graph.degrees(i);
        // conditional prior: N(rho * nb_sum / d_i, 1/(tau d_i))
        const double mean_i = rho * nb_sum / d_i;
        const double eta_cur = lin(i);
        const double eta_prop = eta_cur - psi(i) + prop;
        const double log1pexp_cur =
            eta_cur > 0 ? eta_cur + std::log1p(std::exp(-eta_cur)) : std::log1p(std::exp(eta_cur));
        const double log1pexp_prop = eta_prop > 0 ? eta_prop + std::log1p(std::exp(-eta_prop))
                                                  : std::log1p(std::exp(eta_prop));
        const double lr = z(i) * (eta_prop - eta_cur) - (log1pexp_prop - log1pexp_cur) -
                          0.5 * tau * d_i *
                              ((prop - mean_i) * (prop - mean_i) -
                               (psi(i) - mean_i) * (psi(i) - mean_i));
        const bool acc = std::log(rng.uniform()) < lr;
        if (acc) {
          psi(i) = prop;
          lin(i) = eta_prop;
          ++site_accepts;
        }
        psi_scale.record(acc, adapting);
      }
      (void)site_accepts;
      loglik = bernoulli_loglik(z, lin);
    }
    // Exact ridge Gibbs: beta_j += delta, psi -= delta x_j leaves the linear
    // predictor unchanged, and the two Gaussian priors make delta's full
    // conditional N(b/a, 1/a) — sampled directly, no proposal needed.
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a =
          beta_prior_prec + tau * cross_form(X.col(j), X.col(j), rho);
      const double b = -beta_prior_prec * beta(j) + tau * cross_form(psi, X.col(j), rho);
      const double delta = b / a + rng.normal() / std::sqrt(a);
      beta(j) += delta;
      psi -= delta * X.col(j);
    }
    // tau Gibbs
    if (it >= warm_up) {
      const double quad = quad_form(psi, rho);
      const double shape = spec.tau_shape + static_cast<double>(n) / 2.0;
      const double rate = 1.0 / spec.tau_scale + quad / 2.0;
      tau = rng.gamma(shape, rate);
    }
    // rho logit random walk, uniform(0,1) prior
    if (!spec.rho_fixed && it >= warm_up) {
      const double logit_rho = std::log(rho / (1.0 - rho));
      const double logit_prop = logit_rho + rho_scale.scale() * rng.normal();
      const double rho_prop = 1.0 / (1.0 + std::exp(-logit_prop));
      const double lr = 0.5 * (log_det_q(rho_prop) - log_det_q(rho)) -
                        0.5 * tau * (quad_form(psi, rho_prop) - quad_form(psi, rho)) +
                        std::log(rho_prop * (1.0 - rho_prop)) -
                        std::log(rho * (1.0 - rho));  // logit Jacobian
      const bool acc = std::log(rng.uniform()) < lr;
      if (acc) rho = rho_prop;
      rho_scale.record(acc, adapting);
    }
    if (it >= burn_in) {
      for (int i = 0; i < n; ++i) out.p_hat(i) += logistic(lin(i));
      ++phat_count;
      if ((it - burn_in) % thin == 0 && kept < retained) {
        out.beta_draws.row(kept) = beta.transpose();
        out.tau_draws(kept) = tau;
        if (!spec.rho_fixed) out.rho_draws(kept) = rho;
        ++kept;
      }
      if ((it - burn_in) % effect_thin == 0 && eff_kept < eff_retained) {
        out.effect_draws.row(eff_kept) = psi.transpose();
        ++eff_kept;
      }
    }
  }
  out.beta_draws.conservativeResize(kept, p);
  out.tau_draws.conservativeResize(kept);
  if (!spec.rho_fixed) out.rho_draws.conservativeResize(kept);
  out.effect_draws.conservativeResize(eff_kept, n);
  out.p_hat /= static_cast<double>(phat_count);
  check_acceptance(out, "beta", beta_scale.rate());
  check_acceptance(out, "psi", psi_scale.rate());
  if (!spec.rho_fixed) check_acceptance(out, "rho", rho_scale.rate());
  return out;
}

PosteriorSamples fit_car_gauss_gibbs(const Eigen::VectorXd& y, const ArealGraph& graph,
                                     const Eigen::MatrixXd& X, const MixedModelSpec& spec,
                                     double noise_var, double fixed_tau, int iterations,
                                     int burn_in, std::uint64_t seed) {
  const Eigen::Index p = X.cols();
  const int n = graph.n;
  const Eigen::MatrixXd Q = car_precision(graph, spec.rho_value);
  Rng rng(seed);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  double tau = fixed_tau > 0.0 ? fixed_tau : 1.0;

  PosteriorSamples out;
  out.spec = spec;
  out.iterations = iterations;
  out.burn_in = burn_in;
  out.seed = seed;
  out.basis.resize(n, 0);
  const int retained = (iterations - burn_in) / spec.thin;
  out.beta_draws.resize(retained, p);
  out.effect_draws.resize(retained, n);
  out.tau_draws.resize(retained);
  out.p_hat = Eigen::VectorXd::Zero(n);
  int kept = 0;
  long count = 0;

  const Eigen::MatrixXd xtx = X.transpose() * X;
  for (int it = 0; it < iterations; ++it) {
    // beta | psi
    {
      Eigen::MatrixXd prec = xtx / noise_var;
      prec.diagonal().array() += 1.0 / spec.prior_beta_var;
      const Eigen::LLT<Eigen::MatrixXd> llt(prec);
      const Eigen::VectorXd mean = llt.solve(X.transpose() * (y - psi) / noise_var);
      Eigen::VectorXd zdraw(p);
      for (Eigen::Index j = 0; j < p; ++j) zdraw(j) = rng.normal();
      beta = mean + llt.matrixU().solve(zdraw);
    }
    // psi | beta
    {
      Eigen::MatrixXd prec = tau * Q;
      prec.diagonal().array() += 1.0 / noise_var;
      const Eigen::LLT<Eigen::MatrixXd> llt(prec);
      const Eigen::VectorXd mean = llt.solve((y - X * beta) / noise_var);
      Eigen::VectorXd zdraw(n);
      for (int i = 0; i < n; ++i) zdraw(i) = rng.normal();
      psi = mean + llt.matrixU().solve(zdraw);
    }
    // tau | psi
    if (fixed_tau <= 0.0) {
      const double shape = spec.tau_shape + static_cast<double>(n) / 2.0;
      const double rate = 1.0 / spec.tau_scale + psi.dot(Q * psi) / 2.0;
      tau = rng.gamma(shape, rate);
    }
    if (it >= burn_in) {
      out.p_hat += X * beta + psi;
      ++count;
      if ((it - burn_in) % spec.thin == 0 && kept < retained) {
        out.beta_draws.row(kept) = beta.transpose();
        out.effect_draws.row(kept) = psi.transpose();
        out.tau_draws(kept) = tau;
        ++kept;
      }
    }
  }
  out.beta_draws.conservativeResize(kept, p);
  out.effect_draws.conservativeResize(kept, n);
  out.tau_draws.conservativeResize(kept);
  out.p_hat /= static_cast<double>(count);
  out.acceptance["beta"] = 1.0;
  out.acceptance["psi"] = 1.0;
  return out;
}

void adjusted_beta(PosteriorSamples& samples, const Eigen::MatrixXd& X, const ArealGraph& graph,
                   std::uint64_t seed) {
  const Eigen::Index p = X.cols();
  const Eigen::Index k = samples.beta_draws.rows();
  samples.beta_tilde_draws.resize(k, p);
  Rng rng(seed);
  // Sigma^(k) is the covariance the unrestricted intrinsic prior assigns to
  // the spatial effect at the sampled precision: Q^+ / tau_k with Q the
  // Laplacian and Q^+ its pseudoinverse (the restricted basis is orthogonal
  // to X, so the fitted-basis covariance would contribute nothing). The
  // induced covariance for beta_tilde is V0 / tau_k with
  // V0 = C Q^+ C', C = (X'X)^{-1} X'.
  const Eigen::MatrixXd Q = laplacian(graph);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  const double cutoff = 1e-8 * es.eigenvalues().maxCoeff();
  Eigen::VectorXd inv_vals = Eigen::VectorXd::Zero(Q.rows());
  for (Eigen::Index j = 0; j < Q.rows(); ++j)
    if (es.eigenvalues()(j) > cutoff) inv_vals(j) = 1.0 / es.eigenvalues()(j);
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  const Eigen::MatrixXd CU = xtx_inv * (X.transpose() * es.eigenvectors());
  Eigen::MatrixXd V0 = CU * inv_vals.asDiagonal() * CU.transpose();
  V0 = 0.5 * (V0 + V0.transpose());
  V0.diagonal().array() += 1e-14;
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(V0).matrixL();
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd zdraw(p);
    for (Eigen::Index j = 0; j < p; ++j) zdraw(j) = rng.normal();
    samples.beta_tilde_draws.row(i) =
        samples.beta_draws.row(i) +
        (L * zdraw).transpose() / std::sqrt(samples.tau_draws(i));
  }
}

double decomposition_check(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& psi) {
  const Eigen::MatrixXd P = projection(X);
  const Eigen::VectorXd delta = beta + (X.transpose() * X).inverse() * (X.transpose() * psi);
  const Eigen::VectorXd lhs = X * beta + psi;
  const Eigen::VectorXd rhs = X * delta + (psi - P * psi);
  return (lhs - rhs).lpNorm<Eigen::Infinity>();
}

FitResult posterior_summary(const PosteriorSamples& samples, double level) {
  const Eigen::Index k = samples.beta_draws.rows();
  if (k < 1) throw std::invalid_argument("posterior_summary: no retained draws");
  const bool adjusted = samples.beta_tilde_draws.rows() > 0;
  const Eigen::MatrixXd& draws = adjusted ? samples.beta_tilde_draws : samples.beta_draws;
  FitResult res;
  res.method = to_string(samples.spec.kind) + (adjusted ? "_adjusted" : "");
  res.converged = true;
  res.iterations = samples.iterations;
  res.warnings = samples.warnings;
  if (k < 500) res.warnings.push_back("fewer than 500 retained draws");
  const double alpha = 1.0 - level;
  const Eigen::Index p = draws.cols();
  res.estimates.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    res.names.push_back("beta" + std::to_string(j));
    std::vector<double> col(draws.col(j).data(), draws.col(j).data() + k);
    res.estimates(j) = median(col);
    res.intervals.push_back({quantile(col, alpha / 2.0), quantile(col, 1.0 - alpha / 2.0)});
  }
  {
    std::vector<double> taus(samples.tau_draws.data(), samples.tau_draws.data() + samples.tau_draws.size());
    if (!taus.empty()) res.extras["tau_median"] = median(taus);
  }
  if (samples.rho_draws.size() > 0) {
    std::vector<double> rhos(samples.rho_draws.data(), samples.rho_draws.data() + samples.rho_draws.size());
    res.extras["rho_median"] = median(rhos);
  }
  res.p_hat = samples.p_hat;
  return res;
}

void save_samples(const PosteriorSamples& samples, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_matrix_csv(samples.beta_draws, dir + "/beta.csv");
  write_matrix_csv(samples.effect_draws, dir + "/eta.csv");
  write_matrix_csv(samples.tau_draws, dir + "/tau.csv");
  if (samples.rho_draws.size() > 0) write_matrix_csv(samples.rho_draws, dir + "/rho.csv");
  if (samples.beta_tilde_draws.rows() > 0)
    write_matrix_csv(samples.beta_tilde_draws, dir + "/beta_tilde.csv");
  nlohmann::json meta;
  meta["spec"] = {{"kind", to_string(samples.spec.kind)},
                  {"q", samples.spec.q},
                  {"prior_beta_var", samples.spec.prior_beta_var},
                  {"tau_shape", samples.spec.tau_shape},
                  {"tau_scale", samples.spec.tau_scale},
                  {"sigma_eta", samples.spec.sigma_eta},
                  {"thin", samples.spec.thin}};
  meta["seed"] = samples.seed;
  meta["iterations"] = samples.iterations;
  meta["burn_in"] = samples.burn_in;
  meta["acceptance"] = samples.acceptance;
  std::ofstream out(dir + "/meta.json");
  if (!out) throw std::runtime_error("save_samples: cannot open " + dir + "/meta.json");
  out << meta.dump(2) << "\n";
}

}  // namespace spreg
