#pragma once
// Stage II: the closed-form conditional velocity mixture over a low-rank
// Gaussian mixture source.
//
// For a mixture with components N(mu_b, Sigma_b), Sigma_b = L_b L_b^T +
// sigma^2 I, the velocity law at (x, t) is a K-component Gaussian mixture
// with per-component precision A_b(t) = t^2 I + (1-t)^2 Sigma_b^{-1},
// covariance Lambda_b = A_b^{-1}, mean m_b = Lambda_b b_b where
// b_b = t x - (1-t) Sigma_b^{-1}(x - mu_b), and log-domain component
// probabilities log gamma_b = log w_b + log eta_b (normalized).
//
// All Sigma_b^{-1} applications, determinants, and Lambda_b factorizations
// run through the r-dimensional eigenbasis of L_b^T L_b, keeping the cost
// O(d r^2 + r^3) per component and sampling O(dr); Lambda_b is never
// materialized densely except by the explicit test helper.

#include <vector>

#include <Eigen/Core>

#include "coreflow/coreset.hpp"
#include "coreflow/rng.hpp"

namespace coreflow {

/// Conditional velocity law at one (x, t): mixture weights, means, and the
/// shared-eigenbasis representation of each component covariance
/// Lambda_b = bulk^{-1} I + sum_j (spike_j^{-1} - bulk^{-1}) u_j u_j^T.
struct CondVelocityLaw {
  Eigen::VectorXd x;
  double t = 0.0;
  Eigen::VectorXd log_gammas;       // K, logsumexp = 0
  Eigen::MatrixXd component_means;  // K x d   (m_b)
  std::vector<Eigen::MatrixXd> basis;  // K matrices d x r, orthonormal cols
  Eigen::MatrixXd spike_precisions;    // K x r  (eigenvalues of A_b on basis)
  Eigen::VectorXd bulk_precision;      // K      (A_b on the complement)
};

/// Evaluate the closed-form law; t must lie in [0,1] and the model must
/// have shared_noise > 0 (otherwise Sigma_b is singular).  At exact t=0 the
/// boundary identities gamma = w, m_b = mu_b - x, Lambda_b = Sigma_b are
/// produced by the dedicated branch.
CondVelocityLaw cond_velocity_params(const CoresetGmm& model,
                                     const Eigen::VectorXd& x, double t);

/// Draw one velocity from an evaluated law (categorical over gamma, then
/// the O(dr) Gaussian form).
Eigen::VectorXd sample_from_law(const CondVelocityLaw& law, Rng& rng);

/// Draw from a fixed component N(m_k, Lambda_k) of an evaluated law.
Eigen::VectorXd sample_law_component(const CondVelocityLaw& law, int k,
                                     Rng& rng);

/// log N(v; m_k, Lambda_k) for component k of an evaluated law.
double law_component_logpdf(const CondVelocityLaw& law, int k,
                            const Eigen::VectorXd& v);

/// Posterior over mixture components given an observation y ~ the mixture
/// (the Bayes responsibilities of the source model itself).
Eigen::VectorXd gmm_posterior(const CoresetGmm& model,
                              const Eigen::VectorXd& y);

/// Draw v ~ the velocity law at (x, t).  At t=0 uses the direct form
/// v = mu_B - x + L_B z + sigma eta with B ~ Cat(w).
Eigen::VectorXd sample_surrogate(const CoresetGmm& model,
                                 const Eigen::VectorXd& x, double t, Rng& rng);

/// log of the mixture density sum_b w_b N(y; mu_b, Sigma_b), log-domain.
double surrogate_log_density(const CoresetGmm& model,
                             const Eigen::VectorXd& y);

/// Direct i.i.d. sampling from the mixture itself (n x d matrix).
Eigen::MatrixXd sample_gmm(const CoresetGmm& model, int n, Rng& rng);

/// Dense Lambda_b for component k of an evaluated law; test/validation aid,
/// restricted to d <= 8.
Eigen::MatrixXd dense_lambda(const CondVelocityLaw& law, int k);

}  // namespace coreflow
