#pragma once
// Stage I: entropic-Sinkhorn EMS coreset fitting and the closed-form PPCA
// lift to a low-rank Gaussian mixture.
//
// The fit alternates a closed-form row-normalized transport update (rows sum
// to 1/n) with barycentric weight/mean updates; the KL-regularized objective
// is recorded once per outer iteration and is non-increasing.  After the main
// loop a weight-only polish drives the fixed-point identity
// sum_i T_ik = w_k for rows recomputed from the *final* (w, mu) to ~1e-13,
// which the marginal-preservation checks depend on.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace coreflow {

/// Low-rank Gaussian mixture produced by the PPCA lift.
/// Deployed component covariance: Sigma_b = L_b L_b^T + shared_noise * I.
struct CoresetGmm {
  int d = 0;        // ambient dimension
  int K = 0;        // component count
  int r = 0;        // factor rank, 0 <= r < d
  double lambda = 0.0;  // entropic bandwidth used at fit time

  Eigen::VectorXd weights;               // K, on the simplex
  Eigen::MatrixXd means;                 // K x d
  std::vector<Eigen::MatrixXd> factors;  // K matrices, each d x r
  Eigen::VectorXd per_component_noise;   // K, sigma_k^2 >= 0
  double shared_noise = 0.0;             // sum_k w_k sigma_k^2

  // fit provenance (serialized under "fit")
  int fit_iters = 0;
  int fit_n = 0;  // fit pool size (0 when unknown)
  std::uint64_t fit_seed = 0;
  std::string fit_dataset;

  /// Throws std::runtime_error when an invariant fails: weights on the
  /// simplex within 1e-12, noise nonnegative, shared_noise equal to the
  /// weighted mean of per-component noise within 1e-12, shapes consistent.
  void validate() const;

  std::string to_json() const;
  static CoresetGmm from_json(const std::string& text);
  void save(const std::string& path) const;
  static CoresetGmm load(const std::string& path);
};

/// Conditional coupling row T_b(x) over components for one query point.
struct CouplingRow {
  Eigen::VectorXd probs;  // K, on the simplex
  Eigen::VectorXd query;  // the x it was computed for
};

/// Result of the Stage-I fit.
struct EmsResult {
  Eigen::VectorXd weights;  // K
  Eigen::MatrixXd means;    // K x d
  Eigen::MatrixXd plan;     // n x K; rows sum 1/n, columns sum to weights
  std::vector<double> objective_trace;      // one entry per outer iteration
  std::vector<std::string> repair_events;   // component re-seed log
};

/// Entropic-Sinkhorn EMS fit of K weighted anchors to the data rows.
/// Anchors are initialized by uniform sampling without replacement (seeded);
/// components whose weight collapses below 1e-12 are re-seeded to the datum
/// with the largest current transport cost (logged in repair_events).
EmsResult sinkhorn_ems_fit(const Eigen::MatrixXd& data, int K, double lambda,
                           int iters, std::uint64_t seed);

/// Objective value: sum_ik T_ik ||x_i - mu_k||^2 + lambda KL(T || (1/n) x w)
/// with w taken as the plan's column sums.
double ems_objective(const Eigen::MatrixXd& data, const Eigen::MatrixXd& plan,
                     const Eigen::VectorXd& weights,
                     const Eigen::MatrixXd& means, double lambda);

/// Closed-form PPCA lift of each component's plan-weighted empirical
/// covariance: exact eigendecomposition, trailing-eigenvalue noise via the
/// trace identity, top-r factors with eigen-gap clamping max(l_j - s^2, 0),
/// and weight-aggregated shared noise.
CoresetGmm ppca_lift(const Eigen::MatrixXd& data, const EmsResult& fit, int r,
                     double lambda);

/// T_b(x) = w_b exp(-||x - mu_b||^2 / lambda) / Z(x), evaluated in the log
/// domain (row max subtracted).  Zero-weight components get probability 0.
CouplingRow responsibility_row(const CoresetGmm& model,
                               const Eigen::VectorXd& x);

}  // namespace coreflow
