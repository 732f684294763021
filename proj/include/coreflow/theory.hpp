#pragma once
// Numerical verification harness for the pipeline's guarantees: the
// surrogate-gap identity and its closed-form comparison bound, exact
// marginal preservation of the anchored coupling, second-moment identities
// for the three analyzed couplings, the quantization rate of the coreset,
// and the error-decomposition sweep.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "coreflow/coreset.hpp"

namespace coreflow {

/// One verification check: named numeric values (both sides of every
/// inequality appear explicitly), free-form provenance, optional sweep
/// table, and an overall flag.
struct TheoryReport {
  std::string check;
  std::map<std::string, double> values;
  std::map<std::string, std::string> info;
  std::vector<std::map<std::string, double>> table;
  bool pass = true;

  std::string to_json() const;
  std::string table_csv() const;  // flat sweep rows for external plotting
};

/// W2(target law, surrogate law) estimated by the exact assignment oracle
/// on `pairs` independent size-`pool` subsample pairs, with the same-law
/// resampling noise floor measured the same way.
struct GapEstimate {
  double gap = 0.0;
  double noise_floor = 0.0;
  int pairs = 0;
  int pool = 0;
};

GapEstimate surrogate_gap(const CoresetGmm& model,
                          const Eigen::MatrixXd& target, int pairs, int pool,
                          std::uint64_t seed);

/// Closed-form lower bound sqrt(d) * (sqrt(sigma1_sq + 1) - 1) on the
/// standard-normal-source conditional transport cost, where sigma1_sq is
/// the per-dimension second moment E||X1||^2 / d of the target.
double hrf2_lower_bound(double sigma1_sq, int d);

/// Label-frequency check of the anchored coupling: draws a uniform datum,
/// samples its responsibility row, and compares frequencies to the model
/// weights.  Passes when TV <= 3 sqrt(K / n_draws).
TheoryReport verify_marginal_preservation(const CoresetGmm& model,
                                          const Eigen::MatrixXd& data,
                                          int n_draws, std::uint64_t seed);

/// Monte-Carlo E||V1 - V0||^2 under each analyzed coupling versus its
/// closed form, plus the strict coupling ordering
/// sinkhorn_anchored < direct_prior < independent_gaussian.
TheoryReport verify_second_moments(const CoresetGmm& model,
                                   const Eigen::MatrixXd& data, int n_draws,
                                   std::uint64_t seed);

/// Closed forms used by verify_second_moments (exposed for tests).
double closed_form_cost_sinkhorn(const CoresetGmm& model,
                                 const Eigen::MatrixXd& data);
double closed_form_cost_direct(const CoresetGmm& model,
                               const Eigen::MatrixXd& data);
double closed_form_cost_independent(const Eigen::MatrixXd& data);

/// Quantization-rate sweep: coreset fits of the uniform unit square at each
/// K (entropic radius shrinking as 1/K), measuring W2 between data
/// subsamples and atom draws with the exact oracle; reports the log-log
/// slope versus K (theory: -1/2 in d=2).
struct QuantizationResult {
  std::vector<int> Ks;
  std::vector<double> w2;
  double slope = 0.0;
};

QuantizationResult quantization_rate(int n, const std::vector<int>& K_grid,
                                     int pool, std::uint64_t seed);

/// Error-decomposition sweep over (n, K): sampling proxy (two-subsample
/// W2), coreset term (data vs atom measure), smoothing term
/// sigma_gmm = sqrt(sum_k w_k tr Sigma_k), and the measured source-only
/// generation error, with the measured/bound tightness ratio per cell.
TheoryReport decomposition_sweep(const std::string& dataset_name,
                                 const std::vector<int>& n_grid,
                                 const std::vector<int>& K_grid, int rank,
                                 std::uint64_t seed);

}  // namespace coreflow
