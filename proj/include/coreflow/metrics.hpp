#pragma once
// Distribution-comparison metrics used by the evaluation and verification
// commands: sliced quadratic Wasserstein distance, exact small-instance W2
// via an assignment solver, mode-balance total variation, 1-NN
// goodness-of-fit statistics (KS / W1 on nearest-neighbor distance
// distributions), and improved precision/recall.
//
// All functions are pure and deterministic; reductions run in a fixed index
// order so results are bit-reproducible.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace coreflow {

struct DatasetParams;  // dataset.hpp

/// Named scalar results plus provenance, serializable as JSON.
struct MetricsReport {
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> info;  // pool sizes, seeds, etc.
  std::string to_json() const;              // sorted keys, no timestamps
};

/// Exact squared quadratic Wasserstein distance between 1-D samples.
/// Equal sizes: sorted (monotone) coupling. Unequal sizes: piecewise-linear
/// interpolated quantile functions integrated exactly segment-by-segment.
double w2sq_1d(std::vector<double> a, std::vector<double> b);

/// Mean over `n_proj` seeded uniform unit directions of the exact 1-D W2^2
/// between the projected clouds.  Symmetric in (A, B) for a shared seed.
double sliced_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                 int n_proj, std::uint64_t seed);

/// Exact quadratic-cost optimal assignment between equal-size clouds
/// (|A| = |B| <= 1024); returns W2 = sqrt(mean matched squared distance).
double exact_w2_small(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Total variation between the empirical mode-occupancy histogram of the
/// samples and the uniform prior over the dataset's ground-truth modes.
double mode_tv(const Eigen::MatrixXd& samples, const DatasetParams& params);

/// Exhaustive 1-NN distances from each row of `from` to the rows of `to`.
std::vector<double> nn_distances(const Eigen::MatrixXd& from,
                                 const Eigen::MatrixXd& to);

/// Two-sample Kolmogorov-Smirnov statistic between 1-D samples.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Exact 1-D W1 (quantile integral; sorted coupling for equal sizes).
double w1_1d(std::vector<double> a, std::vector<double> b);

/// Goodness-of-fit harness: compares the 1-NN distance distribution of
/// A->B against that of Aref->Bref.  All four pools must be size-matched
/// (single pool size keeps the distance laws comparable).  Returns
/// (KS, W1) between the two distance samples.
std::pair<double, double> knn_gof(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Aref,
                                  const Eigen::MatrixXd& Bref);

/// Improved precision/recall with k-NN manifold radii (identity features).
/// precision = fraction of gen points within some real point's k-NN radius;
/// recall symmetric.  Pools must be size-matched; k < pool size.
std::pair<double, double> precision_recall(const Eigen::MatrixXd& gen,
                                           const Eigen::MatrixXd& real,
                                           int k = 5);

}  // namespace coreflow
