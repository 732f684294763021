#pragma once
// Toy target distributions and their analytic mode/curve structure.
//
// Four built-in targets: ring6 (six Gaussian blobs on a circle), moons (two
// interleaved half-circles), pinwheel (five twisted arms), helix3d (noisy
// circular helix).  Shapes are defined at unit scale and multiplied by a
// per-dataset spatial scale; every shape constant can be overridden through
// the run configuration so the benchmark bands can be re-tuned.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "coreflow/pointcloud.hpp"
#include "coreflow/rng.hpp"

namespace coreflow {

struct DatasetParams {
  std::string name;
  double scale = 1.0;
  // shape constants (pre-scale); defaults match dataset_params() below
  double ring6_std = 0.1;
  double moons_noise = 0.05;
  double pinwheel_radial_std = 0.3;
  double pinwheel_tangential_std = 0.05;
  double pinwheel_rate = 0.25;
  double helix_noise = 0.05;
};

/// Valid dataset names, in CLI listing order.
const std::vector<std::string>& dataset_names();

/// Default parameters for a named dataset (resolves the "auto" scale).
/// Throws std::invalid_argument listing valid names on an unknown name.
DatasetParams dataset_params(const std::string& name);

/// Calibrated per-dataset defaults for the coreset fit ("auto" K / lambda).
int dataset_default_K(const std::string& name);
double dataset_default_lambda(const std::string& name);

/// Draw n i.i.d. samples; deterministic per (params, seed).
PointCloud sample_target(const DatasetParams& params, int n,
                         std::uint64_t seed);

/// Ground-truth mode centers (ring6: 6 blob centers; pinwheel: 5 arm
/// centers).  Throws for datasets without discrete modes.
Eigen::MatrixXd mode_centers(const DatasetParams& params);

/// Index of the nearest mode center (squared Euclidean, ties to the lowest
/// index).  Throws for moons/helix3d.
int assign_mode(const Eigen::VectorXd& x, const DatasetParams& params);

/// Distance from x to the analytic helix curve scale*(cos t, sin t, t/2pi),
/// t in [0, 4pi]: dense-grid minimization refined by golden-section search
/// (absolute tolerance well below 1e-4).
double helix_curve_distance(const Eigen::Vector3d& x, double scale);

/// Mean helix_curve_distance over a pool of 3-D points.
double mean_helix_distance(const Eigen::MatrixXd& points, double scale);

}  // namespace coreflow
