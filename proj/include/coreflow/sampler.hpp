#pragma once
// Generation: one-step (J=1) sampling from the surrogate velocity source
// with L Euler correction steps, the nested J>1 sampler, and the Euler
// convergence-rate harness.
//
// J=1 path per sample: X0 ~ N(0, I); V ~ velocity law at (X0, 0); then
// V <- V + (1/L) f(V, l/L, X0, 0) for l = 0..L-1; output X0 + V.
// Reported NFE = L + 1 (the closed-form draw counts as one zero-parameter
// evaluation).  The nested sampler re-draws V at each outer grid node and
// advances Z by (t_{j+1} - t_j) V; NFE = J * L.  With the grid {0, 1} it
// reduces draw-for-draw to the one-step path.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "coreflow/coreset.hpp"
#include "coreflow/correction.hpp"
#include "coreflow/pointcloud.hpp"

namespace coreflow {

struct GenConfig {
  int J = 1;
  int L = 8;                       // L = 0 (no correction) requires J = 1
  std::vector<double> outer_grid;  // strictly increasing, 0 = t_0 < ... < t_J = 1;
                                   // defaults to uniform when empty
  int n = 5000;
  std::uint64_t seed = 0;
  bool use_ema = true;

  /// Throws std::invalid_argument when the invariants fail; fills a uniform
  /// outer grid when none was given.
  void validate_and_default();

  /// NFE accounting: L+1 for J=1, J*L otherwise.
  int nfe() const { return J == 1 ? L + 1 : J * L; }
};

/// J=1 generation.  `net` may be null when cfg.L == 0 (source-only mode).
PointCloud generate_one_step(const CoresetGmm& model, const CorrectionNet* net,
                             GenConfig cfg);

/// Nested J>1 generation per the outer-grid recursion (also accepts J=1,
/// where it reduces exactly to generate_one_step).
PointCloud generate_nested(const CoresetGmm& model, const CorrectionNet* net,
                           GenConfig cfg);

/// Mean-field baseline generation: integrate the plain flow field
/// x <- x + (1/L) net(x, l/L) from X0 ~ N(0, I).  The net input width must
/// be d + 1.  NFE = L (one network call per step; there is no source draw).
PointCloud generate_meanfield(const CorrectionNet& net, int d, int L, int n,
                              std::uint64_t seed, bool use_ema);

/// Euler convergence harness: integrate dv/dt = field(v, t) from v0 over
/// [0, 1] with L uniform steps for each L in the sweep, compare against the
/// exact endpoint, and fit the log-log error slope.
struct EulerRateResult {
  std::vector<int> steps;
  std::vector<double> errors;
  double slope = 0.0;  // 0 when every error is numerically zero
};

EulerRateResult euler_rate_check(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& field,
    const Eigen::VectorXd& v0, const Eigen::VectorXd& exact_endpoint,
    const std::vector<int>& step_sweep);

}  // namespace coreflow
