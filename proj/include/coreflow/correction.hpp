#pragma once
// Stage III: a small MLP correction field trained with flow matching from
// the surrogate velocity source, plus a mean-field rectified-flow baseline.
//
// The correction net maps (v_tau, tau, x_t, t) -> d and is trained on
// residual targets V1 - V0, where V1 = X_I - x_0 couples a data point to a
// standard-normal anchor and V0 is drawn from one of four source couplings:
//   direct_prior          B ~ Cat(w)
//   sinkhorn_anchored     B ~ Cat(T_1(X_I), ..., T_K(X_I))
//   is_tilted             B ~ importance-tilted Bayes posterior of V1
//   independent_gaussian  V0 ~ N(0, I), ignoring the mixture
// Training runs at fixed t (default 0, the theory-covered one-step case);
// general t is available but experimental.  All training is single-threaded
// and deterministic per seed; per-iteration RNG streams are derived
// counter-style so the loop order is the only schedule.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "coreflow/coreset.hpp"
#include "coreflow/rng.hpp"

namespace coreflow {

enum class Coupling {
  kDirectPrior,
  kSinkhornAnchored,
  kIsTilted,
  kIndependentGaussian,
};

Coupling coupling_from_string(const std::string& name);
std::string coupling_to_string(Coupling c);

/// Fully connected tanh MLP with an optional EMA shadow of the parameters.
struct CorrectionNet {
  std::vector<int> layer_sizes;  // e.g. {2d+2, 128, 128, 128, d}
  std::string activation = "tanh";
  std::vector<Eigen::MatrixXd> weights;  // W[l] is out x in
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::MatrixXd> ema_weights;
  std::vector<Eigen::VectorXd> ema_biases;
  double ema_decay = 0.9999;
  std::map<std::string, std::string> train_info;  // serialized under "train"

  /// Batched forward pass; rows of `input` are samples of width
  /// layer_sizes.front(), rows of the result have width layer_sizes.back().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input,
                          bool use_ema = false) const;

  /// Correction-field forward on one sample: input is (v, tau, x, t).
  Eigen::VectorXd forward_correction(const Eigen::VectorXd& v, double tau,
                                     const Eigen::VectorXd& x, double t,
                                     bool use_ema = false) const;

  /// Fan-in uniform initialization (U[-1/sqrt(fan_in), +1/sqrt(fan_in)] for
  /// weights and biases), final layer zeroed so the untrained net is the
  /// zero field; EMA shadow starts as a copy.
  static CorrectionNet init(const std::vector<int>& layer_sizes,
                            std::uint64_t seed, double ema_decay);

  std::string to_json() const;
  static CorrectionNet from_json(const std::string& text);
  void save(const std::string& path) const;
  static CorrectionNet load(const std::string& path);
};

struct TrainConfig {
  int iters = 20000;
  int batch = 128;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.9999;
  Coupling coupling = Coupling::kSinkhornAnchored;
  double train_t = 0.0;  // fixed training time (0 = theory-covered case)
  std::uint64_t seed = 0;
  int hidden_width = 128;
  int hidden_layers = 3;
};

/// One coupled batch: rows are samples.  x_t is the conditioning point
/// (x_0 ~ N(0, I) at t=0), v1 = X_I - x_0, v0 per the coupling.
struct TrainingBatch {
  Eigen::MatrixXd x_t;
  Eigen::MatrixXd v0;
  Eigen::MatrixXd v1;
};

/// Draw a coupled batch.  is_tilted couples samples through the batch
/// Monte-Carlo mean r-bar (floored at 1e-6), so it is defined per batch.
TrainingBatch draw_training_batch(const CoresetGmm& model,
                                  const Eigen::MatrixXd& data,
                                  Coupling coupling, double t, int batch,
                                  Rng& rng);

/// Single-pair convenience wrapper (batch of one).
TrainingBatch draw_training_pair(const CoresetGmm& model,
                                 const Eigen::MatrixXd& data,
                                 Coupling coupling, double t, Rng& rng);

struct TrainResult {
  CorrectionNet net;
  std::vector<double> loss_trace;  // one entry per iteration
};

/// Flow-matching training of the correction field:
/// loss = mean_i || f(V_tau, tau, x_t, t) - (V1 - V0) ||^2 with
/// tau ~ U[0,1] per sample and V_tau = (1-tau) V0 + tau V1.
/// Adam with the config constants; EMA updated every step.
/// Throws std::runtime_error naming the iteration if the loss goes
/// non-finite.
TrainResult train_correction(const CoresetGmm& model,
                             const Eigen::MatrixXd& data,
                             const TrainConfig& cfg);

/// Rectified-flow mean-field baseline: X_0 ~ N(0,I), t ~ U[0,1],
/// X_t = (1-t) X_0 + t X_1, net input (x_t, t), target X_1 - X_0.
TrainResult train_meanfield_baseline(const Eigen::MatrixXd& data,
                                     const TrainConfig& cfg);

}  // namespace coreflow
