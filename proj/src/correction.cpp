#include "coreflow/correction.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "coreflow/pointcloud.hpp"
#include "coreflow/velocity.hpp"

namespace coreflow {

Coupling coupling_from_string(const std::string& name) {
  if (name == "direct_prior") return Coupling::kDirectPrior;
  if (name == "sinkhorn_anchored") return Coupling::kSinkhornAnchored;
  if (name == "is_tilted") return Coupling::kIsTilted;
  if (name == "independent_gaussian") return Coupling::kIndependentGaussian;
  throw std::invalid_argument(
      "unknown coupling '" + name +
      "' (valid: direct_prior sinkhorn_anchored is_tilted "
      "independent_gaussian)");
}

std::string coupling_to_string(Coupling c) {
  switch (c) {
    case Coupling::kDirectPrior: return "direct_prior";
    case Coupling::kSinkhornAnchored: return "sinkhorn_anchored";
    case Coupling::kIsTilted: return "is_tilted";
    case Coupling::kIndependentGaussian: return "independent_gaussian";
  }
  throw std::logic_error("coupling_to_string: bad enum");
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

Eigen::MatrixXd CorrectionNet::forward(const Eigen::MatrixXd& input,
                                       bool use_ema) const {
  const auto& W = use_ema ? ema_weights : weights;
  const auto& B = use_ema ? ema_biases : biases;
  if (input.cols() != layer_sizes.front()) {
    throw std::invalid_argument("CorrectionNet: input width mismatch");
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < W.size(); ++l) {
    Eigen::MatrixXd z = a * W[l].transpose();
    z.rowwise() += B[l].transpose();
    if (l + 1 < W.size()) {
      a = z.array().tanh();
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::VectorXd CorrectionNet::forward_correction(const Eigen::VectorXd& v,
                                                  double tau,
                                                  const Eigen::VectorXd& x,
                                                  double t,
                                                  bool use_ema) const {
  Eigen::MatrixXd input(1, v.size() + x.size() + 2);
  input.row(0).segment(0, v.size()) = v.transpose();
  input(0, v.size()) = tau;
  input.row(0).segment(v.size() + 1, x.size()) = x.transpose();
  input(0, v.size() + 1 + x.size()) = t;
  return forward(input, use_ema).row(0).transpose();
}

CorrectionNet CorrectionNet::init(const std::vector<int>& layer_sizes,
                                  std::uint64_t seed, double ema_decay) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("CorrectionNet: need at least two layers");
  }
  CorrectionNet net;
  net.layer_sizes = layer_sizes;
  net.ema_decay = ema_decay;
  Rng rng = Rng::stream(seed, /*a=*/5, /*b=*/0, /*c=*/0);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    int fan_in = layer_sizes[l];
    int fan_out = layer_sizes[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd W(fan_out, fan_in);
    Eigen::VectorXd b(fan_out);
    bool last = (l + 2 == layer_sizes.size());
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        W(i, j) = last ? 0.0 : bound * (2.0 * rng.uniform() - 1.0);
      }
      b[i] = last ? 0.0 : bound * (2.0 * rng.uniform() - 1.0);
    }
    net.weights.push_back(W);
    net.biases.push_back(b);
  }
  net.ema_weights = net.weights;
  net.ema_biases = net.biases;
  return net;
}

std::string CorrectionNet::to_json() const {
  nlohmann::ordered_json j;
  j["layer_sizes"] = layer_sizes;
  j["activation"] = activation;
  auto matrix_rows = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      rows[i].assign(m.row(i).begin(), m.row(i).end());
    }
    return rows;
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    j["weights"].push_back(matrix_rows(weights[l]));
    j["biases"].push_back(
        std::vector<double>(biases[l].data(), biases[l].data() + biases[l].size()));
    j["ema_weights"].push_back(matrix_rows(ema_weights[l]));
    j["ema_biases"].push_back(std::vector<double>(
        ema_biases[l].data(), ema_biases[l].data() + ema_biases[l].size()));
  }
  j["ema_decay"] = ema_decay;
  for (const auto& [k, v] : train_info) j["train"][k] = v;
  return j.dump(2);
}

CorrectionNet CorrectionNet::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  CorrectionNet net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  net.activation = j.at("activation").get<std::string>();
  net.ema_decay = j.at("ema_decay").get<double>();
  auto read_matrix = [](const nlohmann::json& rows) {
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto row = rows[i].get<std::vector<double>>();
      m.row(i) = Eigen::Map<Eigen::VectorXd>(row.data(), row.size());
    }
    return m;
  };
  auto read_vector = [](const nlohmann::json& arr) {
    auto v = arr.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(v.data(), v.size()));
  };
  for (const auto& w : j.at("weights")) net.weights.push_back(read_matrix(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(read_vector(b));
  for (const auto& w : j.at("ema_weights")) {
    net.ema_weights.push_back(read_matrix(w));
  }
  for (const auto& b : j.at("ema_biases")) {
    net.ema_biases.push_back(read_vector(b));
  }
  if (j.contains("train")) {
    for (const auto& [k, v] : j.at("train").items()) {
      net.train_info[k] = v.get<std::string>();
    }
  }
  return net;
}

void CorrectionNet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CorrectionNet: cannot write " + path);
  out << to_json() << '\n';
}

CorrectionNet CorrectionNet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("CorrectionNet: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// coupled batch assembly
// ---------------------------------------------------------------------------

namespace {

// Draw V0 from mixture component b at the t=0 boundary:
// V0 = mu_b - x0 + L_b z + sigma eta.
Eigen::VectorXd draw_component_v0(const CoresetGmm& model, int b,
                                  const Eigen::VectorXd& x0, Rng& rng) {
  Eigen::VectorXd v = model.means.row(b).transpose() - x0;
  for (int j = 0; j < model.r; ++j) {
    v += model.factors[b].col(j) * rng.normal();
  }
  double s = std::sqrt(model.shared_noise);
  for (int i = 0; i < model.d; ++i) v[i] += s * rng.normal();
  return v;
}

}  // namespace

TrainingBatch draw_training_batch(const CoresetGmm& model,
                                  const Eigen::MatrixXd& data,
                                  Coupling coupling, double t, int batch,
                                  Rng& rng) {
  if (batch < 1) {
    throw std::invalid_argument("draw_training_batch: batch must be >= 1");
  }
  if (data.cols() != model.d) {
    throw std::invalid_argument("draw_training_batch: dimension mismatch");
  }
  const auto n = data.rows();
  const int d = model.d;
  TrainingBatch out;
  out.x_t.resize(batch, d);
  out.v0.resize(batch, d);
  out.v1.resize(batch, d);

  // Anchor points and data indices first, in sample order.
  std::vector<Eigen::Index> idx(batch);
  Eigen::MatrixXd x0(batch, d);
  for (int i = 0; i < batch; ++i) {
    for (int j = 0; j < d; ++j) x0(i, j) = rng.normal();
    idx[i] = static_cast<Eigen::Index>(rng.below(n));
  }
  for (int i = 0; i < batch; ++i) {
    out.v1.row(i) = data.row(idx[i]) - x0.row(i);
    out.x_t.row(i) = (1.0 - t) * x0.row(i) + t * data.row(idx[i]);
  }

  const bool boundary = (t == 0.0);
  std::vector<double> w(model.weights.data(), model.weights.data() + model.K);

  switch (coupling) {
    case Coupling::kIndependentGaussian: {
      for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < d; ++j) out.v0(i, j) = rng.normal();
      }
      break;
    }
    case Coupling::kDirectPrior:
    case Coupling::kSinkhornAnchored: {
      for (int i = 0; i < batch; ++i) {
        int b;
        if (coupling == Coupling::kDirectPrior) {
          b = static_cast<int>(rng.categorical(w));
        } else {
          CouplingRow row =
              responsibility_row(model, data.row(idx[i]).transpose());
          std::vector<double> p(row.probs.data(), row.probs.data() + model.K);
          b = static_cast<int>(rng.categorical(p));
        }
        if (boundary) {
          out.v0.row(i) =
              draw_component_v0(model, b, x0.row(i).transpose(), rng)
                  .transpose();
        } else {
          CondVelocityLaw law =
              cond_velocity_params(model, out.x_t.row(i).transpose(), t);
          out.v0.row(i) = sample_law_component(law, b, rng).transpose();
        }
      }
      break;
    }
    case Coupling::kIsTilted: {
      // Tilted posterior q_b proportional to gamma_b * r_b / r_bar_b where
      // r_b is the Bayes responsibility of component b for V1 under the
      // velocity law and r_bar is its batch mean (floored).  Samples are
      // therefore coupled through the batch.
      Eigen::MatrixXd resp(batch, model.K);
      Eigen::MatrixXd gammas(batch, model.K);
      std::vector<CondVelocityLaw> laws;
      for (int i = 0; i < batch; ++i) {
        if (boundary) {
          // At t=0 the law over v shifts the mixture by -x0, so the
          // responsibility of V1 = X_I - x0 is the source-model posterior
          // of the datum itself, and gamma = w.
          resp.row(i) =
              gmm_posterior(model, data.row(idx[i]).transpose()).transpose();
          gammas.row(i) = model.weights.transpose();
        } else {
          CondVelocityLaw law =
              cond_velocity_params(model, out.x_t.row(i).transpose(), t);
          Eigen::VectorXd lp(model.K);
          for (int k = 0; k < model.K; ++k) {
            lp[k] = law.log_gammas[k] +
                    law_component_logpdf(law, k, out.v1.row(i).transpose());
          }
          double mx = lp.maxCoeff();
          Eigen::VectorXd pr = (lp.array() - mx).exp();
          resp.row(i) = (pr / pr.sum()).transpose();
          gammas.row(i) = law.log_gammas.array().exp().transpose();
          laws.push_back(std::move(law));
        }
      }
      Eigen::VectorXd rbar = resp.colwise().mean().cwiseMax(1e-6);
      for (int i = 0; i < batch; ++i) {
        Eigen::VectorXd q =
            (gammas.row(i).transpose().array() * resp.row(i).transpose().array() /
             rbar.array())
                .matrix();
        q /= q.sum();
        std::vector<double> p(q.data(), q.data() + model.K);
        int b = static_cast<int>(rng.categorical(p));
        if (boundary) {
          out.v0.row(i) =
              draw_component_v0(model, b, x0.row(i).transpose(), rng)
                  .transpose();
        } else {
          out.v0.row(i) = sample_law_component(laws[i], b, rng).transpose();
        }
      }
      break;
    }
  }
  return out;
}

TrainingBatch draw_training_pair(const CoresetGmm& model,
                                 const Eigen::MatrixXd& data,
                                 Coupling coupling, double t, Rng& rng) {
  return draw_training_batch(model, data, coupling, t, /*batch=*/1, rng);
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

// Adam state and manual tanh-MLP backprop shared by both trainers.
class MlpTrainer {
 public:
  MlpTrainer(CorrectionNet& net, const TrainConfig& cfg)
      : net_(net), cfg_(cfg) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      mw_.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                          net.weights[l].cols()));
      vw_.push_back(mw_.back());
      mb_.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
      vb_.push_back(mb_.back());
    }
  }

  // One optimization step on loss = mean_i sum_d (f(input_i) - target_i)^2.
  // Returns the loss value before the step.
  double step(const Eigen::MatrixXd& input, const Eigen::MatrixXd& target) {
    const auto L = net_.weights.size();
    const auto n = input.rows();

    // Forward, keeping activations for backprop.
    std::vector<Eigen::MatrixXd> act(L + 1);
    act[0] = input;
    for (std::size_t l = 0; l < L; ++l) {
      Eigen::MatrixXd z = act[l] * net_.weights[l].transpose();
      z.rowwise() += net_.biases[l].transpose();
      if (l + 1 < L) {
        act[l + 1] = z.array().tanh();
      } else {
        act[l + 1] = std::move(z);
      }
    }
    Eigen::MatrixXd resid = act[L] - target;
    double loss = resid.array().square().rowwise().sum().mean();

    // Backward.
    Eigen::MatrixXd grad_z = (2.0 / static_cast<double>(n)) * resid;
    ++step_count_;
    for (std::size_t li = L; li-- > 0;) {
      Eigen::MatrixXd grad_w = grad_z.transpose() * act[li];
      Eigen::VectorXd grad_b = grad_z.colwise().sum().transpose();
      if (li > 0) {
        grad_z = (grad_z * net_.weights[li]).array() *
                 (1.0 - act[li].array().square());
      }
      adam_update(net_.weights[li], mw_[li], vw_[li], grad_w);
      adam_update(net_.biases[li], mb_[li], vb_[li], grad_b);
    }
    // EMA shadow tracks the raw parameters as a convex combination.
    for (std::size_t l = 0; l < L; ++l) {
      net_.ema_weights[l] = cfg_.ema_decay * net_.ema_weights[l] +
                            (1.0 - cfg_.ema_decay) * net_.weights[l];
      net_.ema_biases[l] = cfg_.ema_decay * net_.ema_biases[l] +
                           (1.0 - cfg_.ema_decay) * net_.biases[l];
    }
    return loss;
  }

 private:
  template <typename T>
  void adam_update(T& param, T& m, T& v, const T& grad) {
    m = cfg_.adam_beta1 * m + (1.0 - cfg_.adam_beta1) * grad;
    v = cfg_.adam_beta2 * v + (1.0 - cfg_.adam_beta2) * grad.cwiseProduct(grad);
    double bc1 = 1.0 - std::pow(cfg_.adam_beta1, step_count_);
    double bc2 = 1.0 - std::pow(cfg_.adam_beta2, step_count_);
    param.array() -= cfg_.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg_.adam_eps);
  }

  CorrectionNet& net_;
  const TrainConfig& cfg_;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
  int step_count_ = 0;
};

std::vector<int> correction_layers(int d, const TrainConfig& cfg) {
  std::vector<int> sizes{2 * d + 2};
  for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_width);
  sizes.push_back(d);
  return sizes;
}

void check_finite(double loss, int iter, const char* who) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error(std::string(who) + ": non-finite loss at iteration " +
                             std::to_string(iter));
  }
}

}  // namespace

TrainResult train_correction(const CoresetGmm& model,
                             const Eigen::MatrixXd& data,
                             const TrainConfig& cfg) {
  if (data.cols() != model.d) {
    throw std::invalid_argument("train_correction: dimension mismatch");
  }
  if (cfg.batch < 1 || cfg.learning_rate <= 0.0) {
    throw std::invalid_argument("train_correction: invalid config");
  }
  const int d = model.d;
  TrainResult result;
  result.net = CorrectionNet::init(correction_layers(d, cfg), cfg.seed,
                                   cfg.ema_decay);
  MlpTrainer trainer(result.net, cfg);

  Eigen::MatrixXd input(cfg.batch, 2 * d + 2);
  for (int it = 1; it <= cfg.iters; ++it) {
    Rng rng = Rng::stream(cfg.seed, /*a=*/4, /*b=*/it, /*c=*/0);
    TrainingBatch b = draw_training_batch(model, data, cfg.coupling,
                                          cfg.train_t, cfg.batch, rng);
    for (int i = 0; i < cfg.batch; ++i) {
      double tau = rng.uniform();
      input.row(i).segment(0, d) =
          (1.0 - tau) * b.v0.row(i) + tau * b.v1.row(i);
      input(i, d) = tau;
      input.row(i).segment(d + 1, d) = b.x_t.row(i);
      input(i, 2 * d + 1) = cfg.train_t;
    }
    double loss = trainer.step(input, b.v1 - b.v0);
    check_finite(loss, it, "train_correction");
    result.loss_trace.push_back(loss);
  }
  result.net.train_info["kind"] = "correction";
  result.net.train_info["coupling"] = coupling_to_string(cfg.coupling);
  result.net.train_info["iters"] = std::to_string(cfg.iters);
  result.net.train_info["batch"] = std::to_string(cfg.batch);
  result.net.train_info["learning_rate"] = format_double(cfg.learning_rate);
  result.net.train_info["train_t"] = format_double(cfg.train_t);
  result.net.train_info["seed"] = std::to_string(cfg.seed);
  return result;
}

TrainResult train_meanfield_baseline(const Eigen::MatrixXd& data,
                                     const TrainConfig& cfg) {
  if (cfg.batch < 1 || cfg.learning_rate <= 0.0) {
    throw std::invalid_argument("train_meanfield_baseline: invalid config");
  }
  const int d = static_cast<int>(data.cols());
  const auto n = data.rows();
  std::vector<int> sizes{d + 1};
  for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_width);
  sizes.push_back(d);

  TrainResult result;
  result.net = CorrectionNet::init(sizes, cfg.seed ^ 0x6d66ULL, cfg.ema_decay);
  MlpTrainer trainer(result.net, cfg);

  Eigen::MatrixXd input(cfg.batch, d + 1);
  Eigen::MatrixXd target(cfg.batch, d);
  for (int it = 1; it <= cfg.iters; ++it) {
    Rng rng = Rng::stream(cfg.seed, /*a=*/6, /*b=*/it, /*c=*/0);
    for (int i = 0; i < cfg.batch; ++i) {
      Eigen::VectorXd x0(d);
      for (int j = 0; j < d; ++j) x0[j] = rng.normal();
      Eigen::Index I = static_cast<Eigen::Index>(rng.below(n));
      double t = rng.uniform();
      Eigen::VectorXd x1 = data.row(I).transpose();
      input.row(i).segment(0, d) = ((1.0 - t) * x0 + t * x1).transpose();
      input(i, d) = t;
      target.row(i) = (x1 - x0).transpose();
    }
    double loss = trainer.step(input, target);
    check_finite(loss, it, "train_meanfield_baseline");
    result.loss_trace.push_back(loss);
  }
  result.net.train_info["kind"] = "meanfield";
  result.net.train_info["iters"] = std::to_string(cfg.iters);
  result.net.train_info["batch"] = std::to_string(cfg.batch);
  result.net.train_info["learning_rate"] = format_double(cfg.learning_rate);
  result.net.train_info["seed"] = std::to_string(cfg.seed);
  return result;
}

}  // namespace coreflow
