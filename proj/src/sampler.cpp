#include "coreflow/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "coreflow/velocity.hpp"

namespace coreflow {

void GenConfig::validate_and_default() {
  if (J < 1) throw std::invalid_argument("GenConfig: J must be >= 1");
  if (L < 0) throw std::invalid_argument("GenConfig: L must be >= 0");
  if (L == 0 && J != 1) {
    throw std::invalid_argument(
        "GenConfig: L = 0 (source-only mode) requires J = 1");
  }
  if (n < 0) throw std::invalid_argument("GenConfig: n must be >= 0");
  if (outer_grid.empty()) {
    outer_grid.resize(J + 1);
    for (int j = 0; j <= J; ++j) {
      outer_grid[j] = static_cast<double>(j) / static_cast<double>(J);
    }
    outer_grid.front() = 0.0;
    outer_grid.back() = 1.0;
  }
  if (static_cast<int>(outer_grid.size()) != J + 1) {
    throw std::invalid_argument("GenConfig: outer grid must have J+1 nodes");
  }
  if (outer_grid.front() != 0.0 || outer_grid.back() != 1.0) {
    throw std::invalid_argument("GenConfig: outer grid endpoints must be 0, 1");
  }
  for (int j = 0; j < J; ++j) {
    if (!(outer_grid[j] < outer_grid[j + 1])) {
      throw std::invalid_argument("GenConfig: outer grid must increase");
    }
  }
}

namespace {

PointCloud generate_core(const CoresetGmm& model, const CorrectionNet* net,
                         GenConfig cfg) {
  cfg.validate_and_default();
  if (cfg.L > 0 && net == nullptr) {
    throw std::invalid_argument("generate: correction net required for L > 0");
  }
  if (net != nullptr && !net->layer_sizes.empty() &&
      net->layer_sizes.front() != 2 * model.d + 2) {
    throw std::invalid_argument("generate: net input width != 2d+2");
  }
  const int d = model.d;
  const int n = cfg.n;

  // Per-sample counter-derived streams; each sample's draws are independent
  // of batching and schedule.
  std::vector<Rng> streams;
  streams.reserve(n);
  for (int i = 0; i < n; ++i) {
    streams.push_back(
        Rng::stream(cfg.seed, /*a=*/7, /*b=*/static_cast<std::uint64_t>(i),
                    /*c=*/0));
  }

  Eigen::MatrixXd Z(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) Z(i, j) = streams[i].normal();
  }

  Eigen::MatrixXd V(n, d);
  Eigen::MatrixXd input(n, 2 * d + 2);
  for (int j = 0; j < cfg.J; ++j) {
    const double tj = cfg.outer_grid[j];
    for (int i = 0; i < n; ++i) {
      V.row(i) =
          sample_surrogate(model, Z.row(i).transpose(), tj, streams[i])
              .transpose();
    }
    for (int l = 0; l < cfg.L; ++l) {
      double tau = static_cast<double>(l) / static_cast<double>(cfg.L);
      input.block(0, 0, n, d) = V;
      input.col(d).setConstant(tau);
      input.block(0, d + 1, n, d) = Z;
      input.col(2 * d + 1).setConstant(tj);
      V += net->forward(input, cfg.use_ema) / static_cast<double>(cfg.L);
    }
    Z += (cfg.outer_grid[j + 1] - cfg.outer_grid[j]) * V;
  }

  PointCloud cloud;
  cloud.points = std::move(Z);
  cloud.meta["record"] = "generated";
  cloud.meta["n"] = std::to_string(n);
  cloud.meta["d"] = std::to_string(d);
  cloud.meta["J"] = std::to_string(cfg.J);
  cloud.meta["L"] = std::to_string(cfg.L);
  cloud.meta["NFE"] = std::to_string(cfg.nfe());
  cloud.meta["seed"] = std::to_string(cfg.seed);
  cloud.meta["use_ema"] = cfg.use_ema ? "true" : "false";
  return cloud;
}

}  // namespace

PointCloud generate_one_step(const CoresetGmm& model, const CorrectionNet* net,
                             GenConfig cfg) {
  if (cfg.J != 1) {
    throw std::invalid_argument("generate_one_step: requires J = 1");
  }
  return generate_core(model, net, std::move(cfg));
}

PointCloud generate_nested(const CoresetGmm& model, const CorrectionNet* net,
                           GenConfig cfg) {
  return generate_core(model, net, std::move(cfg));
}

PointCloud generate_meanfield(const CorrectionNet& net, int d, int L, int n,
                              std::uint64_t seed, bool use_ema) {
  if (L < 1) throw std::invalid_argument("generate_meanfield: L must be >= 1");
  if (n < 0) throw std::invalid_argument("generate_meanfield: n must be >= 0");
  if (!net.layer_sizes.empty() && net.layer_sizes.front() != d + 1) {
    throw std::invalid_argument("generate_meanfield: net input width != d+1");
  }
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i) {
    Rng rs = Rng::stream(seed, /*a=*/7, /*b=*/static_cast<std::uint64_t>(i),
                         /*c=*/0);
    for (int j = 0; j < d; ++j) X(i, j) = rs.normal();
  }
  Eigen::MatrixXd input(n, d + 1);
  for (int l = 0; l < L; ++l) {
    input.block(0, 0, n, d) = X;
    input.col(d).setConstant(static_cast<double>(l) / static_cast<double>(L));
    X += net.forward(input, use_ema) / static_cast<double>(L);
  }
  PointCloud cloud;
  cloud.points = std::move(X);
  cloud.meta["record"] = "generated_meanfield";
  cloud.meta["n"] = std::to_string(n);
  cloud.meta["d"] = std::to_string(d);
  cloud.meta["L"] = std::to_string(L);
  cloud.meta["NFE"] = std::to_string(L);
  cloud.meta["seed"] = std::to_string(seed);
  cloud.meta["use_ema"] = use_ema ? "true" : "false";
  return cloud;
}

EulerRateResult euler_rate_check(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& field,
    const Eigen::VectorXd& v0, const Eigen::VectorXd& exact_endpoint,
    const std::vector<int>& step_sweep) {
  EulerRateResult out;
  for (int L : step_sweep) {
    if (L < 1) throw std::invalid_argument("euler_rate_check: steps must be >= 1");
    Eigen::VectorXd v = v0;
    double h = 1.0 / static_cast<double>(L);
    for (int l = 0; l < L; ++l) {
      v += h * field(v, static_cast<double>(l) * h);
    }
    out.steps.push_back(L);
    out.errors.push_back((v - exact_endpoint).norm());
  }
  // Least-squares slope of log(error) vs log(L) over nonzero errors.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < out.steps.size(); ++i) {
    if (out.errors[i] <= 1e-15) continue;
    double x = std::log(static_cast<double>(out.steps[i]));
    double y = std::log(out.errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m >= 2) {
    out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return out;
}

}  // namespace coreflow
