#include "coreflow/coreset.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coreflow/rng.hpp"

namespace coreflow {

namespace {

// One row-normalized transport update: T_ik proportional to
// w_k exp(-||x_i - mu_k||^2 / lambda) with rows summing to 1/n.
// cost_sq holds ||x_i - mu_k||^2; log-domain for numerical safety.
void e_step(const Eigen::MatrixXd& cost_sq, const Eigen::VectorXd& w,
            double lambda, Eigen::MatrixXd& plan) {
  const auto n = cost_sq.rows();
  const auto K = cost_sq.cols();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logits(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = kNegInf;
    for (Eigen::Index k = 0; k < K; ++k) {
      logits[k] =
          (w[k] > 0.0) ? std::log(w[k]) - cost_sq(i, k) / lambda : kNegInf;
      row_max = std::max(row_max, logits[k]);
    }
    double z = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      double e = (logits[k] == kNegInf) ? 0.0 : std::exp(logits[k] - row_max);
      plan(i, k) = e;
      z += e;
    }
    plan.row(i) /= (z * static_cast<double>(n));
  }
}

void squared_costs(const Eigen::MatrixXd& data, const Eigen::MatrixXd& means,
                   Eigen::MatrixXd& cost_sq) {
  // ||x - mu||^2 = ||x||^2 - 2 x.mu + ||mu||^2, vectorized over all pairs
  Eigen::VectorXd x2 = data.rowwise().squaredNorm();
  Eigen::VectorXd m2 = means.rowwise().squaredNorm();
  cost_sq = (-2.0 * data * means.transpose());
  cost_sq.colwise() += x2;
  cost_sq.rowwise() += m2.transpose();
  cost_sq = cost_sq.cwiseMax(0.0);
}

}  // namespace

double ems_objective(const Eigen::MatrixXd& data, const Eigen::MatrixXd& plan,
                     const Eigen::VectorXd& weights,
                     const Eigen::MatrixXd& means, double lambda) {
  Eigen::MatrixXd cost_sq;
  squared_costs(data, means, cost_sq);
  const auto n = data.rows();
  double cost = (plan.array() * cost_sq.array()).sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < plan.cols(); ++k) {
      double t = plan(i, k);
      if (t <= 0.0) continue;  // 0 log 0 = 0
      kl += t * (std::log(t * static_cast<double>(n)) - std::log(weights[k]));
    }
  }
  return cost + lambda * kl;
}

EmsResult sinkhorn_ems_fit(const Eigen::MatrixXd& data, int K, double lambda,
                           int iters, std::uint64_t seed) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (K < 1) throw std::invalid_argument("sinkhorn_ems_fit: K must be >= 1");
  if (K > n) {
    throw std::invalid_argument("sinkhorn_ems_fit: K exceeds the data size");
  }
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("sinkhorn_ems_fit: lambda must be > 0");
  }
  if (iters < 1) {
    throw std::invalid_argument("sinkhorn_ems_fit: iters must be >= 1");
  }

  EmsResult out;
  Rng rng = Rng::stream(seed, /*a=*/3, /*b=*/0, /*c=*/0);
  std::vector<int> picks =
      rng.sample_without_replacement(static_cast<int>(n), K);
  out.means.resize(K, d);
  for (int k = 0; k < K; ++k) {
    out.means.row(k) = data.row(static_cast<Eigen::Index>(picks[k]));
  }
  out.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
  out.plan.resize(n, K);

  Eigen::MatrixXd cost_sq(n, K);
  constexpr double kWeightFloor = 1e-12;
  for (int it = 0; it < iters; ++it) {
    squared_costs(data, out.means, cost_sq);
    e_step(cost_sq, out.weights, lambda, out.plan);
    // M-step: barycentric means, column-sum weights (exact by construction)
    out.weights = out.plan.colwise().sum().transpose();
    for (int k = 0; k < K; ++k) {
      if (out.weights[k] > kWeightFloor) {
        out.means.row(k) = (out.plan.col(k).transpose() * data) /
                           out.weights[k];
      }
    }
    // Repair collapsed components: re-seed to the worst-served datum.
    bool repaired = false;
    for (int k = 0; k < K; ++k) {
      if (out.weights[k] > kWeightFloor) continue;
      Eigen::VectorXd row_cost =
          (out.plan.array() * cost_sq.array()).rowwise().sum() *
          static_cast<double>(n);
      Eigen::Index worst = 0;
      row_cost.maxCoeff(&worst);
      out.means.row(k) = data.row(worst);
      out.weights[k] = 1.0 / static_cast<double>(n);
      repaired = true;
      std::ostringstream ev;
      ev << "iter " << it << ": component " << k
         << " collapsed; re-seeded to datum " << worst;
      out.repair_events.push_back(ev.str());
    }
    if (repaired) out.weights /= out.weights.sum();
    out.objective_trace.push_back(
        ems_objective(data, out.plan, out.weights, out.means, lambda));
  }

  // Weight-only polish: iterate the transport/weight pair to its fixed
  // point so rows recomputed from the returned (w, mu) have column sums
  // equal to w.  Each step is coordinate descent on the same objective,
  // so monotonicity is preserved.
  squared_costs(data, out.means, cost_sq);
  for (int it = 0; it < 500; ++it) {
    e_step(cost_sq, out.weights, lambda, out.plan);
    Eigen::VectorXd w_new = out.plan.colwise().sum().transpose();
    double delta = (w_new - out.weights).cwiseAbs().maxCoeff();
    out.weights = w_new;
    if (delta < 1e-15) break;
  }
  return out;
}

CoresetGmm ppca_lift(const Eigen::MatrixXd& data, const EmsResult& fit, int r,
                     double lambda) {
  const auto n = data.rows();
  const auto d = data.cols();
  const auto K = fit.weights.size();
  if (r < 0 || r >= d) {
    throw std::invalid_argument(
        "ppca_lift: rank must satisfy 0 <= r < d (r = d-1 allowed)");
  }

  CoresetGmm gmm;
  gmm.d = static_cast<int>(d);
  gmm.K = static_cast<int>(K);
  gmm.r = r;
  gmm.lambda = lambda;
  gmm.weights = fit.weights;
  gmm.means = fit.means;
  gmm.factors.assign(K, Eigen::MatrixXd::Zero(d, r));
  gmm.per_component_noise.resize(K);

  for (Eigen::Index k = 0; k < K; ++k) {
    double wk = fit.weights[k];
    // Plan columns carry mass w_k; dividing by w_k makes the row weights a
    // unit-mass distribution over the data, giving the component's
    // conditional empirical covariance.
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    if (wk > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fit.plan(i, k) <= 0.0) continue;
        Eigen::VectorXd c = data.row(i).transpose() - fit.means.row(k).transpose();
        cov.noalias() += (fit.plan(i, k) / wk) * (c * c.transpose());
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
      throw std::runtime_error("ppca_lift: eigendecomposition failed");
    }
    // Eigen returns ascending order; top-r live at the tail.
    double top_sum = 0.0;
    for (int j = 0; j < r; ++j) top_sum += eig.eigenvalues()[d - 1 - j];
    double sigma2 = (cov.trace() - top_sum) / static_cast<double>(d - r);
    sigma2 = std::max(sigma2, 0.0);
    gmm.per_component_noise[k] = sigma2;
    for (int j = 0; j < r; ++j) {
      double gap = std::max(eig.eigenvalues()[d - 1 - j] - sigma2, 0.0);
      gmm.factors[k].col(j) = eig.eigenvectors().col(d - 1 - j) * std::sqrt(gap);
    }
  }
  gmm.shared_noise = gmm.weights.dot(gmm.per_component_noise);
  gmm.validate();
  return gmm;
}

CouplingRow responsibility_row(const CoresetGmm& model,
                               const Eigen::VectorXd& x) {
  if (x.size() != model.d) {
    throw std::invalid_argument("responsibility_row: dimension mismatch");
  }
  if (!x.allFinite()) {
    throw std::invalid_argument("responsibility_row: query must be finite");
  }
  const int K = model.K;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logits(K);
  double row_max = kNegInf;
  for (int k = 0; k < K; ++k) {
    double w = model.weights[k];
    logits[k] = (w > 0.0) ? std::log(w) - (x - model.means.row(k).transpose())
                                              .squaredNorm() /
                                              model.lambda
                          : kNegInf;
    row_max = std::max(row_max, logits[k]);
  }
  CouplingRow row;
  row.query = x;
  row.probs.resize(K);
  double z = 0.0;
  for (int k = 0; k < K; ++k) {
    row.probs[k] = (logits[k] == kNegInf) ? 0.0 : std::exp(logits[k] - row_max);
    z += row.probs[k];
  }
  row.probs /= z;
  return row;
}

void CoresetGmm::validate() const {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("CoresetGmm: " + what);
  };
  if (d <= 0 || K <= 0 || r < 0 || r >= d) fail("invalid shape parameters");
  if (weights.size() != K || means.rows() != K || means.cols() != d ||
      per_component_noise.size() != K ||
      factors.size() != static_cast<std::size_t>(K)) {
    fail("field shapes inconsistent with (d, K, r)");
  }
  for (const auto& L : factors) {
    if (L.rows() != d || L.cols() != r) fail("factor shape mismatch");
  }
  if (weights.minCoeff() < 0.0) fail("negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) fail("weights off the simplex");
  if (per_component_noise.minCoeff() < 0.0) fail("negative noise");
  if (std::abs(shared_noise - weights.dot(per_component_noise)) > 1e-12) {
    fail("shared noise is not the weighted mean of per-component noise");
  }
  if (!(lambda > 0.0)) fail("lambda must be positive");
}

std::string CoresetGmm::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["K"] = K;
  j["r"] = r;
  j["lambda"] = lambda;
  j["weights"] = std::vector<double>(weights.data(), weights.data() + K);
  auto matrix_rows = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      rows[i].assign(m.row(i).begin(), m.row(i).end());
    }
    return rows;
  };
  j["means"] = matrix_rows(means);
  std::vector<std::vector<std::vector<double>>> fac(K);
  for (int k = 0; k < K; ++k) fac[k] = matrix_rows(factors[k]);
  j["factors"] = fac;
  j["per_component_noise"] = std::vector<double>(
      per_component_noise.data(), per_component_noise.data() + K);
  j["shared_noise"] = shared_noise;
  j["fit"]["iters"] = fit_iters;
  j["fit"]["n"] = fit_n;
  j["fit"]["seed"] = fit_seed;
  j["fit"]["dataset_name"] = fit_dataset;
  return j.dump(2);
}

CoresetGmm CoresetGmm::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  CoresetGmm g;
  g.d = j.at("d").get<int>();
  g.K = j.at("K").get<int>();
  g.r = j.at("r").get<int>();
  g.lambda = j.at("lambda").get<double>();
  auto wv = j.at("weights").get<std::vector<double>>();
  g.weights = Eigen::Map<Eigen::VectorXd>(wv.data(), wv.size());
  auto read_matrix = [](const nlohmann::json& rows) {
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto row = rows[i].get<std::vector<double>>();
      m.row(i) = Eigen::Map<Eigen::VectorXd>(row.data(), row.size());
    }
    return m;
  };
  g.means = read_matrix(j.at("means"));
  g.factors.clear();
  for (const auto& fk : j.at("factors")) {
    Eigen::MatrixXd L = read_matrix(fk);
    if (L.size() == 0) L = Eigen::MatrixXd::Zero(g.d, g.r);
    g.factors.push_back(L);
  }
  auto pv = j.at("per_component_noise").get<std::vector<double>>();
  g.per_component_noise = Eigen::Map<Eigen::VectorXd>(pv.data(), pv.size());
  g.shared_noise = j.at("shared_noise").get<double>();
  g.fit_iters = j.at("fit").at("iters").get<int>();
  g.fit_n = j.at("fit").at("n").get<int>();
  g.fit_seed = j.at("fit").at("seed").get<std::uint64_t>();
  g.fit_dataset = j.at("fit").at("dataset_name").get<std::string>();
  g.validate();
  return g;
}

void CoresetGmm::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CoresetGmm: cannot write " + path);
  out << to_json() << '\n';
}

CoresetGmm CoresetGmm::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("CoresetGmm: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace coreflow
