#include "coreflow/theory.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "coreflow/correction.hpp"
#include "coreflow/dataset.hpp"
#include "coreflow/metrics.hpp"
#include "coreflow/velocity.hpp"

namespace coreflow {

std::string TheoryReport::to_json() const {
  nlohmann::ordered_json j;
  j["check"] = check;
  j["pass"] = pass;
  for (const auto& [k, v] : values) j["values"][k] = v;
  for (const auto& [k, v] : info) j["info"][k] = v;
  if (!table.empty()) {
    for (const auto& row : table) {
      nlohmann::ordered_json r;
      for (const auto& [k, v] : row) r[k] = v;
      j["table"].push_back(r);
    }
  }
  return j.dump(2);
}

std::string TheoryReport::table_csv() const {
  std::set<std::string> cols;
  for (const auto& row : table) {
    for (const auto& [k, v] : row) cols.insert(k);
  }
  std::ostringstream out;
  bool first = true;
  for (const auto& c : cols) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << '\n';
  for (const auto& row : table) {
    first = true;
    for (const auto& c : cols) {
      out << (first ? "" : ",");
      auto it = row.find(c);
      if (it != row.end()) out << format_double(it->second);
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

namespace {

// Two disjoint subsamples of `pool` rows each, drawn without replacement.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> disjoint_subsamples(
    const Eigen::MatrixXd& data, int pool, Rng& rng) {
  auto picks = rng.sample_without_replacement(
      static_cast<std::uint64_t>(data.rows()),
      static_cast<std::uint64_t>(2 * pool));
  Eigen::MatrixXd a(pool, data.cols()), b(pool, data.cols());
  for (int i = 0; i < pool; ++i) {
    a.row(i) = data.row(static_cast<Eigen::Index>(picks[i]));
    b.row(i) = data.row(static_cast<Eigen::Index>(picks[pool + i]));
  }
  return {std::move(a), std::move(b)};
}

double tr_sigma(const CoresetGmm& model, int k) {
  return model.factors[k].squaredNorm() + model.d * model.shared_noise;
}

}  // namespace

GapEstimate surrogate_gap(const CoresetGmm& model,
                          const Eigen::MatrixXd& target, int pairs, int pool,
                          std::uint64_t seed) {
  if (pool < 1 || pool > 1024) {
    throw std::invalid_argument(
        "surrogate_gap: pool must be in [1, 1024] for the exact oracle");
  }
  if (target.rows() < 2 * pool) {
    throw std::invalid_argument("surrogate_gap: target pool too small");
  }
  if (pairs < 1) throw std::invalid_argument("surrogate_gap: pairs >= 1");
  GapEstimate est;
  est.pairs = pairs;
  est.pool = pool;
  for (int p = 0; p < pairs; ++p) {
    Rng rng = Rng::stream(seed, /*a=*/9, /*b=*/static_cast<std::uint64_t>(p),
                          /*c=*/0);
    auto [ta, tb] = disjoint_subsamples(target, pool, rng);
    Eigen::MatrixXd ga = sample_gmm(model, pool, rng);
    est.gap += exact_w2_small(ta, ga);
    est.noise_floor += exact_w2_small(ta, tb);
  }
  est.gap /= pairs;
  est.noise_floor /= pairs;
  return est;
}

double hrf2_lower_bound(double sigma1_sq, int d) {
  if (sigma1_sq < 0.0) {
    throw std::invalid_argument("hrf2_lower_bound: sigma1_sq must be >= 0");
  }
  return std::sqrt(static_cast<double>(d)) * (std::sqrt(sigma1_sq + 1.0) - 1.0);
}

TheoryReport verify_marginal_preservation(const CoresetGmm& model,
                                          const Eigen::MatrixXd& data,
                                          int n_draws, std::uint64_t seed) {
  if (n_draws < 1) {
    throw std::invalid_argument("verify_marginal_preservation: n_draws >= 1");
  }
  const auto n = data.rows();
  const int K = model.K;
  // Precompute every datum's responsibility row once.
  Eigen::MatrixXd rows(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    rows.row(i) =
        responsibility_row(model, data.row(i).transpose()).probs.transpose();
  }
  Rng rng = Rng::stream(seed, /*a=*/13, /*b=*/0, /*c=*/0);
  std::vector<double> counts(K, 0.0);
  std::vector<double> p(K);
  for (int t = 0; t < n_draws; ++t) {
    auto i = static_cast<Eigen::Index>(rng.below(n));
    for (int k = 0; k < K; ++k) p[k] = rows(i, k);
    counts[rng.categorical(p)] += 1.0;
  }
  double tv = 0.0, chi2 = 0.0;
  for (int k = 0; k < K; ++k) {
    double freq = counts[k] / n_draws;
    tv += std::abs(freq - model.weights[k]);
    double expected = n_draws * model.weights[k];
    if (expected > 0.0) {
      chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
  }
  tv *= 0.5;
  double threshold = 3.0 * std::sqrt(static_cast<double>(K) / n_draws);

  TheoryReport rep;
  rep.check = "marginal_preservation";
  rep.values["tv"] = tv;
  rep.values["tv_threshold"] = threshold;
  rep.values["chi2"] = chi2;
  rep.values["chi2_dof"] = K - 1;
  rep.info["K"] = std::to_string(K);
  rep.info["n_draws"] = std::to_string(n_draws);
  rep.pass = tv <= threshold;
  return rep;
}

double closed_form_cost_sinkhorn(const CoresetGmm& model,
                                 const Eigen::MatrixXd& data) {
  const auto n = data.rows();
  double transport = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    CouplingRow row = responsibility_row(model, data.row(i).transpose());
    for (int k = 0; k < model.K; ++k) {
      transport +=
          row.probs[k] *
          (data.row(i) - model.means.row(k)).squaredNorm();
    }
  }
  transport /= static_cast<double>(n);
  double within = 0.0;
  for (int k = 0; k < model.K; ++k) {
    within += model.weights[k] * tr_sigma(model, k);
  }
  return transport + within;
}

double closed_form_cost_direct(const CoresetGmm& model,
                               const Eigen::MatrixXd& data) {
  double e_x2 = data.rowwise().squaredNorm().mean();
  Eigen::VectorXd xbar = data.colwise().mean().transpose();
  Eigen::VectorXd mu_w = model.means.transpose() * model.weights;
  double mix = 0.0;
  for (int k = 0; k < model.K; ++k) {
    mix += model.weights[k] *
           (model.means.row(k).squaredNorm() + tr_sigma(model, k));
  }
  return e_x2 - 2.0 * xbar.dot(mu_w) + mix;
}

double closed_form_cost_independent(const Eigen::MatrixXd& data) {
  double e_x2 = data.rowwise().squaredNorm().mean();
  return e_x2 + 2.0 * static_cast<double>(data.cols());
}

TheoryReport verify_second_moments(const CoresetGmm& model,
                                   const Eigen::MatrixXd& data, int n_draws,
                                   std::uint64_t seed) {
  TheoryReport rep;
  rep.check = "second_moments";
  const std::vector<std::pair<Coupling, double>> cases = {
      {Coupling::kSinkhornAnchored, closed_form_cost_sinkhorn(model, data)},
      {Coupling::kDirectPrior, closed_form_cost_direct(model, data)},
      {Coupling::kIndependentGaussian, closed_form_cost_independent(data)},
  };
  constexpr int kChunk = 4096;
  std::map<std::string, double> mc;
  int case_id = 0;
  for (const auto& [coupling, closed] : cases) {
    double total = 0.0;
    long done = 0;
    int chunk_id = 0;
    while (done < n_draws) {
      int b = static_cast<int>(
          std::min<long>(kChunk, static_cast<long>(n_draws) - done));
      Rng rng = Rng::stream(seed, /*a=*/10,
                            /*b=*/static_cast<std::uint64_t>(case_id),
                            /*c=*/static_cast<std::uint64_t>(chunk_id));
      TrainingBatch batch =
          draw_training_batch(model, data, coupling, /*t=*/0.0, b, rng);
      total += (batch.v1 - batch.v0).array().square().rowwise().sum().sum();
      done += b;
      ++chunk_id;
    }
    std::string name = coupling_to_string(coupling);
    double estimate = total / static_cast<double>(n_draws);
    mc[name] = estimate;
    rep.values["mc_" + name] = estimate;
    rep.values["closed_" + name] = closed;
    rep.values["rel_err_" + name] =
        std::abs(estimate - closed) / std::max(std::abs(closed), 1e-12);
    ++case_id;
  }
  rep.info["n_draws"] = std::to_string(n_draws);
  bool within = rep.values["rel_err_sinkhorn_anchored"] <= 0.01 &&
                rep.values["rel_err_direct_prior"] <= 0.01 &&
                rep.values["rel_err_independent_gaussian"] <= 0.01;
  bool ordered_mc = mc["sinkhorn_anchored"] < mc["direct_prior"] &&
                    mc["direct_prior"] < mc["independent_gaussian"];
  bool ordered_closed =
      rep.values["closed_sinkhorn_anchored"] < rep.values["closed_direct_prior"] &&
      rep.values["closed_direct_prior"] <
          rep.values["closed_independent_gaussian"];
  rep.values["ordering_mc"] = ordered_mc ? 1.0 : 0.0;
  rep.values["ordering_closed"] = ordered_closed ? 1.0 : 0.0;
  rep.pass = within && ordered_mc && ordered_closed;
  return rep;
}

QuantizationResult quantization_rate(int n, const std::vector<int>& K_grid,
                                     int pool, std::uint64_t seed) {
  if (pool > 1024) {
    throw std::invalid_argument("quantization_rate: pool must be <= 1024");
  }
  Rng data_rng = Rng::stream(seed, /*a=*/11, /*b=*/0, /*c=*/0);
  Eigen::MatrixXd data(n, 2);
  for (int i = 0; i < n; ++i) {
    data(i, 0) = data_rng.uniform();
    data(i, 1) = data_rng.uniform();
  }
  QuantizationResult out;
  for (int K : K_grid) {
    // Entropic radius shrinking as 1/K keeps the blur proportional to the
    // optimal cell cost at every K (the rate-schedule formula in d=2).
    double lambda = 0.2 / static_cast<double>(K);
    EmsResult fit = sinkhorn_ems_fit(data, K, lambda, /*iters=*/120,
                                     seed + static_cast<std::uint64_t>(K));
    Rng rng = Rng::stream(seed, /*a=*/11, /*b=*/static_cast<std::uint64_t>(K),
                          /*c=*/1);
    auto [sub, unused] = disjoint_subsamples(data, pool, rng);
    // Atom-measure draws: categorical over weights at the fitted anchors.
    std::vector<double> w(fit.weights.data(), fit.weights.data() + K);
    Eigen::MatrixXd atoms(pool, 2);
    for (int i = 0; i < pool; ++i) {
      atoms.row(i) = fit.means.row(static_cast<Eigen::Index>(rng.categorical(w)));
    }
    out.Ks.push_back(K);
    out.w2.push_back(exact_w2_small(sub, atoms));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < out.Ks.size(); ++i) {
    double x = std::log(static_cast<double>(out.Ks[i]));
    double y = std::log(out.w2[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m >= 2) out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return out;
}

TheoryReport decomposition_sweep(const std::string& dataset_name,
                                 const std::vector<int>& n_grid,
                                 const std::vector<int>& K_grid, int rank,
                                 std::uint64_t seed) {
  TheoryReport rep;
  rep.check = "decomposition_sweep";
  rep.info["dataset"] = dataset_name;
  DatasetParams params = dataset_params(dataset_name);
  double lambda = dataset_default_lambda(dataset_name);

  for (int n : n_grid) {
    for (int K : K_grid) {
      if (K > n) continue;
      // Cell seed derives from (seed, n, K) so cells are independent.
      std::uint64_t cell_seed =
          splitmix64(seed ^ (static_cast<std::uint64_t>(n) << 20) ^
                     static_cast<std::uint64_t>(K));
      PointCloud cloud = sample_target(params, n, cell_seed);
      EmsResult fit =
          sinkhorn_ems_fit(cloud.points, K, lambda, /*iters=*/60, cell_seed);
      CoresetGmm model = ppca_lift(cloud.points, fit, rank, lambda);

      const int pool = std::min(512, n / 2);
      Rng rng = Rng::stream(cell_seed, /*a=*/12, /*b=*/0, /*c=*/0);
      auto [sub_a, sub_b] = disjoint_subsamples(cloud.points, pool, rng);
      double sampling = exact_w2_small(sub_a, sub_b);

      std::vector<double> w(fit.weights.data(), fit.weights.data() + K);
      Eigen::MatrixXd atoms(pool, model.d);
      for (int i = 0; i < pool; ++i) {
        atoms.row(i) =
            fit.means.row(static_cast<Eigen::Index>(rng.categorical(w)));
      }
      double coreset_term = exact_w2_small(sub_a, atoms);

      double smoothing = 0.0;
      for (int k = 0; k < K; ++k) {
        smoothing += fit.weights[k] * tr_sigma(model, k);
      }
      smoothing = std::sqrt(smoothing);

      PointCloud fresh = sample_target(params, pool, cell_seed + 1);
      Eigen::MatrixXd gen = sample_gmm(model, pool, rng);
      double measured = exact_w2_small(gen, fresh.points);

      double bound = sampling + coreset_term + smoothing;
      rep.table.push_back({{"n", static_cast<double>(n)},
                           {"K", static_cast<double>(K)},
                           {"sampling", sampling},
                           {"coreset", coreset_term},
                           {"smoothing", smoothing},
                           {"measured", measured},
                           {"bound", bound},
                           {"ratio", measured / bound}});
      if (!(measured / bound > 0.0 && measured / bound <= 1.0)) {
        rep.pass = false;
      }
    }
  }
  return rep;
}

}  // namespace coreflow
