#include "coreflow/velocity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace coreflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Shared eigen-structure of one component: orthonormal directions U
// (d x r) spanning the column space of L, with Sigma eigenvalue
// g_j + sigma2 along U.col(j) and sigma2 on the orthogonal complement.
struct ComponentBasis {
  Eigen::MatrixXd U;       // d x r, orthonormal columns (zero cols allowed)
  Eigen::VectorXd spikes;  // r, eigenvalues g_j >= 0 of L L^T
};

ComponentBasis component_basis(const Eigen::MatrixXd& L) {
  ComponentBasis cb;
  const auto d = L.rows();
  const auto r = L.cols();
  cb.U = Eigen::MatrixXd::Zero(d, r);
  cb.spikes = Eigen::VectorXd::Zero(r);
  if (r == 0) return cb;
  // Eigenbasis of the r x r Gram matrix gives the nonzero spectrum of LL^T.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L.transpose() * L);
  for (Eigen::Index j = 0; j < r; ++j) {
    double g = std::max(eig.eigenvalues()[r - 1 - j], 0.0);  // descending
    cb.spikes[j] = g;
    if (g > 0.0) {
      cb.U.col(j) = L * eig.eigenvectors().col(r - 1 - j) / std::sqrt(g);
    }
  }
  return cb;
}

// y = Sigma^{-1} v for Sigma = U diag(g) U^T + sigma2 I.
Eigen::VectorXd sigma_inv_apply(const ComponentBasis& cb, double sigma2,
                                const Eigen::VectorXd& v) {
  Eigen::VectorXd out = v / sigma2;
  for (Eigen::Index j = 0; j < cb.spikes.size(); ++j) {
    double g = cb.spikes[j];
    if (g <= 0.0) continue;
    double coef = (1.0 / (g + sigma2) - 1.0 / sigma2) * cb.U.col(j).dot(v);
    out += coef * cb.U.col(j);
  }
  return out;
}

double log_det_sigma(const ComponentBasis& cb, double sigma2, Eigen::Index d) {
  double out = static_cast<double>(d - cb.spikes.size()) * std::log(sigma2);
  for (Eigen::Index j = 0; j < cb.spikes.size(); ++j) {
    out += std::log(cb.spikes[j] + sigma2);
  }
  return out;
}

void require_valid_inputs(const CoresetGmm& model, const Eigen::VectorXd& x,
                          double t) {
  if (x.size() != model.d) {
    throw std::invalid_argument("velocity: dimension mismatch");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("velocity: t must lie in [0, 1]");
  }
  if (!(model.shared_noise > 0.0) && model.r < model.d) {
    throw std::invalid_argument(
        "velocity: singular source covariance (shared noise is zero)");
  }
}

}  // namespace

CondVelocityLaw cond_velocity_params(const CoresetGmm& model,
                                     const Eigen::VectorXd& x, double t) {
  require_valid_inputs(model, x, t);
  const int K = model.K;
  const int d = model.d;
  const int r = model.r;
  const double s2 = model.shared_noise;

  CondVelocityLaw law;
  law.x = x;
  law.t = t;
  law.log_gammas.resize(K);
  law.component_means.resize(K, d);
  law.basis.reserve(K);
  law.spike_precisions.resize(K, r);
  law.bulk_precision.resize(K);

  const double omt = 1.0 - t;
  for (int k = 0; k < K; ++k) {
    ComponentBasis cb = component_basis(model.factors[k]);
    // Precision A = t^2 I + (1-t)^2 Sigma^{-1} shares Sigma's eigenbasis.
    double a_bulk = t * t + omt * omt / s2;
    Eigen::VectorXd a_spike(r);
    for (int j = 0; j < r; ++j) {
      a_spike[j] = t * t + omt * omt / (cb.spikes[j] + s2);
    }

    if (t == 0.0) {
      // Boundary law: gamma = w, m = mu - x, Lambda = Sigma (a = 1/eigval).
      law.log_gammas[k] =
          (model.weights[k] > 0.0)
              ? std::log(model.weights[k])
              : -std::numeric_limits<double>::infinity();
      law.component_means.row(k) =
          (model.means.row(k).transpose() - x).transpose();
    } else {
      Eigen::VectorXd diff = x - model.means.row(k).transpose();
      Eigen::VectorXd sig_inv_diff = sigma_inv_apply(cb, s2, diff);
      Eigen::VectorXd b = t * x - omt * sig_inv_diff;
      // Lambda b via the shared eigenbasis of A.
      Eigen::VectorXd m = b / a_bulk;
      for (int j = 0; j < r; ++j) {
        if (cb.spikes[j] <= 0.0) continue;
        m += (1.0 / a_spike[j] - 1.0 / a_bulk) * cb.U.col(j).dot(b) *
             cb.U.col(j);
      }
      law.component_means.row(k) = m.transpose();

      double log_det_A =
          static_cast<double>(d - r) * std::log(a_bulk);
      for (int j = 0; j < r; ++j) log_det_A += std::log(a_spike[j]);
      double c = x.squaredNorm() + diff.dot(sig_inv_diff);
      double log_eta = -0.5 * log_det_A - 0.5 * log_det_sigma(cb, s2, d) +
                       0.5 * b.dot(m) - 0.5 * c;
      law.log_gammas[k] =
          (model.weights[k] > 0.0)
              ? std::log(model.weights[k]) + log_eta
              : -std::numeric_limits<double>::infinity();
    }

    law.bulk_precision[k] = a_bulk;
    for (int j = 0; j < r; ++j) law.spike_precisions(k, j) = a_spike[j];
    law.basis.push_back(std::move(cb.U));
  }

  // Normalize so logsumexp(log_gammas) = 0.
  double mx = law.log_gammas.maxCoeff();
  double z = 0.0;
  for (int k = 0; k < K; ++k) z += std::exp(law.log_gammas[k] - mx);
  law.log_gammas.array() -= mx + std::log(z);
  return law;
}

Eigen::VectorXd sample_law_component(const CondVelocityLaw& law, int k,
                                     Rng& rng) {
  const auto d = law.x.size();
  // v = m + Lambda^{1/2} zeta via the eigenbasis of A (precision a ->
  // standard deviation a^{-1/2} along each eigendirection).
  Eigen::VectorXd zeta(d);
  for (Eigen::Index j = 0; j < d; ++j) zeta[j] = rng.normal();
  double bulk_sd = 1.0 / std::sqrt(law.bulk_precision[k]);
  Eigen::VectorXd v = law.component_means.row(k).transpose() + bulk_sd * zeta;
  const auto& U = law.basis[k];
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    if (U.col(j).squaredNorm() == 0.0) continue;
    double spike_sd = 1.0 / std::sqrt(law.spike_precisions(k, j));
    v += (spike_sd - bulk_sd) * U.col(j).dot(zeta) * U.col(j);
  }
  return v;
}

Eigen::VectorXd sample_from_law(const CondVelocityLaw& law, Rng& rng) {
  const auto K = law.log_gammas.size();
  Eigen::VectorXd probs = law.log_gammas.array().exp();
  std::vector<double> p(probs.data(), probs.data() + K);
  int b = static_cast<int>(rng.categorical(p));
  return sample_law_component(law, b, rng);
}

double law_component_logpdf(const CondVelocityLaw& law, int k,
                            const Eigen::VectorXd& v) {
  const auto d = law.x.size();
  const auto r = law.spike_precisions.cols();
  Eigen::VectorXd diff = v - law.component_means.row(k).transpose();
  // Lambda^{-1} = A, so the quadratic form uses the precisions directly.
  double quad = law.bulk_precision[k] * diff.squaredNorm();
  double log_det_lambda =
      -static_cast<double>(d - r) * std::log(law.bulk_precision[k]);
  const auto& U = law.basis[k];
  for (Eigen::Index j = 0; j < r; ++j) {
    log_det_lambda -= std::log(law.spike_precisions(k, j));
    if (U.col(j).squaredNorm() == 0.0) continue;
    double proj = U.col(j).dot(diff);
    quad += (law.spike_precisions(k, j) - law.bulk_precision[k]) * proj * proj;
  }
  return -0.5 * (d * kLog2Pi + log_det_lambda + quad);
}

Eigen::VectorXd gmm_posterior(const CoresetGmm& model,
                              const Eigen::VectorXd& y) {
  if (y.size() != model.d) {
    throw std::invalid_argument("gmm_posterior: dimension mismatch");
  }
  const double s2 = model.shared_noise;
  if (!(s2 > 0.0)) {
    throw std::invalid_argument("gmm_posterior: singular source covariance");
  }
  Eigen::VectorXd lp(model.K);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.K; ++k) {
    if (model.weights[k] <= 0.0) {
      lp[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    ComponentBasis cb = component_basis(model.factors[k]);
    Eigen::VectorXd diff = y - model.means.row(k).transpose();
    double quad = diff.dot(sigma_inv_apply(cb, s2, diff));
    lp[k] = std::log(model.weights[k]) -
            0.5 * (model.d * kLog2Pi + log_det_sigma(cb, s2, model.d) + quad);
    best = std::max(best, lp[k]);
  }
  Eigen::VectorXd probs(model.K);
  double z = 0.0;
  for (int k = 0; k < model.K; ++k) {
    probs[k] = std::isfinite(lp[k]) ? std::exp(lp[k] - best) : 0.0;
    z += probs[k];
  }
  return probs / z;
}

Eigen::VectorXd sample_surrogate(const CoresetGmm& model,
                                 const Eigen::VectorXd& x, double t,
                                 Rng& rng) {
  require_valid_inputs(model, x, t);
  if (t == 0.0) {
    // Direct O(dr) boundary form: B ~ Cat(w), v = mu_B - x + L_B z + s eta.
    std::vector<double> w(model.weights.data(),
                          model.weights.data() + model.K);
    int b = static_cast<int>(rng.categorical(w));
    Eigen::VectorXd v = model.means.row(b).transpose() - x;
    for (int j = 0; j < model.r; ++j) {
      v += model.factors[b].col(j) * rng.normal();
    }
    double s = std::sqrt(model.shared_noise);
    for (int i = 0; i < model.d; ++i) v[i] += s * rng.normal();
    return v;
  }
  CondVelocityLaw law = cond_velocity_params(model, x, t);
  return sample_from_law(law, rng);
}

double surrogate_log_density(const CoresetGmm& model,
                             const Eigen::VectorXd& y) {
  if (y.size() != model.d) {
    throw std::invalid_argument("surrogate_log_density: dimension mismatch");
  }
  const double s2 = model.shared_noise;
  if (!(s2 > 0.0)) {
    throw std::invalid_argument(
        "surrogate_log_density: singular source covariance");
  }
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd lp(model.K);
  for (int k = 0; k < model.K; ++k) {
    if (model.weights[k] <= 0.0) {
      lp[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    ComponentBasis cb = component_basis(model.factors[k]);
    Eigen::VectorXd diff = y - model.means.row(k).transpose();
    double quad = diff.dot(sigma_inv_apply(cb, s2, diff));
    lp[k] = std::log(model.weights[k]) -
            0.5 * (model.d * kLog2Pi + log_det_sigma(cb, s2, model.d) + quad);
    best = std::max(best, lp[k]);
  }
  double z = 0.0;
  for (int k = 0; k < model.K; ++k) {
    if (std::isfinite(lp[k])) z += std::exp(lp[k] - best);
  }
  return best + std::log(z);
}

Eigen::MatrixXd sample_gmm(const CoresetGmm& model, int n, Rng& rng) {
  if (n < 0) throw std::invalid_argument("sample_gmm: n must be >= 0");
  Eigen::MatrixXd out(n, model.d);
  std::vector<double> w(model.weights.data(), model.weights.data() + model.K);
  const double s = std::sqrt(std::max(model.shared_noise, 0.0));
  for (int i = 0; i < n; ++i) {
    int b = static_cast<int>(rng.categorical(w));
    Eigen::VectorXd y = model.means.row(b).transpose();
    for (int j = 0; j < model.r; ++j) {
      y += model.factors[b].col(j) * rng.normal();
    }
    for (int j = 0; j < model.d; ++j) y[j] += s * rng.normal();
    out.row(i) = y.transpose();
  }
  return out;
}

Eigen::MatrixXd dense_lambda(const CondVelocityLaw& law, int k) {
  const auto d = law.x.size();
  if (d > 8) {
    throw std::invalid_argument("dense_lambda: restricted to d <= 8");
  }
  Eigen::MatrixXd lam =
      Eigen::MatrixXd::Identity(d, d) / law.bulk_precision[k];
  const auto& U = law.basis[k];
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    if (U.col(j).squaredNorm() == 0.0) continue;
    lam += (1.0 / law.spike_precisions(k, j) - 1.0 / law.bulk_precision[k]) *
           (U.col(j) * U.col(j).transpose());
  }
  return lam;
}

}  // namespace coreflow
