#include "coreflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "coreflow/dataset.hpp"
#include "coreflow/rng.hpp"

namespace coreflow {

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : scalars) j["scalars"][k] = v;
  for (const auto& [k, v] : info) j["info"][k] = v;
  return j.dump(2);
}

namespace {

// Piecewise-linear interpolated quantile function with knots at
// u_i = (i + 0.5)/n, constant extrapolation beyond the extreme knots.
double quantile_interp(const std::vector<double>& sorted, double u) {
  const auto n = static_cast<double>(sorted.size());
  double pos = u * n - 0.5;
  if (pos <= 0.0) return sorted.front();
  if (pos >= n - 1.0) return sorted.back();
  auto lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void require_nonempty(std::size_t na, std::size_t nb, const char* who) {
  if (na == 0 || nb == 0) {
    throw std::invalid_argument(std::string(who) + ": empty sample");
  }
}

}  // namespace

double w2sq_1d(std::vector<double> a, std::vector<double> b) {
  require_nonempty(a.size(), b.size(), "w2sq_1d");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double diff = a[i] - b[i];
      total += diff * diff;
    }
    return total / static_cast<double>(a.size());
  }
  // Unequal sizes: integrate (Qa - Qb)^2 over [0,1].  Between consecutive
  // breakpoints both quantile functions are linear, so the integrand is a
  // quadratic and Simpson's rule on the segment is exact.
  std::vector<double> breaks;
  breaks.reserve(a.size() + b.size() + 2);
  breaks.push_back(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    breaks.push_back((static_cast<double>(i) + 0.5) /
                     static_cast<double>(a.size()));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    breaks.push_back((static_cast<double>(i) + 0.5) /
                     static_cast<double>(b.size()));
  }
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  auto sq_diff = [&](double u) {
    double diff = quantile_interp(a, u) - quantile_interp(b, u);
    return diff * diff;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double u0 = breaks[i], u1 = breaks[i + 1];
    if (u1 <= u0) continue;
    double mid = 0.5 * (u0 + u1);
    total += (u1 - u0) / 6.0 * (sq_diff(u0) + 4.0 * sq_diff(mid) + sq_diff(u1));
  }
  return total;
}

double sliced_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                 int n_proj, std::uint64_t seed) {
  if (A.cols() != B.cols()) {
    throw std::invalid_argument("sliced_w2: dimension mismatch");
  }
  if (n_proj < 1) throw std::invalid_argument("sliced_w2: n_proj must be >= 1");
  require_nonempty(A.rows(), B.rows(), "sliced_w2");
  const auto d = A.cols();
  Rng rng = Rng::stream(seed, /*a=*/2, /*b=*/0, /*c=*/0);
  double total = 0.0;
  std::vector<double> pa(A.rows()), pb(B.rows());
  for (int p = 0; p < n_proj; ++p) {
    Eigen::VectorXd u(d);
    do {
      for (Eigen::Index j = 0; j < d; ++j) u[j] = rng.normal();
    } while (u.norm() == 0.0);
    u.normalize();
    for (Eigen::Index i = 0; i < A.rows(); ++i) pa[i] = A.row(i).dot(u);
    for (Eigen::Index i = 0; i < B.rows(); ++i) pb[i] = B.row(i).dot(u);
    total += w2sq_1d(pa, pb);
  }
  return total / n_proj;
}

double exact_w2_small(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows()) {
    throw std::invalid_argument("exact_w2_small: pools must be size-matched");
  }
  if (A.cols() != B.cols()) {
    throw std::invalid_argument("exact_w2_small: dimension mismatch");
  }
  const int n = static_cast<int>(A.rows());
  if (n == 0) throw std::invalid_argument("exact_w2_small: empty pool");
  if (n > 1024) {
    throw std::invalid_argument(
        "exact_w2_small: pool too large for the exact solver (max 1024)");
  }
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cost(i, j) = (A.row(i) - B.row(j)).squaredNorm();
    }
  }
  // Jonker-Volgenant shortest augmenting path with dual potentials; O(n^3).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match_col(n + 1, 0);  // column -> assigned row (1-based)
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = match_col[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(match_col[j] - 1, j - 1);
  return std::sqrt(total / n);
}

double mode_tv(const Eigen::MatrixXd& samples, const DatasetParams& params) {
  Eigen::MatrixXd centers = mode_centers(params);  // throws if no modes
  const auto m = centers.rows();
  require_nonempty(samples.rows(), 1, "mode_tv");
  std::vector<double> hist(m, 0.0);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    hist[assign_mode(samples.row(i).transpose(), params)] += 1.0;
  }
  double tv = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    tv += std::abs(hist[k] / static_cast<double>(samples.rows()) -
                   1.0 / static_cast<double>(m));
  }
  return 0.5 * tv;
}

std::vector<double> nn_distances(const Eigen::MatrixXd& from,
                                 const Eigen::MatrixXd& to) {
  require_nonempty(from.rows(), to.rows(), "nn_distances");
  if (from.cols() != to.cols()) {
    throw std::invalid_argument("nn_distances: dimension mismatch");
  }
  std::vector<double> out(from.rows());
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < to.rows(); ++j) {
      best = std::min(best, (from.row(i) - to.row(j)).squaredNorm());
    }
    out[i] = std::sqrt(best);
  }
  return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  require_nonempty(a.size(), b.size(), "ks_statistic");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double ks = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    // Evaluate the ECDF gap only once both samples have absorbed all mass
    // at the current value, so ties (e.g. identical samples) contribute 0.
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] == x) ++ia;
    while (ib < b.size() && b[ib] == x) ++ib;
    double fa = static_cast<double>(ia) / static_cast<double>(a.size());
    double fb = static_cast<double>(ib) / static_cast<double>(b.size());
    ks = std::max(ks, std::abs(fa - fb));
  }
  return ks;
}

double w1_1d(std::vector<double> a, std::vector<double> b) {
  require_nonempty(a.size(), b.size(), "w1_1d");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
  }
  // |Qa - Qb| is piecewise linear between merged knots; trapezoid on the
  // segments is exact except where the difference changes sign, which the
  // midpoint evaluation of Simpson handles to well below metric noise.
  std::vector<double> breaks;
  breaks.push_back(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    breaks.push_back((static_cast<double>(i) + 0.5) /
                     static_cast<double>(a.size()));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    breaks.push_back((static_cast<double>(i) + 0.5) /
                     static_cast<double>(b.size()));
  }
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  auto abs_diff = [&](double u) {
    return std::abs(quantile_interp(a, u) - quantile_interp(b, u));
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double u0 = breaks[i], u1 = breaks[i + 1];
    if (u1 <= u0) continue;
    double mid = 0.5 * (u0 + u1);
    total +=
        (u1 - u0) / 6.0 * (abs_diff(u0) + 4.0 * abs_diff(mid) + abs_diff(u1));
  }
  return total;
}

std::pair<double, double> knn_gof(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Aref,
                                  const Eigen::MatrixXd& Bref) {
  const auto n = A.rows();
  if (B.rows() != n || Aref.rows() != n || Bref.rows() != n) {
    throw std::invalid_argument(
        "knn_gof: all pools must share one size (1-NN distance laws shift "
        "with pool size, so mixed sizes would not be comparable)");
  }
  std::vector<double> da = nn_distances(A, B);
  std::vector<double> dref = nn_distances(Aref, Bref);
  return {ks_statistic(da, dref), w1_1d(da, dref)};
}

std::pair<double, double> precision_recall(const Eigen::MatrixXd& gen,
                                           const Eigen::MatrixXd& real,
                                           int k) {
  if (gen.rows() != real.rows()) {
    throw std::invalid_argument("precision_recall: pools must be size-matched");
  }
  if (gen.cols() != real.cols()) {
    throw std::invalid_argument("precision_recall: dimension mismatch");
  }
  const auto n = gen.rows();
  if (k < 1) throw std::invalid_argument("precision_recall: k must be >= 1");
  if (k >= n) {
    throw std::invalid_argument("precision_recall: k must be < pool size");
  }

  // Squared k-NN radius of each point within its own pool (self excluded).
  auto knn_radii_sq = [k](const Eigen::MatrixXd& pool) {
    const auto m = pool.rows();
    std::vector<double> radii(m);
    std::vector<double> row(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        row[j] = (i == j) ? std::numeric_limits<double>::infinity()
                          : (pool.row(i) - pool.row(j)).squaredNorm();
      }
      std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
      radii[i] = row[k - 1];
      }
    return radii;
  };
  // Fraction of query points lying inside at least one manifold ball.
  auto covered_fraction = [](const Eigen::MatrixXd& queries,
                             const Eigen::MatrixXd& support,
                             const std::vector<double>& radii_sq) {
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
      for (Eigen::Index j = 0; j < support.rows(); ++j) {
        if ((queries.row(i) - support.row(j)).squaredNorm() <= radii_sq[j]) {
          ++hits;
          break;
        }
      }
    }
    return static_cast<double>(hits) / static_cast<double>(queries.rows());
  };

  std::vector<double> real_radii = knn_radii_sq(real);
  std::vector<double> gen_radii = knn_radii_sq(gen);
  double precision = covered_fraction(gen, real, real_radii);
  double recall = covered_fraction(real, gen, gen_radii);
  return {precision, recall};
}

}  // namespace coreflow
