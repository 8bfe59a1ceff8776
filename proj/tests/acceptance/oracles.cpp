#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace oracle {

Estimate mc_pcs(const std::vector<double>& means, const Eigen::MatrixXd& mean_cov, std::size_t tau,
                std::size_t draws, std::uint64_t seed) {
  const auto p = static_cast<Eigen::Index>(means.size());
  Eigen::LLT<Eigen::MatrixXd> llt(mean_cov + 1e-14 * Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd l = llt.matrixL();
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd e(p), x(p);
  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    for (Eigen::Index i = 0; i < p; ++i) e[i] = z(eng);
    x = l * e;
    const double xt = means[tau] + x[static_cast<Eigen::Index>(tau)];
    bool win = true;
    for (Eigen::Index i = 0; i < p && win; ++i)
      if (static_cast<std::size_t>(i) != tau && means[static_cast<std::size_t>(i)] + x[i] >= xt) win = false;
    hits += win;
  }
  const double ph = static_cast<double>(hits) / static_cast<double>(draws);
  return {ph, binomial_se(ph, draws)};
}

Eigen::MatrixXd mean_cov(const Eigen::MatrixXd& cov, const std::vector<std::int64_t>& counts) {
  Eigen::MatrixXd out = cov;
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    for (Eigen::Index j = 0; j < cov.cols(); ++j)
      out(i, j) = cov(i, j) / static_cast<double>(std::max(counts[static_cast<std::size_t>(i)],
                                                            counts[static_cast<std::size_t>(j)]));
  return out;
}

double min_d(const std::vector<double>& means, const Eigen::MatrixXd& cov, const std::vector<std::int64_t>& counts,
             std::size_t tau) {
  double lo = std::numeric_limits<double>::infinity();
  const auto t = static_cast<Eigen::Index>(tau);
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (j == tau) continue;
    if (counts[tau] == 0 || counts[j] == 0) return 0.0;
    const auto jj = static_cast<Eigen::Index>(j);
    const double nt = static_cast<double>(counts[tau]), nj = static_cast<double>(counts[j]);
    const double lam = cov(t, t) / nt + cov(jj, jj) / nj - 2.0 * cov(t, jj) / std::max(nt, nj);
    lo = std::min(lo, (means[tau] - means[j]) / std::sqrt(lam));
  }
  return lo;
}

std::vector<std::vector<std::int64_t>> cba_bruteforce(const std::vector<double>& means, const Eigen::MatrixXd& cov,
                                                      std::size_t tau, std::int64_t batch, double rel_tol) {
  const std::size_t p = means.size();
  std::vector<std::pair<double, std::vector<std::int64_t>>> all;
  std::vector<std::int64_t> n(p, 0);
  // Enumerate compositions of batch into p nonnegative parts.
  auto rec = [&](auto&& self, std::size_t i, std::int64_t left) -> void {
    if (i + 1 == p) {
      n[i] = left;
      all.emplace_back(min_d(means, cov, n, tau), n);
      return;
    }
    for (std::int64_t v = 0; v <= left; ++v) {
      n[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, batch);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : all) best = std::max(best, a.first);
  std::vector<std::vector<std::int64_t>> out;
  for (auto& a : all)
    if (a.first >= best - rel_tol * std::abs(best)) out.push_back(std::move(a.second));
  return out;
}

double occupancy_exact(int k, std::size_t g, std::size_t p_s) {
  // P(all groups hit) = sum_j (-1)^j C(k, j) C((k-j) g, p_s) / C(k g, p_s)
  auto log_choose = [](double n, double r) {
    if (r < 0 || r > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1);
  };
  const double total = log_choose(static_cast<double>(k) * static_cast<double>(g), static_cast<double>(p_s));
  double sum = 0.0;
  for (int j = 0; j <= k; ++j) {
    const double term = log_choose(k, j) + log_choose(static_cast<double>(k - j) * static_cast<double>(g),
                                                      static_cast<double>(p_s)) -
                        total;
    if (std::isfinite(term)) sum += (j % 2 ? -1.0 : 1.0) * std::exp(term);
  }
  return sum;
}

double binomial_se(double p, std::size_t n) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

}  // namespace oracle
