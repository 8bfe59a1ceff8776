#include "p3c/pcs.hpp"

#include "p3c/error.hpp"
#include "p3c/rng.hpp"
#include "p3c/simd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace p3c {
namespace {

constexpr std::size_t kChunk = 1 << 15;

void check_inputs(std::span<const double> means, const Matrix& cov, std::span<const std::int64_t> counts) {
  const auto p = means.size();
  if (static_cast<std::size_t>(cov.rows()) != p || static_cast<std::size_t>(cov.cols()) != p || counts.size() != p) {
    throw ConfigError("PCS inputs have inconsistent dimensions");
  }
  for (std::int64_t c : counts) {
    if (c < 1) throw ConfigError("PCS inputs need every count >= 1");
  }
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct RowMajorFactor {
  std::vector<double> data;
  bool lower = true;
};

RowMajorFactor factor_mean_covariance(const Matrix& mean_cov) {
  Factorization f = psd_factor(mean_cov);
  const auto m = f.factor.rows();
  RowMajorFactor out;
  out.data.resize(static_cast<std::size_t>(m * m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const double v = f.factor(i, k);
      out.data[static_cast<std::size_t>(i * m + k)] = v;
      if (k > i && v != 0.0) out.lower = false;
    }
  }
  return out;
}

}  // namespace

Matrix mean_covariance_matrix(const Matrix& cov, std::span<const std::int64_t> counts) {
  const auto p = cov.rows();
  Matrix c(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      c(i, j) = cov(i, j) / static_cast<double>(std::max(counts[i], counts[j]));
    }
  }
  return c;
}

PcsContext build_context(std::size_t tau, std::span<const double> means, const Matrix& cov,
                         std::span<const std::int64_t> counts) {
  check_inputs(means, cov, counts);
  const std::size_t p = means.size();
  if (tau >= p) throw ConfigError("build_context: tau out of range");
  const Matrix c = mean_covariance_matrix(cov, counts);
  const auto t = static_cast<Eigen::Index>(tau);
  PcsContext ctx;
  ctx.tau = tau;
  for (std::size_t i = 0; i < p; ++i) {
    if (i == tau) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double lam = c(t, t) + c(ii, ii) - 2.0 * c(t, ii);
    if (!(lam > 0.0)) {
      std::ostringstream msg;
      msg << "degenerate PCS context: lambda <= 0 for (tau=" << tau << ", i=" << i << ")";
      throw DegenerateError(msg.str());
    }
    ctx.others.push_back(i);
    ctx.lambda.push_back(lam);
    ctx.d.push_back((means[tau] - means[i]) / std::sqrt(lam));
    if (means[i] > means[tau]) {
      ctx.better.push_back(i);
    } else if (means[i] < means[tau]) {
      ctx.worse.push_back(i);
    } else {
      ctx.ties.push_back(i);
    }
  }
  const auto q = static_cast<Eigen::Index>(ctx.others.size());
  ctx.rtilde.resize(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    const auto i = static_cast<Eigen::Index>(ctx.others[a]);
    for (Eigen::Index b = 0; b < q; ++b) {
      const auto j = static_cast<Eigen::Index>(ctx.others[b]);
      const double cv = c(t, t) - c(t, j) - c(i, t) + c(i, j);
      ctx.rtilde(a, b) = std::clamp(cv / std::sqrt(ctx.lambda[a] * ctx.lambda[b]), -1.0, 1.0);
    }
  }
  return ctx;
}

// ---------------------------------------------------------------- Monte Carlo

std::vector<McEstimate> pcs_monte_carlo_all(std::span<const double> means, const Matrix& cov,
                                            std::span<const std::int64_t> counts, std::size_t draws,
                                            std::uint64_t seed) {
  check_inputs(means, cov, counts);
  if (draws == 0) throw ConfigError("pcs_monte_carlo: draws must be positive");
  const std::size_t m = means.size();
  const RowMajorFactor f = factor_mean_covariance(mean_covariance_matrix(cov, counts));
  const auto& kern = simd::kernels();
  rng::NormalStream normal(seed);
  std::vector<std::int64_t> wins(m, 0);
  std::vector<double> z;
  std::vector<std::int32_t> winners;
  for (std::size_t done = 0; done < draws;) {
    const std::size_t b = std::min(kChunk, draws - done);
    z.resize(m * b);
    winners.resize(b);
    normal.fill(z);
    kern.mvn_argmax(f.data.data(), f.lower, means.data(), m, z.data(), b, winners.data());
    for (std::int32_t w : winners) {
      if (w >= 0) ++wins[static_cast<std::size_t>(w)];
    }
    done += b;
  }
  std::vector<McEstimate> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double ph = static_cast<double>(wins[i]) / static_cast<double>(draws);
    out[i] = {ph, std::sqrt(ph * (1.0 - ph) / static_cast<double>(draws))};
  }
  return out;
}

McEstimate pcs_monte_carlo(std::size_t tau, std::span<const double> means, const Matrix& cov,
                           std::span<const std::int64_t> counts, std::size_t draws, std::uint64_t seed) {
  if (tau >= means.size()) throw ConfigError("pcs_monte_carlo: tau out of range");
  return pcs_monte_carlo_all(means, cov, counts, draws, seed)[tau];
}

McPcsEngine::McPcsEngine(std::size_t m, std::size_t draws, std::uint64_t seed)
    : m_(m), draws_(draws), z_(m * draws) {
  if (draws == 0) throw ConfigError("McPcsEngine: draws must be positive");
  rng::NormalStream normal(seed);
  normal.fill(z_);
}

std::vector<McEstimate> McPcsEngine::evaluate(std::span<const double> means, const Matrix& cov,
                                              std::span<const std::int64_t> counts) const {
  check_inputs(means, cov, counts);
  if (means.size() != m_) throw ConfigError("McPcsEngine: dimension mismatch");
  const RowMajorFactor f = factor_mean_covariance(mean_covariance_matrix(cov, counts));
  std::vector<std::int32_t> winners(draws_);
  simd::kernels().mvn_argmax(f.data.data(), f.lower, means.data(), m_, z_.data(), draws_, winners.data());
  std::vector<std::int64_t> wins(m_, 0);
  for (std::int32_t w : winners) {
    if (w >= 0) ++wins[static_cast<std::size_t>(w)];
  }
  std::vector<McEstimate> out(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    const double ph = static_cast<double>(wins[i]) / static_cast<double>(draws_);
    out[i] = {ph, std::sqrt(ph * (1.0 - ph) / static_cast<double>(draws_))};
  }
  return out;
}

// ---------------------------------------------------------------- Bonferroni

BonferroniBound mopcs_bonferroni(std::span<const double> means, const Matrix& cov,
                                 std::span<const std::int64_t> counts, std::size_t tau, double iz_delta,
                                 bool strict) {
  check_inputs(means, cov, counts);
  const std::size_t p = means.size();
  if (tau >= p) throw ConfigError("mopcs_bonferroni: tau out of range");
  const auto t = static_cast<Eigen::Index>(tau);
  const double nt = static_cast<double>(counts[tau]);
  double sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    if (i == tau) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double ni = static_cast<double>(counts[i]);
    const double lam = cov(t, t) / nt + cov(ii, ii) / ni - 2.0 * cov(t, ii) / std::max(nt, ni);
    double gap = means[tau] - means[i];
    if (iz_delta > 0.0 && gap >= 0.0) gap = std::max(gap, iz_delta);
    if (lam > 0.0) {
      sum += normal_cdf(gap / std::sqrt(lam));
    } else if (strict) {
      std::ostringstream msg;
      msg << "degenerate PCS context: lambda <= 0 for (tau=" << tau << ", i=" << i << ")";
      throw DegenerateError(msg.str());
    } else {
      sum += gap > 0.0 ? 1.0 : (gap < 0.0 ? 0.0 : 0.5);
    }
  }
  BonferroniBound b;
  b.raw = sum - (static_cast<double>(p) - 2.0);
  b.clamped = std::clamp(b.raw, 0.0, 1.0);
  return b;
}

double bonferroni_min_form(const PcsContext& ctx) {
  if (ctx.d.empty()) return 1.0;
  const double lo = *std::min_element(ctx.d.begin(), ctx.d.end());
  const double q = static_cast<double>(ctx.d.size());
  return q * normal_cdf(lo) - (q - 1.0);
}

PcsMethod parse_pcs_method(const std::string& name) {
  if (name == "bonferroni") return PcsMethod::bonferroni;
  if (name == "monte_carlo" || name == "mc") return PcsMethod::monte_carlo;
  throw ConfigError("unknown PCS method '" + name + "'");
}

const char* pcs_method_name(PcsMethod m) {
  return m == PcsMethod::bonferroni ? "bonferroni" : "monte_carlo";
}

// ---------------------------------------------------------------- P-OS

SelectionResult selection_from_values(std::span<const double> means, std::vector<double> pcs,
                                      std::vector<double> se, PcsMethod method) {
  SelectionResult r;
  r.method = method;
  r.pcs = std::move(pcs);
  r.se = std::move(se);
  r.tau_star = argmax_lowest(r.pcs);
  r.mopcs = r.pcs[r.tau_star];
  r.best_mean_index = argmax_lowest(means);
  r.pcs_trad = r.pcs[r.best_mean_index];
  r.case_a = r.tau_star == r.best_mean_index || means[r.tau_star] == means[r.best_mean_index];
  return r;
}

SelectionResult select_pos(std::span<const double> means, const Matrix& cov, std::span<const std::int64_t> counts,
                           PcsMethod method, std::size_t draws, std::uint64_t seed) {
  check_inputs(means, cov, counts);
  if (means.size() < 2) throw ConfigError("select_pos needs at least two alternatives");
  if (method == PcsMethod::bonferroni) {
    std::vector<double> v(means.size());
    for (std::size_t t = 0; t < means.size(); ++t) v[t] = mopcs_bonferroni(means, cov, counts, t).raw;
    return selection_from_values(means, std::move(v), {}, method);
  }
  const auto est = pcs_monte_carlo_all(means, cov, counts, draws, seed);
  std::vector<double> v, s;
  for (const auto& e : est) {
    v.push_back(e.p);
    s.push_back(e.se);
  }
  return selection_from_values(means, std::move(v), std::move(s), method);
}

SelectionResult select_pos(std::span<const double> means, const Matrix& cov, std::span<const std::int64_t> counts,
                           const McPcsEngine& engine) {
  if (means.size() < 2) throw ConfigError("select_pos needs at least two alternatives");
  const auto est = engine.evaluate(means, cov, counts);
  std::vector<double> v, s;
  for (const auto& e : est) {
    v.push_back(e.p);
    s.push_back(e.se);
  }
  return selection_from_values(means, std::move(v), std::move(s), PcsMethod::monte_carlo);
}

// ---------------------------------------------------------------- finite differences

FdResult fd_probe(std::size_t tau, const std::function<PcsParams(double)>& at, double theta, double h,
                  std::size_t draws, std::uint64_t seed) {
  if (!(h > 0.0)) throw ConfigError("fd_probe: step must be positive");
  const PcsParams plus = at(theta + h);
  const PcsParams minus = at(theta - h);
  check_inputs(plus.means, plus.cov, plus.counts);
  check_inputs(minus.means, minus.cov, minus.counts);
  const Matrix cp = mean_covariance_matrix(plus.cov, plus.counts);
  const Matrix cm = mean_covariance_matrix(minus.cov, minus.counts);
  if (!is_psd(cp) || !is_psd(cm)) throw NotPsdError("fd_probe: covariance not PSD at theta +- h");
  const RowMajorFactor fp = factor_mean_covariance(cp);
  const RowMajorFactor fm = factor_mean_covariance(cm);
  const std::size_t m = plus.means.size();
  if (tau >= m) throw ConfigError("fd_probe: tau out of range");

  const auto& kern = simd::kernels();
  rng::NormalStream normal(seed);
  std::vector<double> z;
  std::vector<std::int32_t> wp, wm;
  std::int64_t hits_plus = 0, hits_minus = 0, sum_d = 0, sum_d2 = 0;
  for (std::size_t done = 0; done < draws;) {
    const std::size_t b = std::min(kChunk, draws - done);
    z.resize(m * b);
    wp.resize(b);
    wm.resize(b);
    normal.fill(z);
    kern.mvn_argmax(fp.data.data(), fp.lower, plus.means.data(), m, z.data(), b, wp.data());
    kern.mvn_argmax(fm.data.data(), fm.lower, minus.means.data(), m, z.data(), b, wm.data());
    for (std::size_t d = 0; d < b; ++d) {
      const int a = wp[d] == static_cast<std::int32_t>(tau);
      const int c = wm[d] == static_cast<std::int32_t>(tau);
      hits_plus += a;
      hits_minus += c;
      sum_d += a - c;
      sum_d2 += (a - c) * (a - c);
    }
    done += b;
  }
  const double n = static_cast<double>(draws);
  const double mean_d = static_cast<double>(sum_d) / n;
  const double var_d = (static_cast<double>(sum_d2) / n - mean_d * mean_d) * n / std::max(n - 1.0, 1.0);
  FdResult r;
  r.pcs_plus = static_cast<double>(hits_plus) / n;
  r.pcs_minus = static_cast<double>(hits_minus) / n;
  r.derivative = mean_d / (2.0 * h);
  r.se = std::sqrt(std::max(var_d, 0.0) / n) / (2.0 * h);
  return r;
}

}  // namespace p3c
