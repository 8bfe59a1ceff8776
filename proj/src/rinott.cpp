#include "p3c/alloc.hpp"

#include "p3c/error.hpp"
#include "p3c/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <numeric>

namespace p3c {

namespace {

// Quadrature nodes over the chi-square(nu) distribution in probability
// space. Panels are refined towards both tails where the quantile map is
// steep.
struct ChiNodes {
  std::vector<double> x;
  std::vector<double> w;
};

ChiNodes chi_nodes(double nu) {
  static constexpr double edges[] = {0.0, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5,
                                     0.8, 0.95, 0.99, 0.999, 0.9999, 1 - 1e-6, 1 - 1e-8, 1.0};
  using Rule = boost::math::quadrature::gauss<double, 30>;
  const auto& absc = Rule::abscissa();
  const auto& wts = Rule::weights();
  boost::math::chi_squared_distribution<double> chi(nu);
  ChiNodes out;
  for (std::size_t e = 0; e + 1 < std::size(edges); ++e) {
    const double a = edges[e], b = edges[e + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    auto push = [&](double t, double w) {
      out.x.push_back(boost::math::quantile(chi, mid + half * t));
      out.w.push_back(half * w);
    };
    for (std::size_t k = 0; k < absc.size(); ++k) {
      if (absc[k] == 0.0) {
        push(0.0, wts[k]);
      } else {
        push(absc[k], wts[k]);
        push(-absc[k], wts[k]);
      }
    }
  }
  return out;
}

double rinott_probability(double h, double nu, std::size_t p, const ChiNodes& nodes) {
  double total = 0.0;
  for (std::size_t b = 0; b < nodes.x.size(); ++b) {
    const double y = nodes.x[b];
    double inner = 0.0;
    for (std::size_t a = 0; a < nodes.x.size(); ++a)
      inner += nodes.w[a] * normal_cdf(h / std::sqrt(nu * (1.0 / nodes.x[a] + 1.0 / y)));
    total += nodes.w[b] * std::pow(inner, static_cast<double>(p - 1));
  }
  return total;
}

}  // namespace

double rinott_h(std::size_t p, double alpha, std::int64_t n0) {
  if (p < 2) throw ConfigError("rinott constant needs p >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("rinott alpha must lie in (0, 1)");
  if (n0 < 2) throw ConfigError("rinott needs n0 >= 2");
  const double nu = static_cast<double>(n0 - 1);
  const auto nodes = chi_nodes(nu);
  const double target = 1.0 - alpha;
  auto f = [&](double h) { return rinott_probability(h, nu, p, nodes) - target; };
  double hi = 1.0;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e4) throw ConvergenceError("rinott constant: no bracket found");
  }
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(f, 0.0, hi, f(0.0), f(hi),
                                                      boost::math::tools::eps_tolerance<double>(40), iters);
  if (iters >= 200) throw ConvergenceError("rinott constant: root finder did not converge");
  return 0.5 * (root.first + root.second);
}

ScopeResult rinott_two_stage(const SampleSource& source, std::span<const std::size_t> scope,
                             std::span<const std::int64_t> prior_prefix, std::int64_t n0, double alpha,
                             double delta) {
  const std::size_t m = scope.size();
  if (m == 0) throw ConfigError("rinott needs a nonempty scope");
  if (n0 < 2) throw ConfigError("rinott needs n0 >= 2");
  if (!(delta > 0.0)) throw ConfigError("rinott needs delta > 0");
  if (!prior_prefix.empty() && prior_prefix.size() != m) throw ConfigError("prior prefix size mismatch");

  ScopeResult res;
  res.final_prefix.assign(m, 0);
  std::int64_t prior_total = 0;
  std::vector<std::int64_t> target(m);
  for (std::size_t t = 0; t < m; ++t) {
    const std::int64_t prior = prior_prefix.empty() ? 0 : prior_prefix[t];
    prior_total += prior;
    target[t] = std::max(prior, n0);
  }
  if (m >= 2) {
    const double h = rinott_h(m, alpha, n0);
    for (std::size_t t = 0; t < m; ++t) {
      SampleStore first(1, false);
      for (std::int64_t r = 0; r < n0; ++r) first.observe(0, source.observe(scope[t], static_cast<std::uint64_t>(r)));
      const double need = std::ceil(h * h * first.variance(0) / (delta * delta));
      target[t] = std::max(target[t], std::max<std::int64_t>(n0, static_cast<std::int64_t>(need)));
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < m; ++t) {
    double sum = 0.0;
    for (std::int64_t r = 0; r < target[t]; ++r) sum += source.observe(scope[t], static_cast<std::uint64_t>(r));
    const double mean = sum / static_cast<double>(target[t]);
    if (mean > best) {
      best = mean;
      res.selected = scope[t];
    }
    res.final_prefix[t] = target[t];
  }
  res.total_samples = std::accumulate(target.begin(), target.end(), std::int64_t{0});
  res.new_samples = res.total_samples - prior_total;
  res.success = true;
  res.final_bound_raw = 1.0 - alpha;
  res.final_mopcs = 1.0 - alpha;
  TraceRecord rec;
  rec.iteration = 1;
  rec.tau_star = res.selected;
  rec.tag = AllocCase::rinott_stage2;
  rec.bound = 1.0 - alpha;
  rec.cumulative = res.total_samples;
  res.trace.push_back(rec);
  return res;
}

}  // namespace p3c
