#include "p3c/alloc.hpp"

#include "p3c/error.hpp"
#include "p3c/rng.hpp"
#include "p3c/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace p3c {

const char* alloc_case_name(AllocCase c) {
  switch (c) {
    case AllocCase::a: return "a";
    case AllocCase::b: return "b";
    case AllocCase::equal: return "equal";
    case AllocCase::rinott_stage2: return "rinott-stage2";
  }
  return "?";
}

Engine parse_engine(const std::string& name) {
  if (name == "gba") return Engine::gba;
  if (name == "equal" || name == "ea") return Engine::equal;
  if (name == "cba") return Engine::cba;
  if (name == "rinott") return Engine::rinott;
  throw ConfigError("unknown engine '" + name + "'");
}

const char* engine_name(Engine e) {
  switch (e) {
    case Engine::gba: return "gba";
    case Engine::equal: return "equal";
    case Engine::cba: return "cba";
    case Engine::rinott: return "rinott";
  }
  return "?";
}

AllocationPlan equal_allocation(std::size_t p, std::int64_t batch) {
  if (batch < 0) throw ConfigError("negative batch size");
  AllocationPlan plan;
  plan.batch = batch;
  plan.tag = AllocCase::equal;
  plan.counts.assign(p, 0);
  if (p == 0) return plan;
  const auto base = batch / static_cast<std::int64_t>(p);
  const auto rem = batch % static_cast<std::int64_t>(p);
  for (std::size_t i = 0; i < p; ++i) plan.counts[i] = base + (static_cast<std::int64_t>(i) < rem ? 1 : 0);
  return plan;
}

std::vector<std::int64_t> largest_remainder(std::span<const double> values, std::int64_t total) {
  const std::size_t n = values.size();
  std::vector<std::int64_t> out(n, 0);
  if (n == 0) return out;
  std::vector<double> frac(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::max(0.0, values[i]);
    const double f = std::floor(v);
    out[i] = static_cast<std::int64_t>(f);
    frac[i] = v - f;
    assigned += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::int64_t rem = total - assigned;
  if (rem >= 0) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t r = 0; rem > 0; ++r, --rem) out[order[r % n]] += 1;
  } else {
    // Floating overshoot: take units back from the smallest fractional parts.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] < frac[b]; });
    for (std::size_t r = 0; rem < 0; ++r) {
      auto& c = out[order[r % n]];
      if (c > 0) {
        --c;
        ++rem;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- CBA

namespace {

struct CbaTerm {
  std::size_t index;
  double d2;    // squared (floored) mean gap
  double var;   // sigma_i^2
  double cov;   // cov(tau, i)
  double a;     // sigma_i^2 - 2 cov
  double b;     // sigma_tau^2 + a
};

struct CbaEval {
  double g = 0.0;
  std::vector<double> ratio;
  std::vector<int> branch;
  std::size_t bad = static_cast<std::size_t>(-1);
};

// Ratios N_i / N_tau at y = x * N_B.
CbaEval cba_ratios(const std::vector<CbaTerm>& terms, double st2, double y) {
  CbaEval ev;
  ev.g = 1.0;
  ev.ratio.resize(terms.size());
  ev.branch.resize(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto& c = terms[t];
    double num, den;
    if (c.a > 0.0 && c.b / c.d2 > y) {
      ev.branch[t] = 2;
      num = c.a;
      den = y * c.d2 - st2;
    } else {
      ev.branch[t] = 1;
      num = c.var;
      den = 2.0 * c.cov - st2 + y * c.d2;
    }
    double r;
    if (num <= 0.0) {
      r = 0.0;
    } else if (den <= 0.0) {
      r = std::numeric_limits<double>::infinity();
      if (ev.bad == static_cast<std::size_t>(-1)) ev.bad = c.index;
    } else {
      r = num / den;
    }
    ev.ratio[t] = r;
    ev.g += r;
  }
  return ev;
}

}  // namespace

CbaSolution cba_solve(const CbaInputs& in) {
  const std::size_t p = in.means.size();
  if (in.cov.rows() != static_cast<Eigen::Index>(p) || in.cov.cols() != static_cast<Eigen::Index>(p))
    throw ConfigError("cba: covariance dimension mismatch");
  if (in.tau >= p) throw ConfigError("cba: tau out of range");
  if (in.batch < 0) throw ConfigError("cba: negative batch");

  CbaSolution sol;
  sol.plan.batch = in.batch;
  sol.plan.tag = AllocCase::a;
  sol.plan.counts.assign(p, 0);
  sol.fractional.assign(p, 0.0);
  if (in.omega.empty()) {
    sol.plan.counts[in.tau] = in.batch;
    sol.fractional[in.tau] = static_cast<double>(in.batch);
    return sol;
  }

  const double mu_t = in.means[in.tau];
  const double st2 = in.cov(in.tau, in.tau);
  const double floor_gap = 1e-9 * (1.0 + std::abs(mu_t));
  std::vector<CbaTerm> terms;
  terms.reserve(in.omega.size());
  double m1 = 0.0, m2 = 0.0;
  bool any1 = false, any2 = false;
  for (std::size_t i : in.omega) {
    if (i >= p || i == in.tau) throw ConfigError("cba: invalid competitor index " + std::to_string(i));
    double gap = std::max(std::abs(mu_t - in.means[i]), floor_gap);
    if (in.means[i] <= mu_t) gap = std::max(gap, in.gap_floor);
    CbaTerm c{i, gap * gap, in.cov(i, i), in.cov(in.tau, i), 0.0, 0.0};
    c.a = c.var - 2.0 * c.cov;
    c.b = st2 + c.a;
    if (c.a > 0.0) {
      m1 = any1 ? std::max(m1, st2 / c.d2) : st2 / c.d2;
      any1 = true;
    } else {
      m2 = any2 ? std::max(m2, c.b / c.d2) : c.b / c.d2;
      any2 = true;
    }
    terms.push_back(c);
  }
  // Thresholds in y = x N_B units.
  double y_lo = std::max(any1 ? m1 : 0.0, any2 ? m2 : 0.0);
  if (!(y_lo > 0.0)) y_lo = std::numeric_limits<double>::min() * 1e6;
  const double nb = static_cast<double>(std::max<std::int64_t>(in.batch, 1));
  sol.m1 = m1 / nb;
  sol.m2 = m2 / nb;

  auto objective = [&](double y) {
    const auto ev = cba_ratios(terms, st2, y);
    const double v = ev.g * y;
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  constexpr int grid = 512;
  const double lo = std::log(y_lo * (1.0 + 1e-9));
  const double hi = std::log(y_lo * 1e6);
  int best_k = -1;
  double best_v = std::numeric_limits<double>::infinity();
  std::vector<double> ly(grid);
  for (int k = 0; k < grid; ++k) {
    ly[k] = lo + (hi - lo) * k / (grid - 1);
    const double v = objective(std::exp(ly[k]));
    if (v < best_v) {
      best_v = v;
      best_k = k;
    }
  }
  if (best_k < 0) throw DegenerateError("cba: empty feasible region");

  // Golden section on the log scale over the neighbouring grid cells.
  double a = ly[std::max(best_k - 1, 0)];
  double b = ly[std::min(best_k + 1, grid - 1)];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = objective(std::exp(c)), fd = objective(std::exp(d));
  for (int it = 0; it < 200 && (b - a) > 1e-12 * (1.0 + std::abs(a)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = objective(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = objective(std::exp(d));
    }
  }
  double y0 = std::exp(fc <= fd ? c : d);
  if (std::min(fc, fd) > best_v) y0 = std::exp(ly[best_k]);

  const auto ev = cba_ratios(terms, st2, y0);
  if (ev.bad != static_cast<std::size_t>(-1))
    throw DegenerateError("cba: nonpositive denominator for alternative " + std::to_string(ev.bad));
  sol.x0 = y0 / nb;
  sol.branch = ev.branch;

  const double n_tau = static_cast<double>(in.batch) / ev.g;
  sol.fractional[in.tau] = n_tau;
  for (std::size_t t = 0; t < terms.size(); ++t) sol.fractional[terms[t].index] = ev.ratio[t] * n_tau;
  sol.plan.counts = largest_remainder(sol.fractional, in.batch);
  return sol;
}

AllocationPlan cba_allocate(const CbaInputs& in) { return cba_solve(in).plan; }

// ---------------------------------------------------------------- GBA step

AllocationPlan gba_step(const StatsSnapshot& snap, const SelectionResult& sel, std::int64_t batch, double epsilon,
                        std::vector<double>* eps_credit, double iz_delta) {
  const std::size_t p = snap.means.size();
  const std::size_t tau = sel.tau_star;
  const double mu_t = snap.means[tau];
  std::vector<std::size_t> better, omega;
  for (std::size_t i = 0; i < p; ++i) {
    if (i == tau) continue;
    (snap.means[i] > mu_t ? better : omega).push_back(i);
  }

  CbaInputs in;
  in.tau = tau;
  in.means = snap.means;
  in.cov = snap.cov;
  in.gap_floor = iz_delta;
  if (better.empty()) {
    in.omega = std::move(omega);
    in.batch = batch;
    auto plan = cba_allocate(in);
    plan.tag = AllocCase::a;
    return plan;
  }

  std::vector<std::int64_t> floor_counts(p, 0);
  std::int64_t floor_total = 0;
  if (epsilon > 0.0) {
    const double share = epsilon * static_cast<double>(batch) / static_cast<double>(better.size());
    for (std::size_t i : better) {
      double owed = share + (eps_credit ? (*eps_credit)[i] : 0.0);
      auto pay = static_cast<std::int64_t>(std::floor(owed + 1e-9));
      pay = std::clamp<std::int64_t>(pay, 0, batch - floor_total);
      if (eps_credit) (*eps_credit)[i] = std::max(0.0, owed - static_cast<double>(pay));
      floor_counts[i] = pay;
      floor_total += pay;
    }
  }
  const std::int64_t rest = batch - floor_total;

  AllocationPlan plan;
  if (omega.empty()) {
    plan.counts.assign(p, 0);
    plan.counts[tau] = rest;
    plan.fallback = true;
  } else {
    in.omega = std::move(omega);
    in.batch = rest;
    plan = cba_allocate(in);
  }
  for (std::size_t i : better) plan.counts[i] += floor_counts[i];
  plan.batch = batch;
  plan.tag = AllocCase::b;
  plan.eps_floor = floor_total;
  return plan;
}

AllocationPlan gba_step(const StatsSnapshot& snap, std::int64_t batch, double epsilon, PcsMethod method,
                        std::size_t draws, std::uint64_t seed) {
  const auto sel = select_pos(snap.means, snap.cov, snap.counts, method, draws, seed);
  return gba_step(snap, sel, batch, epsilon, nullptr);
}

// ---------------------------------------------------------------- loop

namespace {

// Statistics of a scope, rebuilt from replayed replications.
class ScopeStats {
 public:
  ScopeStats(const SampleSource& src, std::span<const std::size_t> scope)
      : src_(src), scope_(scope.begin(), scope.end()), store_(scope.size(), true), prefix_(scope.size(), 0) {}

  std::int64_t prefix(std::size_t t) const { return prefix_[t]; }
  const std::vector<std::int64_t>& prefixes() const { return prefix_; }
  const SampleStore& store() const { return store_; }

  std::int64_t min_prefix() const { return *std::min_element(prefix_.begin(), prefix_.end()); }

  // Extends member t's prefix to `target`. Replications that become complete
  // across the scope are added to the joint accumulator when `joint` is set.
  void extend(const std::vector<std::int64_t>& target, bool joint) {
    const std::int64_t old_min = min_prefix();
    std::int64_t new_min = std::numeric_limits<std::int64_t>::max();
    for (std::size_t t = 0; t < scope_.size(); ++t) new_min = std::min(new_min, std::max(prefix_[t], target[t]));
    std::vector<double> row(scope_.size());
    // Complete rows go through observe_row so univariate and joint moments
    // stay in replication order.
    for (std::int64_t r = old_min; r < new_min; ++r) {
      for (std::size_t t = 0; t < scope_.size(); ++t) {
        if (r >= prefix_[t]) {
          row[t] = src_.observe(scope_[t], static_cast<std::uint64_t>(r));
          store_.observe(t, row[t]);
        } else if (joint) {
          row[t] = src_.observe(scope_[t], static_cast<std::uint64_t>(r));
        }
      }
      if (joint) store_.add_joint_row(row);
    }
    for (std::size_t t = 0; t < scope_.size(); ++t) {
      const std::int64_t from = std::max(prefix_[t], new_min);
      for (std::int64_t r = from; r < target[t]; ++r)
        store_.observe(t, src_.observe(scope_[t], static_cast<std::uint64_t>(r)));
      prefix_[t] = std::max(prefix_[t], target[t]);
    }
  }

  Matrix correlation() const {
    const auto n = store_.joint_rows();
    if (n < 2) throw DegenerateError("scope correlation needs two complete replications");
    Matrix cov = store_.joint_comoment() / static_cast<double>(n - 1);
    return correlation_from_covariance(cov);
  }

 private:
  const SampleSource& src_;
  std::vector<std::size_t> scope_;
  SampleStore store_;
  std::vector<std::int64_t> prefix_;
};

Matrix plug_in_cov(const Matrix& corr, const std::vector<double>& var) {
  const auto m = static_cast<Eigen::Index>(var.size());
  Matrix cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      cov(i, j) = i == j ? var[i] : corr(i, j) * std::sqrt(var[i] * var[j]);
  return cov;
}

}  // namespace

ScopeResult run_gba(const SampleSource& source, std::span<const std::size_t> scope,
                    std::span<const std::int64_t> prior_prefix, const GbaConfig& cfg) {
  const std::size_t m = scope.size();
  if (m < 2) throw ConfigError("run_gba needs a scope of at least two alternatives");
  if (cfg.n0 < 2) throw ConfigError("run_gba needs n0 >= 2");
  if (!prior_prefix.empty() && prior_prefix.size() != m) throw ConfigError("prior prefix size mismatch");
  if (cfg.engine == Engine::rinott) throw ConfigError("run_gba does not run the rinott engine");

  ScopeStats stats(source, scope);
  std::vector<std::int64_t> target(m, 0);
  std::int64_t prior_total = 0;
  if (!prior_prefix.empty()) {
    for (std::size_t t = 0; t < m; ++t) {
      target[t] = prior_prefix[t];
      prior_total += prior_prefix[t];
    }
    stats.extend(target, true);
  }
  for (std::size_t t = 0; t < m; ++t) target[t] = cfg.restart ? stats.prefix(t) + cfg.n0 : std::max(stats.prefix(t), cfg.n0);
  stats.extend(target, true);

  Matrix corr = stats.correlation();
  std::int64_t corr_rows = stats.store().joint_rows();

  const std::int64_t batch = cfg.batch > 0 ? cfg.batch : static_cast<std::int64_t>(2 * m);
  const std::int64_t cap = cfg.stop.hard_cap > 0 ? cfg.stop.hard_cap : static_cast<std::int64_t>(10000 * m);
  std::optional<McPcsEngine> engine;
  if (cfg.method == PcsMethod::monte_carlo && cfg.engine != Engine::cba)
    engine.emplace(m, cfg.draws, rng::derive_seed(cfg.seed, 0x3C));
  std::vector<double> credit(m, 0.0);

  ScopeResult res;
  std::size_t last_tau = static_cast<std::size_t>(-1);
  for (std::int64_t iter = 0;; ++iter) {
    if (cfg.refresh_correlation && stats.store().joint_rows() > corr_rows) {
      corr = stats.correlation();
      corr_rows = stats.store().joint_rows();
    }
    StatsSnapshot snap;
    snap.means = stats.store().means();
    snap.cov = plug_in_cov(corr, stats.store().variances());
    snap.counts = stats.prefixes();

    SelectionResult sel;
    if (cfg.engine == Engine::cba) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < m; ++t)
        if (snap.means[t] > snap.means[best]) best = t;
      sel.tau_star = best;
      sel.best_mean_index = best;
      sel.case_a = true;
      sel.method = PcsMethod::bonferroni;
    } else if (engine) {
      sel = select_pos(snap.means, snap.cov, snap.counts, *engine);
    } else {
      sel = select_pos(snap.means, snap.cov, snap.counts, PcsMethod::bonferroni);
    }
    const auto bound = mopcs_bonferroni(snap.means, snap.cov, snap.counts, sel.tau_star, cfg.stop.iz_delta, false);
    if (cfg.engine == Engine::cba) sel.mopcs = bound.clamped;
    if (last_tau != static_cast<std::size_t>(-1) && sel.tau_star != last_tau) ++res.tau_switches;
    last_tau = sel.tau_star;

    const std::int64_t total = std::accumulate(snap.counts.begin(), snap.counts.end(), std::int64_t{0});
    res.selected = scope[sel.tau_star];
    res.final_bound_raw = bound.raw;
    res.final_mopcs = sel.mopcs;
    res.total_samples = total;
    res.iterations = static_cast<std::size_t>(iter);

    std::int64_t nb = batch;
    bool stop = false;
    if (cfg.stop.mode == StopMode::fixed_precision) {
      if (bound.raw > 1.0 - cfg.stop.alpha) {
        res.success = true;
        stop = true;
      } else if (total >= cap) {
        res.cap_hit = true;
        stop = true;
      } else {
        nb = std::min(nb, cap - total);
      }
    } else {
      if (total >= cfg.stop.budget) stop = true;
      else nb = std::min(nb, cfg.stop.budget - total);
    }

    AllocationPlan plan;
    if (!stop) {
      switch (cfg.engine) {
        case Engine::equal: plan = equal_allocation(m, nb); break;
        case Engine::cba: {
          CbaInputs in;
          in.tau = sel.tau_star;
          in.means = snap.means;
          in.cov = snap.cov;
          in.batch = nb;
          in.gap_floor = cfg.stop.iz_delta;
          for (std::size_t t = 0; t < m; ++t)
            if (t != sel.tau_star) in.omega.push_back(t);
          plan = cba_allocate(in);
          break;
        }
        default: plan = gba_step(snap, sel, nb, cfg.epsilon, &credit, cfg.stop.iz_delta); break;
      }
    }
    if (cfg.keep_trace) {
      TraceRecord rec;
      rec.iteration = iter;
      rec.tau_star = scope[sel.tau_star];
      rec.tag = stop ? (sel.case_a ? AllocCase::a : AllocCase::b) : plan.tag;
      rec.bound = bound.raw;
      rec.cumulative = total;
      res.trace.push_back(rec);
    }
    if (stop) break;

    for (std::size_t t = 0; t < m; ++t) target[t] = stats.prefix(t) + plan.counts[t];
    stats.extend(target, cfg.refresh_correlation);
  }
  res.final_prefix = stats.prefixes();
  res.new_samples = res.total_samples - prior_total;
  return res;
}

nlohmann::json trace_record_to_json(const TraceRecord& r) {
  return {{"iteration", r.iteration},
          {"tau_star", r.tau_star + 1},
          {"case", alloc_case_name(r.tag)},
          {"bound", r.bound},
          {"cumulative", r.cumulative}};
}

}  // namespace p3c
