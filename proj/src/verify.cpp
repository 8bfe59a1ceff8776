#include "p3c/verify.hpp"

#include "p3c/error.hpp"
#include "p3c/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace p3c {

FixtureEval evaluate_fixture(const FixtureRow& row, std::size_t draws, std::uint64_t seed) {
  const ProblemSpec spec = illustrative_fixture(row.x, row.y, row.mu1);
  const Matrix cov = spec.covariance_matrix();
  const std::vector<double> mu(spec.mu().begin(), spec.mu().end());
  FixtureEval out;
  out.row = row;
  out.pcs = pcs_monte_carlo_all(mu, cov, row.counts, draws, seed);
  std::vector<double> p, se;
  for (const auto& e : out.pcs) {
    p.push_back(e.p);
    se.push_back(e.se);
  }
  out.selection = selection_from_values(mu, p, se, PcsMethod::monte_carlo);
  return out;
}

std::vector<SignProbe> sign_probes(std::size_t draws, std::uint64_t seed, double x, double y, double h) {
  const std::vector<std::int64_t> counts(5, 10);
  auto params = [&](double xv, double yv) {
    const ProblemSpec spec = illustrative_fixture(xv, yv);
    PcsParams prm;
    prm.means.assign(spec.mu().begin(), spec.mu().end());
    prm.cov = spec.covariance_matrix();
    prm.counts = counts;
    return prm;
  };
  struct Def {
    const char* name;
    std::size_t tau;
    bool wrt_x;
    int expected;
  };
  const Def defs[] = {{"dPCS(1)/dx > 0", 0, true, 1},
                      {"dPCS(5)/dx < 0", 4, true, -1},
                      {"dPCS(1)/dy > 0", 0, false, 1},
                      {"dPCS(5)/dy < 0", 4, false, -1}};
  std::vector<SignProbe> out;
  for (const auto& d : defs) {
    SignProbe sp;
    sp.name = d.name;
    sp.tau = d.tau;
    sp.wrt_x = d.wrt_x;
    sp.expected = d.expected;
    const double theta = d.wrt_x ? x : y;
    sp.fd = fd_probe(
        d.tau, [&](double t) { return d.wrt_x ? params(t, y) : params(x, t); }, theta, h, draws, seed);
    sp.pass = static_cast<double>(d.expected) * sp.fd.derivative >= 3.0 * sp.fd.se;
    out.push_back(sp);
  }
  return out;
}

PccPoint pcc_point(const ProblemSpec& spec, std::size_t p_s, std::size_t n, std::size_t reps, std::uint64_t seed,
                   double delta_c, CovMethod estimator) {
  PccPoint pt;
  pt.p_s = p_s;
  pt.n = n;
  PccMeasureConfig mc;
  mc.ac.k = spec.k();
  mc.ac.p_s = p_s;
  mc.ac.n = n;
  mc.ac.estimator = estimator;
  pt.empirical = measure_pcc(spec, mc, reps, seed, true);
  pt.occupancy = occupancy_bound(spec.k(), p_s);

  const auto truth = spec.partition();
  const auto k = static_cast<std::size_t>(spec.k());
  double sum = 0.0;
  for (const auto& support : pt.empirical.supports) {
    std::vector<std::vector<std::size_t>> per(k);
    for (std::size_t i : support) per[static_cast<std::size_t>(truth[i])].push_back(i);
    if (std::any_of(per.begin(), per.end(), [](const auto& v) { return v.empty(); })) continue;
    PccBoundInputs in;
    in.corr = [&spec](std::size_t a, std::size_t b) { return spec.correlation(a, b); };
    in.truth = truth;
    in.k = spec.k();
    in.delta_c = delta_c;
    in.n = static_cast<std::int64_t>(n);
    in.support = support;
    std::vector<bool> in_support(spec.p(), false);
    for (std::size_t i : support) in_support[i] = true;
    for (std::size_t i = 0; i < spec.p(); ++i)
      if (!in_support[i]) in.query.push_back(i);
    for (const auto& mem : per) {
      Matrix sub(static_cast<Eigen::Index>(mem.size()), static_cast<Eigen::Index>(mem.size()));
      for (std::size_t a = 0; a < mem.size(); ++a)
        for (std::size_t b = 0; b < mem.size(); ++b)
          sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = a == b ? 1.0 : spec.correlation(mem[a], mem[b]);
      in.prototypes.push_back(mem[select_prototype(sub)]);
    }
    const PccReport rep = pcc_lower_bound(in);
    sum += rep.bound;
    pt.bound_max = pt.bound_reps == 0 ? rep.bound : std::max(pt.bound_max, rep.bound);
    ++pt.bound_reps;
  }
  pt.bound_mean = pt.bound_reps ? sum / static_cast<double>(pt.bound_reps) : 0.0;
  return pt;
}

namespace {

std::string fixed(double v, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

}  // namespace

std::vector<CheckLine> run_verify_suite(const std::string& suite, std::size_t draws, std::uint64_t seed,
                                        const PccSweepConfig& pcc, const nlohmann::json* problem) {
  std::vector<CheckLine> lines;
  if (suite == "signs") {
    for (const auto& sp : sign_probes(draws, seed)) {
      lines.push_back({sp.name, sp.pass,
                       "derivative=" + fixed(sp.fd.derivative) + " se=" + fixed(sp.fd.se, 5)});
    }
  } else if (suite == "pos-preference") {
    for (const auto& row : table2_rows()) {
      const auto ev = evaluate_fixture(row, draws, seed);
      const std::size_t want = row.mu1 > 2.05 ? 0 : 1;
      const bool ok = ev.selection.tau_star == want && ev.selection.mopcs >= ev.selection.pcs_trad;
      lines.push_back({"P-OS " + row.label, ok,
                       "tau*=" + std::to_string(ev.selection.tau_star + 1) + " moPCS=" + fixed(ev.selection.mopcs) +
                           " PCS_trad=" + fixed(ev.selection.pcs_trad)});
    }
  } else if (suite == "negative-n1") {
    double prev = 2.0;
    bool ok = true;
    std::string detail;
    for (const auto& row : table2_rows()) {
      if (row.mu1 > 2.05) continue;
      const auto ev = evaluate_fixture(row, draws, seed);
      ok = ok && ev.selection.mopcs < prev;
      prev = ev.selection.mopcs;
      detail += (detail.empty() ? "" : " ") + fixed(ev.selection.mopcs);
    }
    lines.push_back({"moPCS decreasing in N1", ok, detail});
  } else if (suite == "pcc-bounds") {
    ProblemSpec spec;
    if (problem) {
      spec = problem_from_json(*problem);
    } else {
      BlockModelSpec b;
      b.cluster_sizes.assign(4, 64);
      b.intra_corr = 0.5;
      b.inter_corr = 0.05;
      spec = build_block_model(b);
    }
    for (std::size_t ps : pcc.p_s) {
      for (std::size_t n : pcc.n) {
        const auto pt = pcc_point(spec, std::min(ps, spec.p()), n, pcc.reps, seed, pcc.delta_c, pcc.estimator);
        const bool ok = pt.bound_max <= pt.empirical.pcc + 3.0 * pt.empirical.se;
        lines.push_back({"bound <= PCC (p_s=" + std::to_string(ps) + ", n=" + std::to_string(n) + ")", ok,
                         "pcc=" + fixed(pt.empirical.pcc) + " bound=" + fixed(pt.bound_max) +
                             " occupancy=" + fixed(pt.occupancy)});
      }
    }
  } else {
    throw ConfigError("unknown verify suite '" + suite + "'");
  }
  return lines;
}

}  // namespace p3c
