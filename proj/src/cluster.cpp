#include "p3c/cluster.hpp"

#include "p3c/error.hpp"
#include "p3c/rng.hpp"
#include "p3c/simd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace p3c {

const char* partition_source_name(PartitionSource s) {
  switch (s) {
    case PartitionSource::ac:
      return "ac";
    case PartitionSource::ac_plus:
      return "ac_plus";
    case PartitionSource::truth:
      return "truth";
    case PartitionSource::random:
      return "random";
  }
  return "unknown";
}

std::vector<std::vector<std::size_t>> ClusterPartition::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

std::vector<int> canonical_labels(std::span<const int> labels, std::vector<int>* old_to_new) {
  int top = -1;
  for (int g : labels) top = std::max(top, g);
  std::vector<int> map(static_cast<std::size_t>(top + 1), -1);
  std::vector<int> out(labels.size());
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int& m = map[static_cast<std::size_t>(labels[i])];
    if (m < 0) m = next++;
    out[i] = m;
  }
  if (old_to_new) *old_to_new = map;
  return out;
}

nlohmann::json partition_to_json(const ClusterPartition& part) {
  return {{"k", part.k},
          {"labels", part.labels},
          {"prototypes", part.prototypes},
          {"provenance", partition_source_name(part.source)}};
}

ClusterPartition partition_from_json(const nlohmann::json& doc) {
  ClusterPartition part;
  part.k = doc.at("k").get<int>();
  part.labels = doc.at("labels").get<std::vector<int>>();
  part.prototypes = doc.value("prototypes", std::vector<std::size_t>{});
  const std::string src = doc.value("provenance", std::string("truth"));
  if (src == "ac") {
    part.source = PartitionSource::ac;
  } else if (src == "ac_plus") {
    part.source = PartitionSource::ac_plus;
  } else if (src == "random") {
    part.source = PartitionSource::random;
  } else {
    part.source = PartitionSource::truth;
  }
  return part;
}

// ---------------------------------------------------------------- AC

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent, size;
  explicit DisjointSets(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void join(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);  // smaller index stays root
    parent[b] = a;
    size[a] += size[b];
  }
};

}  // namespace

ClusterPartition ac_cluster(const Matrix& corr, int k, std::optional<std::size_t> size_cap) {
  const auto p = static_cast<std::size_t>(corr.rows());
  if (k < 1 || static_cast<std::size_t>(k) > p) throw ConfigError("ac_cluster: need 1 <= k <= p");
  if (size_cap && *size_cap * static_cast<std::size_t>(k) < p) {
    throw ConfigError("ac_cluster: size cap infeasible for k groups");
  }
  struct Pair {
    double r;
    std::uint32_t i, j;
  };
  std::vector<Pair> pairs;
  pairs.reserve(p * (p - 1) / 2);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      pairs.push_back({corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(j)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.r != b.r) return a.r > b.r;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  DisjointSets sets(p);
  std::size_t groups = p;
  for (const Pair& e : pairs) {
    if (groups == static_cast<std::size_t>(k)) break;
    const std::size_t a = sets.find(e.i);
    const std::size_t b = sets.find(e.j);
    if (a == b) continue;
    if (size_cap && sets.size[a] + sets.size[b] > *size_cap) continue;
    sets.join(a, b);
    --groups;
  }
  if (groups != static_cast<std::size_t>(k)) throw ConfigError("ac_cluster: size cap prevents reaching k groups");

  std::vector<int> raw(p);
  for (std::size_t i = 0; i < p; ++i) raw[i] = static_cast<int>(sets.find(i));
  ClusterPartition part;
  part.labels = canonical_labels(raw);
  part.k = k;
  part.source = PartitionSource::ac;
  return part;
}

std::size_t select_prototype(const Matrix& corr_sub) {
  const auto m = corr_sub.rows();
  if (m < 1) throw ConfigError("select_prototype: empty cluster");
  if (m == 1) return 0;
  Vector v = Vector::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  double lambda = v.dot(corr_sub * v);
  bool converged = false;
  for (int it = 0; it < 100000; ++it) {
    Vector w = corr_sub * v;
    const double norm = w.norm();
    if (norm == 0.0) throw ConvergenceError("select_prototype: zero matrix");
    v = w / norm;
    const double next = v.dot(corr_sub * v);
    const double change = std::abs(next - lambda);
    lambda = next;
    if (change <= 1e-10 * std::abs(lambda) && it >= 2) {
      converged = true;
      break;
    }
  }
  if (!converged) throw ConvergenceError("select_prototype: power iteration did not converge");
  if (v.sum() < 0.0) v = -v;
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < m; ++i) {
    if (v[i] > v[static_cast<Eigen::Index>(best)] + 1e-9) best = static_cast<std::size_t>(i);
  }
  return best;
}

std::size_t best_label_overlap(std::span<const int> a, std::span<const int> b, int k) {
  if (a.size() != b.size()) throw ConfigError("best_label_overlap: size mismatch");
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::size_t> conf(kk * kk, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= k || b[i] < 0 || b[i] >= k) return 0;
    ++conf[static_cast<std::size_t>(a[i]) * kk + static_cast<std::size_t>(b[i])];
  }
  if (k <= 8) {
    std::vector<std::size_t> perm(kk);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
      std::size_t s = 0;
      for (std::size_t r = 0; r < kk; ++r) s += conf[r * kk + perm[r]];
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> row_used(kk, false), col_used(kk, false);
  std::size_t total = 0;
  for (std::size_t step = 0; step < kk; ++step) {
    std::size_t br = 0, bc = 0;
    long best = -1;
    for (std::size_t r = 0; r < kk; ++r) {
      if (row_used[r]) continue;
      for (std::size_t c = 0; c < kk; ++c) {
        if (col_used[c]) continue;
        if (static_cast<long>(conf[r * kk + c]) > best) {
          best = static_cast<long>(conf[r * kk + c]);
          br = r;
          bc = c;
        }
      }
    }
    row_used[br] = col_used[bc] = true;
    total += static_cast<std::size_t>(best);
  }
  return total;
}

bool same_partition(std::span<const int> a, std::span<const int> b, int k) {
  return best_label_overlap(a, b, k) == a.size();
}

ClusterPartition random_equal_partition(std::size_t p, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > p) throw ConfigError("random partition: need 1 <= k <= p");
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 eng(seed);
  rng::shuffle(std::span<std::size_t>(order), eng);
  std::vector<int> raw(p);
  for (std::size_t pos = 0; pos < p; ++pos) raw[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  ClusterPartition part;
  part.labels = canonical_labels(raw);
  part.k = k;
  part.source = PartitionSource::random;
  return part;
}

double occupancy_bound(int k, std::size_t p_s) {
  const double kk = static_cast<double>(k);
  return 1.0 - kk * std::pow(1.0 - 1.0 / kk, static_cast<double>(p_s));
}

// ---------------------------------------------------------------- AC+

namespace {

double pearson(const double* xc, double xnorm, const double* yc, double ynorm, std::size_t n) {
  if (xnorm == 0.0 || ynorm == 0.0) return 0.0;
  return std::clamp(simd::kernels().dot(xc, yc, n) / (xnorm * ynorm), -1.0, 1.0);
}

double center(std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (double& v : x) v -= mean;
  return std::sqrt(simd::kernels().dot(x.data(), x.data(), x.size()));
}

}  // namespace

AcPlusResult ac_plus(const SampleSource& source, const AcPlusConfig& cfg,
                     std::span<const std::int64_t> existing_prefix) {
  const ProblemSpec& spec = source.spec();
  const std::size_t p = spec.p();
  if (cfg.k < 1 || cfg.p_s < static_cast<std::size_t>(cfg.k) || cfg.p_s > p) {
    throw ConfigError("ac_plus: need k <= p_s <= p");
  }
  if (!cfg.oracle && cfg.n < 4) throw ConfigError("ac_plus: clustering needs n >= 4");
  if (!existing_prefix.empty() && existing_prefix.size() != p) throw ConfigError("ac_plus: prefix size mismatch");

  AcPlusResult out;
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 eng(rng::derive_seed(cfg.seed, 0x5B17));
  rng::shuffle(std::span<std::size_t>(order), eng);
  out.support.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.p_s));
  out.query.assign(order.begin() + static_cast<std::ptrdiff_t>(cfg.p_s), order.end());
  std::sort(out.support.begin(), out.support.end());
  std::sort(out.query.begin(), out.query.end());
  const std::size_t ps = out.support.size();

  // Support-set correlation.
  if (cfg.oracle) {
    out.support_corr.resize(static_cast<Eigen::Index>(ps), static_cast<Eigen::Index>(ps));
    for (std::size_t a = 0; a < ps; ++a) {
      for (std::size_t b = 0; b < ps; ++b) {
        out.support_corr(a, b) = a == b ? 1.0 : spec.correlation(out.support[a], out.support[b]);
      }
    }
  } else {
    Matrix data(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(ps));
    std::vector<double> row(ps);
    for (std::size_t m = 0; m < cfg.n; ++m) {
      source.observe_many(out.support, m, row);
      for (std::size_t a = 0; a < ps; ++a) data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(a)) = row[a];
    }
    const Matrix s = sample_covariance(data);
    const Matrix cov = cfg.estimator == CovMethod::sample ? s : shrink_covariance(s, static_cast<std::int64_t>(cfg.n)).matrix;
    out.support_corr = correlation_from_covariance(cov);
  }

  const ClusterPartition local = ac_cluster(out.support_corr, cfg.k);
  const auto groups = local.members();
  std::vector<std::size_t> protos(static_cast<std::size_t>(cfg.k));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& mem = groups[g];
    Matrix sub(static_cast<Eigen::Index>(mem.size()), static_cast<Eigen::Index>(mem.size()));
    for (std::size_t a = 0; a < mem.size(); ++a) {
      for (std::size_t b = 0; b < mem.size(); ++b) sub(a, b) = out.support_corr(mem[a], mem[b]);
    }
    protos[g] = out.support[mem[select_prototype(sub)]];
  }

  // Query matching.
  std::uint64_t offset = 0;
  if (cfg.fresh_queries && !existing_prefix.empty()) {
    for (std::size_t j : out.query) offset = std::max<std::uint64_t>(offset, existing_prefix[j]);
  }
  const std::size_t kk = protos.size();
  const std::size_t nq = out.query.size();
  out.query_corr.resize(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(kk));
  std::vector<int> query_label(nq, 0);

  std::vector<std::vector<double>> proto_data(kk);
  std::vector<double> proto_norm(kk, 0.0);
  if (!cfg.oracle) {
    for (std::size_t g = 0; g < kk; ++g) {
      proto_data[g].resize(cfg.n);
      for (std::size_t m = 0; m < cfg.n; ++m) proto_data[g][m] = source.observe(protos[g], offset + m);
      proto_norm[g] = center(proto_data[g]);
    }
  }

  auto match_range = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> x(cfg.n);
    for (std::size_t q = lo; q < hi; ++q) {
      const std::size_t j = out.query[q];
      double xnorm = 0.0;
      if (!cfg.oracle) {
        for (std::size_t m = 0; m < cfg.n; ++m) x[m] = source.observe(j, offset + m);
        xnorm = center(x);
      }
      std::size_t best = 0;
      double best_r = -2.0;
      for (std::size_t g = 0; g < kk; ++g) {
        const double r = cfg.oracle ? spec.correlation(protos[g], j)
                                    : pearson(x.data(), xnorm, proto_data[g].data(), proto_norm[g], cfg.n);
        out.query_corr(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(g)) = r;
        if (r > best_r) {
          best_r = r;
          best = g;
        }
      }
      query_label[q] = static_cast<int>(best);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, nq));
  if (workers <= 1) {
    match_range(0, nq);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(match_range, nq * w / workers, nq * (w + 1) / workers);
    }
    for (auto& t : pool) t.join();
  }

  std::vector<int> raw(p, 0);
  for (std::size_t a = 0; a < ps; ++a) raw[out.support[a]] = local.labels[a];
  for (std::size_t q = 0; q < nq; ++q) raw[out.query[q]] = query_label[q];
  std::vector<int> remap;
  out.partition.labels = canonical_labels(raw, &remap);
  out.partition.k = cfg.k;
  out.partition.source = PartitionSource::ac_plus;
  out.partition.prototypes.assign(kk, 0);
  for (std::size_t g = 0; g < kk; ++g) out.partition.prototypes[static_cast<std::size_t>(remap[g])] = protos[g];
  Matrix qc = out.query_corr;
  for (std::size_t g = 0; g < kk; ++g) out.query_corr.col(remap[g]) = qc.col(static_cast<Eigen::Index>(g));

  out.prefix.assign(p, 0);
  for (std::size_t i = 0; i < p; ++i) out.prefix[i] = existing_prefix.empty() ? 0 : existing_prefix[i];
  if (!cfg.oracle) {
    for (std::size_t i : out.support) out.prefix[i] = std::max<std::int64_t>(out.prefix[i], static_cast<std::int64_t>(cfg.n));
    for (std::size_t j : out.query) {
      out.prefix[j] = std::max<std::int64_t>(out.prefix[j], static_cast<std::int64_t>(offset + cfg.n));
    }
    if (cfg.fresh_queries) {
      out.prototype_copy_samples = static_cast<std::int64_t>(kk * nq * cfg.n);
    }
  }
  return out;
}

// ---------------------------------------------------------------- PCC bound

namespace {

double safe_r(double r) { return std::clamp(r, -1.0 + 1e-12, 1.0 - 1e-12); }

double comparison_term(double delta_c, double r_ab, double r_ac, double r_bc, std::int64_t n) {
  const double var = meng_variance(safe_r(r_ab), safe_r(r_ac), safe_r(r_bc), n);
  return normal_cdf(delta_c / std::sqrt(var));
}

}  // namespace

PccReport pcc_lower_bound(const PccBoundInputs& in) {
  if (in.n <= 3) throw ConfigError("pcc_lower_bound: n must exceed 3");
  if (!(in.delta_c > 0.0)) throw ConfigError("pcc_lower_bound: delta_c must be positive");
  PccReport rep;
  rep.delta_c = in.delta_c;
  rep.n = in.n;
  rep.occupancy = std::max(0.0, occupancy_bound(in.k, in.support.size()));

  // Gamma_s: (ab, ac) with a, b, c in the support, G(a) = G(b), G(a) != G(c).
  double sum_s = 0.0;
  std::size_t count_s = 0;
  for (std::size_t a : in.support) {
    for (std::size_t b : in.support) {
      if (b == a || in.truth[b] != in.truth[a]) continue;
      const double r_ab = in.corr(a, b);
      for (std::size_t c : in.support) {
        if (in.truth[c] == in.truth[a]) continue;
        sum_s += comparison_term(in.delta_c, r_ab, in.corr(a, c), in.corr(b, c), in.n);
        ++count_s;
      }
    }
  }
  rep.gamma_s = count_s;
  rep.support_term_raw = count_s ? sum_s - (static_cast<double>(count_s) - 1.0) : 1.0;

  // Gamma_q: (a tau_i, a tau_j) for query a with G(a) = i and every j != i.
  double sum_q = 0.0;
  std::size_t count_q = 0;
  if (in.k > 1) {
    if (in.prototypes.size() != static_cast<std::size_t>(in.k)) {
      throw ConfigError("pcc_lower_bound: need one prototype per true cluster");
    }
    for (std::size_t a : in.query) {
      const auto i = static_cast<std::size_t>(in.truth[a]);
      const std::size_t b = in.prototypes[i];
      const double r_ab = in.corr(a, b);
      for (std::size_t j = 0; j < in.prototypes.size(); ++j) {
        if (j == i) continue;
        const std::size_t c = in.prototypes[j];
        sum_q += comparison_term(in.delta_c, r_ab, in.corr(a, c), in.corr(b, c), in.n);
        ++count_q;
      }
    }
  }
  rep.gamma_q = count_q;
  rep.query_term_raw = count_q ? sum_q - (static_cast<double>(count_q) - 1.0) : 1.0;

  rep.ac_bound = std::clamp(rep.support_term_raw, 0.0, 1.0);
  rep.bound = rep.occupancy * rep.ac_bound * std::clamp(rep.query_term_raw, 0.0, 1.0);

  if (in.support.size() <= 200) {
    // Gamma'_s: (ab, cd) with G(a) = G(b) and c, d in two other distinct
    // clusters; each element contributes the same independent-comparison term.
    std::vector<std::size_t> sizes(static_cast<std::size_t>(in.k), 0);
    for (std::size_t a : in.support) ++sizes[static_cast<std::size_t>(in.truth[a])];
    const std::size_t total = in.support.size();
    std::size_t count = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      const std::size_t intra = sizes[g] * (sizes[g] - (sizes[g] ? 1 : 0)) / 2;
      const std::size_t rest = total - sizes[g];
      std::size_t same_other = 0;
      for (std::size_t h = 0; h < sizes.size(); ++h) {
        if (h != g && sizes[h] > 1) same_other += sizes[h] * (sizes[h] - 1) / 2;
      }
      const std::size_t rest_pairs = rest * (rest - (rest ? 1 : 0)) / 2;
      count += intra * (rest_pairs - same_other);
    }
    rep.gamma_prime_s = count;
    const double term = normal_cdf(in.delta_c / std::sqrt(2.0 / static_cast<double>(in.n - 3)));
    const double prime_raw = count ? static_cast<double>(count) * term - (static_cast<double>(count) - 1.0) : 1.0;
    rep.ac_unequal_bound = std::clamp(rep.support_term_raw + prime_raw - 1.0, 0.0, 1.0);
  }
  return rep;
}

RequiredSamples required_clustering_samples(double alpha_q, const RequiredSamplesInputs& in) {
  if (!(in.delta_c > 0.0)) throw ConfigError("required_clustering_samples: delta_c must be positive");
  if (in.prototypes.size() != static_cast<std::size_t>(in.k)) {
    throw ConfigError("required_clustering_samples: need one prototype per true cluster");
  }
  RequiredSamples out;
  for (std::size_t a : in.query) {
    const auto i = static_cast<std::size_t>(in.truth[a]);
    const std::size_t b = in.prototypes[i];
    for (std::size_t j = 0; j < in.prototypes.size(); ++j) {
      if (j == i) continue;
      const std::size_t c = in.prototypes[j];
      // n cancels in (1 - r_bc) h; any n > 3 gives the same h.
      const MengTerms t = meng_terms(safe_r(in.corr(a, b)), safe_r(in.corr(a, c)), safe_r(in.corr(b, c)), 4);
      out.max_term = std::max(out.max_term, (1.0 - safe_r(in.corr(b, c))) * t.h);
      ++out.gamma_q;
    }
  }
  const double g = static_cast<double>(out.gamma_q);
  if (out.gamma_q == 0) return out;
  if (!(alpha_q > 0.0 && alpha_q < g)) throw ConfigError("required_clustering_samples: need 0 < alpha_q < |Gamma_q|");
  out.quantile = normal_quantile((g - alpha_q) / g);
  const double n = 2.0 * out.quantile * out.quantile / (in.delta_c * in.delta_c) * out.max_term + 3.0 -
                   static_cast<double>(in.n0);
  out.additional = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(n)));
  return out;
}

// ---------------------------------------------------------------- measurement

PccEstimate measure_pcc(const ProblemSpec& spec, const PccMeasureConfig& cfg, std::size_t reps, std::uint64_t seed,
                        bool keep_partitions) {
  if (reps == 0) throw ConfigError("measure_pcc: reps must be >= 1");
  PccEstimate est;
  est.reps = reps;
  std::size_t hits = 0, occupied = 0;
  const auto truth = spec.partition();
  for (std::size_t r = 0; r < reps; ++r) {
    const std::uint64_t rep_seed = rng::derive_seed(seed, r);
    ClusterPartition part;
    bool all_present = true;
    if (cfg.random_partition) {
      std::mt19937_64 eng(rep_seed);
      part.k = cfg.ac.k;
      part.labels.resize(spec.p());
      for (int& g : part.labels) g = static_cast<int>(rng::uniform_index(eng, static_cast<std::uint64_t>(cfg.ac.k)));
      part.source = PartitionSource::random;
    } else {
      const SampleSource source(spec, rng::derive_seed(rep_seed, 1));
      AcPlusConfig ac = cfg.ac;
      ac.seed = rng::derive_seed(rep_seed, 2);
      AcPlusResult res = ac_plus(source, ac);
      std::vector<bool> seen(static_cast<std::size_t>(spec.k()), false);
      for (std::size_t i : res.support) seen[static_cast<std::size_t>(truth[i])] = true;
      all_present = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
      if (keep_partitions) est.supports.push_back(res.support);
      part = std::move(res.partition);
    }
    const bool ok = part.k == spec.k() && same_partition(part.labels, truth, spec.k());
    hits += ok;
    occupied += all_present;
    est.correct.push_back(ok);
    if (keep_partitions) est.partitions.push_back(std::move(part));
  }
  const double n = static_cast<double>(reps);
  est.pcc = static_cast<double>(hits) / n;
  est.se = std::sqrt(est.pcc * (1.0 - est.pcc) / n);
  est.ci_low = std::max(0.0, est.pcc - 1.96 * est.se);
  est.ci_high = std::min(1.0, est.pcc + 1.96 * est.se);
  est.occupancy_rate = static_cast<double>(occupied) / n;
  return est;
}

}  // namespace p3c
