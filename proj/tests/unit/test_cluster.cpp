#include "doctest.h"

#include "p3c/cluster.hpp"
#include "p3c/error.hpp"
#include "p3c/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace p3c;

namespace {

ProblemSpec blocks(std::vector<std::size_t> sizes, double big_r, double small_r) {
  BlockModelSpec b;
  b.cluster_sizes = std::move(sizes);
  b.intra_corr = big_r;
  b.inter_corr = small_r;
  return build_block_model(b);
}

Matrix exact_corr(const ProblemSpec& spec) {
  Matrix c(spec.p(), spec.p());
  for (std::size_t i = 0; i < spec.p(); ++i)
    for (std::size_t j = 0; j < spec.p(); ++j) c(i, j) = spec.correlation(i, j);
  return c;
}

std::vector<int> truth(const ProblemSpec& spec) { return {spec.partition().begin(), spec.partition().end()}; }

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("AC recovers truth on exact correlations under Assumption 1") {
    std::mt19937_64 eng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 60; ++t) {
      const int k = 2 + t % 6;
      std::vector<std::size_t> sizes;
      for (int c = 0; c < k; ++c) sizes.push_back(1 + eng() % 6);
      const double small_r = 0.4 * u(eng);
      const double big_r = small_r + 0.05 + (0.9 - small_r) * u(eng);
      const auto spec = blocks(sizes, big_r, small_r);
      const auto part = ac_cluster(exact_corr(spec), k);
      CHECK(same_partition(part.labels, truth(spec), k));
    }
  }

  TEST_CASE("ac_cluster labels are canonical and k is respected") {
    const auto spec = blocks({3, 2, 4}, 0.7, 0.1);
    const auto part = ac_cluster(exact_corr(spec), 3);
    CHECK(part.k == 3);
    CHECK(part.labels == canonical_labels(part.labels));
    CHECK_THROWS_AS(ac_cluster(exact_corr(spec), 0), ConfigError);
    CHECK_THROWS_AS(ac_cluster(exact_corr(spec), 10), ConfigError);
  }

  TEST_CASE("size cap skips oversized merges") {
    const auto spec = blocks({6, 2}, 0.7, 0.1);
    const auto part = ac_cluster(exact_corr(spec), 2, 4);
    for (const auto& m : part.members()) CHECK(m.size() <= 4);
  }

  TEST_CASE("prototype selection") {
    Matrix one(1, 1);
    one << 1.0;
    CHECK(select_prototype(one) == 0);

    Matrix hub = Matrix::Constant(4, 4, 0.5);
    hub.diagonal().setOnes();
    for (int j = 1; j < 4; ++j) hub(0, j) = hub(j, 0) = 0.9;
    CHECK(select_prototype(hub) == 0);

    Matrix hub2 = hub;
    std::vector<int> perm{2, 0, 3, 1};  // hub moves to position 1
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) hub2(i, j) = hub(perm[i], perm[j]);
    CHECK(select_prototype(hub2) == 1);

    Matrix ex = Matrix::Constant(5, 5, 0.4);
    ex.diagonal().setOnes();
    CHECK(select_prototype(ex) == 0);
  }

  TEST_CASE("partition comparison is invariant to relabeling") {
    const std::vector<int> a{0, 0, 1, 1, 2};
    const std::vector<int> b{2, 2, 0, 0, 1};
    const std::vector<int> c{0, 1, 1, 1, 2};
    CHECK(same_partition(a, b, 3));
    CHECK_FALSE(same_partition(a, c, 3));
    CHECK(best_label_overlap(a, b, 3) == 5);
    CHECK(best_label_overlap(a, c, 3) == 4);
    CHECK(canonical_labels(b) == a);
  }

  TEST_CASE("occupancy bound") {
    CHECK(occupancy_bound(8, 50) == doctest::Approx(1.0 - 8.0 * std::pow(7.0 / 8.0, 50)));
    CHECK(occupancy_bound(8, 50) == doctest::Approx(0.98992).epsilon(1e-4));
    CHECK(occupancy_bound(1, 3) == doctest::Approx(1.0));
  }

  TEST_CASE("random equal partition sizes differ by at most one") {
    const auto part = random_equal_partition(103, 8, 3);
    std::vector<std::size_t> counts(8, 0);
    for (int l : part.labels) ++counts[static_cast<std::size_t>(l)];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
    CHECK(random_equal_partition(103, 8, 3).labels == part.labels);
  }

  TEST_CASE("AC+ in oracle mode recovers truth when the support covers every cluster") {
    const auto spec = blocks({10, 10, 10, 10}, 0.6, 0.1);
    const SampleSource src(spec, 3);
    AcPlusConfig cfg;
    cfg.k = 4;
    cfg.p_s = 20;
    cfg.oracle = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      cfg.seed = seed;
      const auto r = ac_plus(src, cfg);
      std::set<int> seen;
      for (auto i : r.support) seen.insert(spec.partition()[i]);
      if (seen.size() == 4) CHECK(same_partition(r.partition.labels, truth(spec), 4));
      CHECK(r.support.size() + r.query.size() == spec.p());
    }
  }

  TEST_CASE("AC+ is identical across worker counts") {
    const auto spec = blocks({12, 12, 12}, 0.5, 0.1);
    const SampleSource src(spec, 8);
    AcPlusConfig cfg;
    cfg.k = 3;
    cfg.p_s = 12;
    cfg.n = 40;
    cfg.seed = 5;
    cfg.workers = 1;
    const auto one = ac_plus(src, cfg);
    cfg.workers = 4;
    const auto four = ac_plus(src, cfg);
    CHECK(one.partition.labels == four.partition.labels);
    CHECK(one.prefix == four.prefix);
    CHECK(one.prototype_copy_samples == four.prototype_copy_samples);
  }

  TEST_CASE("PCC bound edge cases") {
    const auto spec = blocks({6}, 0.5, 0.0);
    const auto t = truth(spec);
    PccBoundInputs in;
    in.corr = [&](std::size_t i, std::size_t j) { return spec.correlation(i, j); };
    in.truth = t;
    in.k = 1;
    in.n = 50;
    in.support = {0, 1, 2};
    in.query = {3, 4, 5};
    in.prototypes = {0};
    const auto r = pcc_lower_bound(in);
    CHECK(r.gamma_q == 0);
    CHECK(r.query_term_raw == doctest::Approx(1.0));
    CHECK(r.bound == doctest::Approx(1.0));
    in.n = 3;
    CHECK_THROWS_AS(pcc_lower_bound(in), ConfigError);
  }

  TEST_CASE("PCC bound approaches the occupancy term as n grows") {
    const auto spec = blocks({8, 8, 8}, 0.6, 0.1);
    const auto t = truth(spec);
    PccBoundInputs in;
    in.corr = [&](std::size_t i, std::size_t j) { return spec.correlation(i, j); };
    in.truth = t;
    in.k = 3;
    in.delta_c = 0.3;
    in.support = {0, 1, 8, 9, 16, 17};
    for (std::size_t i = 0; i < 24; ++i)
      if (std::find(in.support.begin(), in.support.end(), i) == in.support.end()) in.query.push_back(i);
    in.prototypes = {0, 8, 16};
    double prev = -1.0;
    for (std::int64_t n : {10, 100, 1000, 100000}) {
      in.n = n;
      const auto r = pcc_lower_bound(in);
      CHECK(r.bound >= prev);
      prev = r.bound;
    }
    CHECK(prev == doctest::Approx(occupancy_bound(3, 6)).epsilon(1e-6));
  }

  TEST_CASE("required clustering samples") {
    const auto spec = blocks({16, 16, 16, 16}, 0.6, 0.1);
    const auto t = truth(spec);
    RequiredSamplesInputs in;
    in.corr = [&](std::size_t i, std::size_t j) { return spec.correlation(i, j); };
    in.truth = t;
    in.k = 4;
    in.delta_c = 0.3;
    in.prototypes = {0, 16, 32, 48};
    for (std::size_t i = 0; i < 64; ++i)
      if (i % 16) in.query.push_back(i);
    const double gq = static_cast<double>(in.query.size() * 3);
    const auto base = required_clustering_samples(0.05 * gq, in);
    CHECK(base.gamma_q == in.query.size() * 3);
    in.delta_c = 0.6;
    const auto wider = required_clustering_samples(0.05 * gq, in);
    CHECK(wider.additional < base.additional);
    in.n0 = 100000;
    CHECK(required_clustering_samples(0.05 * gq, in).additional == 0);
    CHECK_THROWS_AS(required_clustering_samples(gq, in), ConfigError);
  }

  TEST_CASE("random partitions almost never match the truth") {
    const auto spec = blocks({6, 6, 6, 6}, 0.6, 0.1);
    PccMeasureConfig cfg;
    cfg.ac.k = 4;
    cfg.random_partition = true;
    const auto est = measure_pcc(spec, cfg, 200, 3);
    CHECK(est.pcc <= 0.25);
  }

  TEST_CASE("AC+ PCC rises with n on a well separated model") {
    const auto spec = blocks({10, 10, 10}, 0.7, 0.05);
    PccMeasureConfig cfg;
    cfg.ac.k = 3;
    cfg.ac.p_s = 30;
    cfg.ac.n = 10;
    const auto low = measure_pcc(spec, cfg, 100, 2);
    cfg.ac.n = 300;
    const auto high = measure_pcc(spec, cfg, 100, 2);
    CHECK(high.pcc > low.pcc);
    CHECK(high.pcc >= 0.95);
  }

  TEST_CASE("partition JSON round trip") {
    ClusterPartition p;
    p.labels = {0, 1, 0, 2};
    p.k = 3;
    p.prototypes = {0, 1, 3};
    p.source = PartitionSource::ac_plus;
    const auto back = partition_from_json(partition_to_json(p));
    CHECK(back.labels == p.labels);
    CHECK(back.prototypes == p.prototypes);
    CHECK(back.source == p.source);
  }
}
