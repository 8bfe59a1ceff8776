#include "doctest.h"

#include "p3c/error.hpp"
#include "p3c/problem.hpp"
#include "p3c/stats.hpp"

#include <cmath>
#include <vector>

using namespace p3c;

namespace {

FreeWilsonSpec two_by_two() {
  FreeWilsonSpec s;
  s.sites = {{"A", {0.5, 0.1}, {0.2, 0.3}}, {"B", {0.0, 0.4}, {0.05, 0.6}}};
  s.noise_var = 0.01;
  return s;
}

}  // namespace

TEST_SUITE("problem") {
  TEST_CASE("block model has the stated covariance") {
    BlockModelSpec b;
    b.cluster_sizes = {3, 3};
    b.intra_corr = 0.8;
    b.inter_corr = 0.1;
    b.variance = 2.0;
    const auto spec = build_block_model(b);
    REQUIRE(spec.p() == 6);
    CHECK(spec.k() == 2);
    CHECK(spec.covariance(0, 0) == doctest::Approx(2.0));
    CHECK(spec.covariance(0, 2) == doctest::Approx(1.6));
    CHECK(spec.covariance(1, 4) == doctest::Approx(0.2));
    CHECK(spec.correlation(3, 5) == doctest::Approx(0.8));
    CHECK(check_assumption1(spec).holds);
  }

  TEST_CASE("equal intra and inter correlation violates Assumption 1") {
    BlockModelSpec b;
    b.cluster_sizes = {3, 3};
    b.intra_corr = 0.3;
    b.inter_corr = 0.3;
    CHECK_FALSE(check_assumption1(build_block_model(b)).holds);
  }

  TEST_CASE("8 x 128 block model is positive definite") {
    BlockModelSpec b;
    b.cluster_sizes.assign(8, 128);
    b.intra_corr = 0.5;
    b.inter_corr = 0.05;
    const auto spec = build_block_model(b);
    const auto exact = spec.eigenvalue_range();
    CHECK(exact.min > 0.0);
    const auto dense = eigen_range(spec.covariance_matrix());
    CHECK(dense.min == doctest::Approx(exact.min).epsilon(1e-8));
    CHECK(dense.max == doctest::Approx(exact.max).epsilon(1e-8));
  }

  TEST_CASE("non-PSD block model is rejected") {
    BlockModelSpec b;
    b.cluster_sizes = {10, 10};
    b.intra_corr = 0.2;
    b.inter_corr = -0.5;
    CHECK_THROWS_AS(build_block_model(b), ConfigError);
  }

  TEST_CASE("best index breaks ties by lowest index") {
    Matrix s = Matrix::Identity(3, 3);
    const auto spec = build_dense({0.5, 1.0, 1.0}, s);
    CHECK(spec.best_index() == 1);
    CHECK(spec.best_ambiguous());
  }

  TEST_CASE("full Free-Wilson shape has 87120 drugs") {
    const auto fw = random_free_wilson({{"R1", 11}, {"R2", 8}, {"R3", 5}, {"R4", 6}, {"R5", 11}, {"R6", 3}}, 1);
    CHECK(fw.total_count() == 87120);
    const auto spec = build_free_wilson(fw);
    CHECK(spec.p() == 87120);
    CHECK(spec.k() >= 1);
  }

  TEST_CASE("single substituent without noise") {
    FreeWilsonSpec s;
    s.sites = {{"A", {0.7}, {0.4}}};
    s.noise_var = 0.0;
    const auto spec = build_free_wilson(s);
    REQUIRE(spec.p() == 1);
    CHECK(spec.covariance(0, 0) == doctest::Approx(0.4));
    CHECK(spec.mean(0) == doctest::Approx(0.7));
  }

  TEST_CASE("nonpositive atom variance is a construction error") {
    auto s = two_by_two();
    s.sites[1].atom_vars[0] = 0.0;
    CHECK_THROWS_AS(build_free_wilson(s), ConfigError);
  }

  TEST_CASE("Free-Wilson covariance equals the shared-substituent sum") {
    FreeWilsonSpec s;
    s.sites = {{"A", {0.1, 0.2, 0.3}, {0.3, 0.1, 0.2}},
               {"B", {0.0, 0.1}, {0.05, 0.4}},
               {"C", {0.2, 0.1, 0.0, 0.3}, {0.1, 0.2, 0.3, 0.25}},
               {"D", {0.0, 0.5}, {0.15, 0.35}}};
    s.noise_var = 0.02;
    const auto spec = build_free_wilson(s);
    REQUIRE(spec.p() == 48);
    for (std::size_t i = 0; i < spec.p(); ++i) {
      const auto di = free_wilson_digits(s, i);
      double mean = 0.0;
      for (std::size_t site = 0; site < 4; ++site) mean += s.sites[site].atom_means[di[site]];
      CHECK(spec.mean(i) == doctest::Approx(mean));
      for (std::size_t j = 0; j < spec.p(); ++j) {
        const auto dj = free_wilson_digits(s, j);
        double cov = i == j ? s.noise_var : 0.0;
        for (std::size_t site = 0; site < 4; ++site)
          if (di[site] == dj[site]) cov += s.sites[site].atom_vars[di[site]];
        CHECK(spec.covariance(i, j) == doctest::Approx(cov));
      }
    }
  }

  TEST_CASE("digits enumerate with the last site fastest") {
    const auto s = two_by_two();
    CHECK(free_wilson_digits(s, 0) == std::vector<std::size_t>{0, 0});
    CHECK(free_wilson_digits(s, 1) == std::vector<std::size_t>{0, 1});
    CHECK(free_wilson_digits(s, 2) == std::vector<std::size_t>{1, 0});
  }

  TEST_CASE("simulated Free-Wilson covariance matches the analytic value") {
    const auto s = two_by_two();
    const auto spec = build_free_wilson(s);
    const std::size_t n = 200000;
    const Matrix data = simulate(spec, n, 3);
    const Matrix cov = sample_covariance(data);
    // Drugs 0 = (A0, B0) and 1 = (A0, B1) share substituent A0 only.
    CHECK(spec.covariance(0, 1) == doctest::Approx(0.2));
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double truth = spec.covariance(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        const double sd = std::sqrt((spec.variance(i) * spec.variance(j) + truth * truth) / n);
        CHECK(std::abs(cov(i, j) - truth) < 5.0 * sd);
      }
      CHECK(data.col(i).mean() == doctest::Approx(spec.mean(static_cast<std::size_t>(i))).epsilon(0.01));
    }
  }

  TEST_CASE("illustrative fixture correlation") {
    const auto spec = illustrative_fixture(0.05, 0.02);
    CHECK(spec.covariance(0, 1) == doctest::Approx(0.05));
    CHECK(spec.covariance(4, 2) == doctest::Approx(0.02));
    CHECK(spec.covariance(1, 2) == doctest::Approx(0.01));
    const Matrix data = simulate(spec, 100000, 5);
    const Matrix corr = correlation_from_covariance(sample_covariance(data));
    CHECK(std::abs(corr(0, 1) - 0.5) < 0.02);
  }

  TEST_CASE("sample source replays replications by index") {
    BlockModelSpec b;
    b.cluster_sizes = {4, 3};
    b.intra_corr = 0.6;
    b.inter_corr = 0.1;
    const auto spec = build_block_model(b);
    const SampleSource a(spec, 11), again(spec, 11), other(spec, 12);
    std::vector<double> row(spec.p());
    for (std::uint64_t m : {0ull, 5ull, 123456ull}) {
      a.observe_row(m, row);
      for (std::size_t i = 0; i < spec.p(); ++i) {
        CHECK(a.observe(i, m) == row[i]);
        CHECK(again.observe(i, m) == row[i]);
      }
      CHECK(other.observe(0, m) != row[0]);
      const std::vector<std::size_t> some{6, 2};
      std::vector<double> out(2);
      a.observe_many(some, m, out);
      CHECK(out[0] == row[6]);
      CHECK(out[1] == row[2]);
    }
  }

  TEST_CASE("simulate rows equal the sample source") {
    const auto spec = illustrative_fixture(0.02, 0.0);
    const Matrix data = simulate(spec, 10, 9);
    const SampleSource src(spec, 9);
    for (Eigen::Index m = 0; m < 10; ++m)
      for (Eigen::Index i = 0; i < 5; ++i)
        CHECK(data(m, i) == src.observe(static_cast<std::size_t>(i), static_cast<std::uint64_t>(m)));
  }

  TEST_CASE("problem JSON round trip") {
    BlockModelSpec b;
    b.cluster_sizes = {2, 3};
    b.intra_corr = 0.7;
    b.inter_corr = 0.2;
    b.local_best_mean = 2.0;
    b.best_bonus = 0.5;
    const auto spec = build_block_model(b);
    const auto back = problem_from_json(problem_to_json(spec));
    REQUIRE(back.p() == spec.p());
    for (std::size_t i = 0; i < spec.p(); ++i) {
      CHECK(back.mean(i) == spec.mean(i));
      for (std::size_t j = 0; j < spec.p(); ++j) CHECK(back.covariance(i, j) == doctest::Approx(spec.covariance(i, j)));
    }
    CHECK(std::vector<int>(back.partition().begin(), back.partition().end()) ==
          std::vector<int>(spec.partition().begin(), spec.partition().end()));
  }

  TEST_CASE("unknown model name is a config error") {
    CHECK_THROWS_AS(problem_from_json({{"model", "nope"}}), ConfigError);
  }
}
