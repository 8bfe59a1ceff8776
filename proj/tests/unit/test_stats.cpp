#include "doctest.h"

#include "p3c/error.hpp"
#include "p3c/problem.hpp"
#include "p3c/stats.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace p3c;

TEST_SUITE("stats") {
  TEST_CASE("running moments match a two-pass computation") {
    std::mt19937_64 eng(1);
    std::normal_distribution<double> z(3.0, 2.0);
    SampleStore s(2, false);
    std::vector<double> xs;
    for (int i = 0; i < 1000; ++i) {
      xs.push_back(z(eng));
      s.observe(0, xs.back());
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() - 1;
    CHECK(s.count(0) == 1000);
    CHECK(s.count(1) == 0);
    CHECK(s.mean(0) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.variance(0) == doctest::Approx(var).epsilon(1e-12));
  }

  TEST_CASE("merge equals a single store over all rows") {
    const auto spec = illustrative_fixture(0.03, 0.02);
    const Matrix data = simulate(spec, 300, 4);
    SampleStore all(5), a(5), b(5);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const Eigen::VectorXd v = data.row(r).transpose();
      std::vector<double> rv(v.data(), v.data() + 5);
      all.observe_row(rv);
      (r < 120 ? a : b).observe_row(rv);
    }
    a.merge(b);
    CHECK(a.joint_rows() == all.joint_rows());
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(a.mean(i) == doctest::Approx(all.mean(i)).epsilon(1e-12));
      CHECK(a.variance(i) == doctest::Approx(all.variance(i)).epsilon(1e-10));
    }
    CHECK((a.joint_comoment() - all.joint_comoment()).norm() < 1e-9 * all.joint_comoment().norm());
  }

  TEST_CASE("sample covariance of full rows matches the data-matrix form") {
    const auto spec = illustrative_fixture(0.05, 0.04);
    const Matrix data = simulate(spec, 500, 8);
    SampleStore s(5);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const Eigen::VectorXd v = data.row(r).transpose();
      s.observe_row(std::vector<double>(v.data(), v.data() + 5));
    }
    const auto est = sample_covariance(s);
    CHECK((est.matrix - sample_covariance(data)).norm() < 1e-10);
  }

  TEST_CASE("mean covariance divides by the larger count") {
    SampleStore s(2, false);
    for (int i = 0; i < 10; ++i) s.observe(0, i);
    for (int i = 0; i < 4; ++i) s.observe(1, i);
    CHECK(s.mean_covariance(0, 1, 2.0) == doctest::Approx(0.2));
  }

  TEST_CASE("partial observations do not enter joint moments") {
    SampleStore s(3);
    s.observe(0, 1.0);
    s.observe(1, 2.0);
    CHECK(s.joint_rows() == 0);
    s.observe_row(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(s.joint_rows() == 1);
    CHECK(s.count(0) == 2);
    CHECK(s.count(2) == 1);
  }

  TEST_CASE("shrinkage output is symmetric PSD with nonnegative eigenvalues") {
    BlockModelSpec b;
    b.cluster_sizes = {10, 10, 10};
    b.intra_corr = 0.6;
    b.inter_corr = 0.1;
    const auto spec = build_block_model(b);
    for (std::size_t n : {20, 200}) {
      const Matrix data = simulate(spec, n, 2);
      const auto est = shrink_covariance(sample_covariance(data), static_cast<std::int64_t>(n));
      CHECK(est.p_exceeds_n == (n < 30));
      CHECK(is_psd(est.matrix));
      CHECK((est.matrix - est.matrix.transpose()).norm() < 1e-12);
      CHECK(est.eigenvalues.minCoeff() >= 0.0);
      for (Eigen::Index i = 1; i < est.sample_eigenvalues.size(); ++i)
        CHECK(est.sample_eigenvalues[i] >= est.sample_eigenvalues[i - 1]);
    }
  }

  TEST_CASE("shrinkage converges to the sample covariance as n grows") {
    BlockModelSpec b;
    b.cluster_sizes = {4, 4};
    b.intra_corr = 0.5;
    b.inter_corr = 0.1;
    const auto spec = build_block_model(b);
    double prev = 1e300;
    for (std::size_t n : {50, 500, 5000, 50000}) {
      const Matrix data = simulate(spec, n, 12);
      const Matrix s = sample_covariance(data);
      const double rel = (shrink_covariance(s, static_cast<std::int64_t>(n)).matrix - s).norm() / s.norm();
      CHECK(rel < prev);
      prev = rel;
    }
    CHECK(prev < 0.01);
  }

  TEST_CASE("correlation from covariance") {
    Matrix c(2, 2);
    c << 4.0, 3.0, 3.0, 1.0;
    const Matrix r = correlation_from_covariance(c);
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 1) == doctest::Approx(1.0));  // 3 / 2 clipped to 1
    c(0, 1) = c(1, 0) = 1.0;
    CHECK(correlation_from_covariance(c)(1, 0) == doctest::Approx(0.5));
  }

  TEST_CASE("Fisher z is atanh") {
    for (double r : {-0.9, -0.2, 0.0, 0.4, 0.95}) CHECK(fisher_z(r) == doctest::Approx(std::atanh(r)));
  }

  TEST_CASE("Meng variance against the printed formula") {
    const double r_ab = 0.6, r_ac = 0.3, r_bc = 0.2;
    const std::int64_t n = 53;
    const double rbar2 = (r_ab * r_ab + r_bc * r_bc) / 2.0;
    const double f = std::min(1.0, (1.0 - r_bc) / (2.0 * (1.0 - rbar2)));
    const double h = (1.0 - f * rbar2) / (1.0 - rbar2);
    CHECK(meng_variance(r_ab, r_ac, r_bc, n) == doctest::Approx(2.0 * (1.0 - r_bc) * h / (n - 3)));
    const auto t = meng_terms(r_ab, r_ac, r_bc, n);
    CHECK(t.f <= 1.0);
    CHECK(t.r_bar_sq == doctest::Approx(rbar2));
  }

  TEST_CASE("Meng variance matches simulated z differences") {
    // Three alternatives with corr(a,b)=0.6, corr(a,c)=0.3, corr(b,c)=0.2.
    Matrix s(3, 3);
    s << 1.0, 0.6, 0.3, 0.6, 1.0, 0.2, 0.3, 0.2, 1.0;
    const auto spec = build_dense({0.0, 0.0, 0.0}, s);
    const std::size_t n = 60, reps = 3000;
    std::vector<double> diffs;
    for (std::size_t r = 0; r < reps; ++r) {
      const Matrix c = correlation_from_covariance(sample_covariance(simulate(spec, n, 1000 + r)));
      diffs.push_back(fisher_z(c(0, 1)) - fisher_z(c(0, 2)));
    }
    double m = 0.0, v = 0.0;
    for (double d : diffs) m += d;
    m /= reps;
    for (double d : diffs) v += (d - m) * (d - m);
    v /= reps - 1;
    const double ref = meng_variance(0.6, 0.3, 0.2, n);
    CHECK(v == doctest::Approx(ref).epsilon(0.1));
  }

  TEST_CASE("Meng rejects small n and out-of-range correlations") {
    CHECK_THROWS_AS(meng_variance(0.1, 0.2, 0.3, 3), ConfigError);
    CHECK_THROWS_AS(meng_variance(1.0, 0.2, 0.3, 30), ConfigError);
  }
}
