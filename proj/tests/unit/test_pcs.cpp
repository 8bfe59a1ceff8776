#include "doctest.h"

#include "p3c/error.hpp"
#include "p3c/pcs.hpp"
#include "p3c/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

using namespace p3c;

namespace {

// Independent Monte Carlo: Eigen LLT and <random>.
double ref_pcs(const std::vector<double>& mu, const Matrix& cov, const std::vector<std::int64_t>& n, std::size_t tau,
               std::size_t draws, std::uint64_t seed) {
  const auto p = static_cast<Eigen::Index>(mu.size());
  Matrix mc(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      mc(i, j) = cov(i, j) / static_cast<double>(std::max(n[static_cast<std::size_t>(i)], n[static_cast<std::size_t>(j)]));
  const Matrix l = Eigen::LLT<Matrix>(mc).matrixL();
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd e(p);
  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    for (Eigen::Index i = 0; i < p; ++i) e[i] = z(eng);
    const Eigen::VectorXd x = l * e;
    bool win = true;
    for (Eigen::Index i = 0; i < p; ++i)
      if (static_cast<std::size_t>(i) != tau &&
          mu[static_cast<std::size_t>(i)] + x[i] >= mu[tau] + x[static_cast<Eigen::Index>(tau)])
        win = false;
    hits += win;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

Matrix fixture_cov(double x, double y) { return illustrative_fixture(x, y).covariance_matrix(); }

}  // namespace

TEST_SUITE("pcs") {
  TEST_CASE("two alternatives: PCS equals Phi(d)") {
    Matrix cov(2, 2);
    cov << 1.0, 0.3, 0.3, 2.0;
    const std::vector<double> mu{0.5, 0.0};
    const std::vector<std::int64_t> n{10, 20};
    const double lam = 1.0 / 10 + 2.0 / 20 - 2 * 0.3 / 20;
    const double exact = normal_cdf(0.5 / std::sqrt(lam));
    const auto mc = pcs_monte_carlo(0, mu, cov, n, 400000, 3);
    CHECK(std::abs(mc.p - exact) < 4 * mc.se);
    CHECK(mopcs_bonferroni(mu, cov, n, 0).raw == doctest::Approx(exact));
    const auto ctx = build_context(0, mu, cov, n);
    CHECK(ctx.lambda[0] == doctest::Approx(lam));
    CHECK(ctx.d[0] == doctest::Approx(0.5 / std::sqrt(lam)));
  }

  TEST_CASE("library Monte Carlo agrees with the independent oracle") {
    const auto cov = fixture_cov(0.03, 0.02);
    const std::vector<double> mu{2.1, 2.0, 1.95, 1.9, 1.9};
    const std::vector<std::int64_t> n{10, 10, 10, 10, 10};
    const auto all = pcs_monte_carlo_all(mu, cov, n, 300000, 9);
    for (std::size_t tau : {0u, 1u, 4u}) {
      const double ref = ref_pcs(mu, cov, n, tau, 300000, 100 + tau);
      CHECK(std::abs(all[tau].p - ref) < 4.0 * std::sqrt(2.0) * all[tau].se + 1e-4);
    }
    double total = 0.0;
    for (const auto& e : all) total += e.p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("single-tau and shared-draw estimates coincide for the same seed") {
    const auto cov = fixture_cov(0.05, 0.01);
    const std::vector<double> mu{2.01, 2.0, 1.95, 1.9, 1.9};
    const std::vector<std::int64_t> n{7, 10, 5, 5, 5};
    const auto all = pcs_monte_carlo_all(mu, cov, n, 50000, 4);
    CHECK(pcs_monte_carlo(1, mu, cov, n, 50000, 4).p == all[1].p);
  }

  TEST_CASE("Bonferroni bound never exceeds Monte Carlo PCS") {
    std::mt19937_64 eng(21);
    std::normal_distribution<double> z;
    for (int t = 0; t < 25; ++t) {
      const std::size_t p = 3 + t % 4;
      Matrix a(p, p + 1);
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = z(eng);
      const Matrix cov = a * a.transpose() / static_cast<double>(p);
      std::vector<double> mu(p);
      for (auto& m : mu) m = 0.4 * z(eng);
      std::vector<std::int64_t> n(p);
      for (auto& c : n) c = 4 + static_cast<std::int64_t>(eng() % 20);
      const auto mc = pcs_monte_carlo_all(mu, cov, n, 40000, static_cast<std::uint64_t>(t));
      for (std::size_t tau = 0; tau < p; ++tau)
        CHECK(mopcs_bonferroni(mu, cov, n, tau).raw <= mc[tau].p + 3.0 * mc[tau].se + 1e-12);
    }
  }

  TEST_CASE("indifference-zone floor raises only non-better gaps") {
    Matrix cov = Matrix::Identity(3, 3);
    const std::vector<double> mu{1.0, 0.99, 1.2};
    const std::vector<std::int64_t> n{100, 100, 100};
    const double plain = mopcs_bonferroni(mu, cov, n, 0).raw;
    const double floored = mopcs_bonferroni(mu, cov, n, 0, 0.1).raw;
    const double s = std::sqrt(0.02);
    CHECK(floored == doctest::Approx(normal_cdf(0.1 / s) + normal_cdf(-0.2 / s) - 1.0));
    CHECK(floored > plain);
  }

  TEST_CASE("degenerate lambda names the pair") {
    Matrix cov(2, 2);
    cov << 1.0, 1.0, 1.0, 1.0;
    const std::vector<double> mu{1.0, 0.0};
    const std::vector<std::int64_t> n{5, 5};
    CHECK_THROWS_AS(build_context(0, mu, cov, n), DegenerateError);
    try {
      build_context(0, mu, cov, n);
    } catch (const DegenerateError& e) {
      CHECK(std::string(e.what()).find("tau=0") != std::string::npos);
    }
    CHECK(mopcs_bonferroni(mu, cov, n, 0, 0.0, false).raw == 1.0);
  }

  TEST_CASE("selection ties go to the lowest index") {
    const std::vector<double> mu{1.0, 1.0};
    const auto sel = selection_from_values(mu, {0.4, 0.4}, {}, PcsMethod::bonferroni);
    CHECK(sel.tau_star == 0);
    CHECK(sel.case_a);
  }

  TEST_CASE("context partitions the competitors") {
    const auto cov = fixture_cov(0.02, 0.02);
    const std::vector<double> mu{1.0, 2.0, 1.0, 0.5, 0.5};
    const auto ctx = build_context(2, mu, cov, std::vector<std::int64_t>(5, 10));
    CHECK(ctx.better == std::vector<std::size_t>{1});
    CHECK(ctx.ties == std::vector<std::size_t>{0});
    CHECK(ctx.worse == std::vector<std::size_t>{3, 4});
    CHECK(ctx.rtilde.rows() == 4);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(ctx.rtilde(i, i) == doctest::Approx(1.0));
  }

  TEST_CASE("P-OS prefers the correlated alternative in the low-confidence fixture") {
    const auto cov = fixture_cov(0.05, 0.01);
    const std::vector<double> mu{2.01, 2.0, 1.95, 1.9, 1.9};
    const std::vector<std::int64_t> n{5, 10, 5, 5, 5};
    const auto sel = select_pos(mu, cov, n, PcsMethod::monte_carlo, 400000, 5);
    CHECK(sel.tau_star == 1);
    CHECK_FALSE(sel.case_a);
    CHECK(sel.best_mean_index == 0);
    CHECK(sel.mopcs > sel.pcs_trad);
  }

  TEST_CASE("engine reuses its normals") {
    const auto cov = fixture_cov(0.05, 0.01);
    const std::vector<double> mu{2.1, 2.0, 1.95, 1.9, 1.9};
    const std::vector<std::int64_t> n{5, 10, 5, 5, 5};
    const McPcsEngine engine(5, 20000, 77);
    const auto a = engine.evaluate(mu, cov, n);
    const auto b = engine.evaluate(mu, cov, n);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a[i].p == b[i].p);
  }

  TEST_CASE("finite differences recover the sign of dPCS(1)/dx") {
    auto at = [](double x) {
      PcsParams pp;
      pp.means = {2.1, 2.0, 1.95, 1.9, 1.9};
      pp.cov = fixture_cov(x, 0.02);
      pp.counts.assign(5, 10);
      return pp;
    };
    const auto fd = fd_probe(0, at, 0.02, 0.01, 200000, 3);
    CHECK(fd.derivative > 3.0 * fd.se);
    CHECK(fd.pcs_plus > fd.pcs_minus);
  }
}
