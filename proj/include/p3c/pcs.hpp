#pragma once

#include "p3c/linalg.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace p3c {

/// Plug-in quantities for a candidate tau. `cov` is the covariance of single
/// observations; the covariance of sample means is cov_ij / max(N_i, N_j).
struct PcsContext {
  std::size_t tau = 0;
  std::vector<std::size_t> others;  // all i != tau, ascending
  std::vector<double> lambda;       // var(xbar_tau - xbar_i), aligned with others
  std::vector<double> d;            // (mu_tau - mu_i) / sqrt(lambda)
  Matrix rtilde;                    // corr(xbar_tau - xbar_i, xbar_tau - xbar_j)
  std::vector<std::size_t> better;  // I+(tau): mu_i > mu_tau
  std::vector<std::size_t> worse;   // I-(tau): mu_i < mu_tau
  std::vector<std::size_t> ties;    // mu_i == mu_tau, i != tau
};

Matrix mean_covariance_matrix(const Matrix& cov, std::span<const std::int64_t> counts);

/// Throws DegenerateError naming (tau, i) when some lambda <= 0.
PcsContext build_context(std::size_t tau, std::span<const double> means, const Matrix& cov,
                         std::span<const std::int64_t> counts);

struct McEstimate {
  double p = 0.0;
  double se = 0.0;
};

/// Fraction of draws of the sample-mean vector in which tau is strictly
/// maximal (ties fail).
McEstimate pcs_monte_carlo(std::size_t tau, std::span<const double> means, const Matrix& cov,
                           std::span<const std::int64_t> counts, std::size_t draws, std::uint64_t seed);

/// PCS(tau) for every tau from one shared set of draws.
std::vector<McEstimate> pcs_monte_carlo_all(std::span<const double> means, const Matrix& cov,
                                            std::span<const std::int64_t> counts, std::size_t draws,
                                            std::uint64_t seed);

/// Holds a fixed block of standard normals so repeated evaluations (the
/// sequential loop) use common random numbers.
class McPcsEngine {
 public:
  McPcsEngine(std::size_t m, std::size_t draws, std::uint64_t seed);
  std::size_t dimension() const { return m_; }
  std::size_t draws() const { return draws_; }
  std::vector<McEstimate> evaluate(std::span<const double> means, const Matrix& cov,
                                   std::span<const std::int64_t> counts) const;

 private:
  std::size_t m_;
  std::size_t draws_;
  std::vector<double> z_;
};

struct BonferroniBound {
  double raw = 0.0;
  double clamped = 0.0;
};

/// sum_{i != tau} Phi(d_i) - (p - 2). With iz_delta > 0 every i with
/// mu_i <= mu_tau uses max(mu_tau - mu_i, iz_delta) as its gap. When
/// `strict` is false a zero lambda is resolved by the sign of the gap
/// instead of throwing.
BonferroniBound mopcs_bonferroni(std::span<const double> means, const Matrix& cov,
                                 std::span<const std::int64_t> counts, std::size_t tau,
                                 double iz_delta = 0.0, bool strict = true);

/// (p - 1) * min_i Phi(d_i) - (p - 2).
double bonferroni_min_form(const PcsContext& ctx);

enum class PcsMethod { bonferroni, monte_carlo };

PcsMethod parse_pcs_method(const std::string& name);
const char* pcs_method_name(PcsMethod m);

struct SelectionResult {
  std::size_t tau_star = 0;
  std::vector<double> pcs;  // MC estimate or raw bound per alternative
  std::vector<double> se;   // MC only
  double mopcs = 0.0;
  double pcs_trad = 0.0;    // PCS of the best-sample-mean alternative
  std::size_t best_mean_index = 0;
  bool case_a = true;       // tau_star has the largest sample mean
  PcsMethod method = PcsMethod::monte_carlo;
};

SelectionResult select_pos(std::span<const double> means, const Matrix& cov,
                           std::span<const std::int64_t> counts, PcsMethod method,
                           std::size_t draws = 10000, std::uint64_t seed = 1);

/// Same, reusing an engine's fixed normals for the Monte Carlo method.
SelectionResult select_pos(std::span<const double> means, const Matrix& cov,
                           std::span<const std::int64_t> counts, const McPcsEngine& engine);

/// Selection over explicit PCS values: argmax, lowest index on ties.
SelectionResult selection_from_values(std::span<const double> means, std::vector<double> pcs,
                                      std::vector<double> se, PcsMethod method);

struct PcsParams {
  std::vector<double> means;
  Matrix cov;
  std::vector<std::int64_t> counts;
};

struct FdResult {
  double derivative = 0.0;
  double se = 0.0;
  double pcs_plus = 0.0;
  double pcs_minus = 0.0;
};

/// Central difference (PCS(theta+h) - PCS(theta-h)) / 2h of Monte Carlo
/// PCS(tau), both sides driven by the same normals. The standard error comes
/// from the paired per-draw indicator differences.
FdResult fd_probe(std::size_t tau, const std::function<PcsParams(double)>& at, double theta, double h,
                  std::size_t draws, std::uint64_t seed);

}  // namespace p3c
