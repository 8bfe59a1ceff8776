#pragma once

#include "p3c/linalg.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p3c {

enum class ModelKind { dense, block, free_wilson };

/// One nonzero entry of the latent-factor loading matrix.
struct Loading {
  std::uint32_t factor;
  double weight;
};

/// Ground-truth R&S instance. The covariance is held in latent-factor form
/// Sigma = W W^T + diag(idio) so that very large instances (the full
/// Free-Wilson library) never need a dense p x p matrix. Dense models also
/// keep the exact input matrix for covariance queries.
///
/// Indices are 0-based; cluster labels are 0..k-1.
class ProblemSpec {
 public:
  std::size_t p() const { return mu_.size(); }
  std::span<const double> mu() const { return mu_; }
  double mean(std::size_t i) const { return mu_[i]; }

  double covariance(std::size_t i, std::size_t j) const;
  double variance(std::size_t i) const { return covariance(i, i); }
  double correlation(std::size_t i, std::size_t j) const;

  /// Dense covariance; throws ConfigError above `limit` alternatives.
  Matrix covariance_matrix(std::size_t limit = 8192) const;
  Matrix covariance_submatrix(std::span<const std::size_t> idx) const;

  std::span<const int> partition() const { return partition_; }
  int k() const { return k_; }
  std::size_t best_index() const { return best_; }
  /// True when the top-2 mean gap is below 1e-12.
  bool best_ambiguous() const { return ambiguous_; }

  std::size_t factor_count() const { return factor_count_; }
  std::span<const Loading> loadings(std::size_t i) const {
    return {entries_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  double idio_sd(std::size_t i) const { return idio_sd_[i]; }

  ModelKind kind() const { return kind_; }
  /// Model parameters in the config schema (round-trips through problem_from_json).
  const nlohmann::json& params() const { return params_; }

  /// Smallest and largest eigenvalue of Sigma. Exact for block models and for
  /// factor models with constant idiosyncratic variance; dense otherwise.
  EigenRange eigenvalue_range() const;

 private:
  friend class ProblemBuilder;
  ModelKind kind_ = ModelKind::dense;
  std::vector<double> mu_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Loading> entries_;
  std::vector<double> idio_sd_;
  std::size_t factor_count_ = 0;
  std::optional<Matrix> dense_sigma_;
  std::vector<int> partition_;
  int k_ = 0;
  std::size_t best_ = 0;
  bool ambiguous_ = false;
  nlohmann::json params_;
};

struct FreeWilsonSite {
  std::string name;
  std::vector<double> atom_means;
  std::vector<double> atom_vars;
};

struct FreeWilsonSpec {
  std::vector<FreeWilsonSite> sites;
  double base_mean = 0.0;
  double noise_var = 0.01;

  std::size_t total_count() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Drugs are enumerated in mixed radix with the last site varying fastest.
/// Labels follow the substituent at the site with the largest total atom
/// variance, renumbered in order of first appearance.
ProblemSpec build_free_wilson(const FreeWilsonSpec& spec, std::optional<IndexRange> subset = {});

/// Substituent index of every site for drug `index`.
std::vector<std::size_t> free_wilson_digits(const FreeWilsonSpec& spec, std::size_t index);

/// Atom means and variances drawn from N(0, var) with negative draws
/// rejected. `dominant_var_shift` is added to the first site's variances.
FreeWilsonSpec random_free_wilson(const std::vector<std::pair<std::string, std::size_t>>& sites,
                                  std::uint64_t seed, double mean_var = 0.1, double var_var = 0.1,
                                  double dominant_var_shift = 0.0, double base_mean = 0.0,
                                  double noise_var = 0.01);

struct BlockModelSpec {
  std::vector<std::size_t> cluster_sizes;
  double intra_corr = 0.5;
  double inter_corr = 0.1;
  double variance = 1.0;
  /// Explicit means (size p); when empty the layout below is used.
  std::vector<double> means;
  /// First member of cluster c has mean local_best_mean - c * local_step,
  /// plus best_bonus for c = 0; every other member has other_mean.
  double local_best_mean = 1.0;
  double local_step = 0.0;
  double best_bonus = 0.0;
  double other_mean = 0.0;
};

ProblemSpec build_block_model(const BlockModelSpec& spec);

/// Dense model from explicit mean vector and covariance.
ProblemSpec build_dense(std::vector<double> mu, const Matrix& sigma, std::vector<int> partition = {});

/// Five-alternative illustrative instance: variances 0.1, alternative 1
/// covaries x with all others, alternatives 2-4 covary 0.01 among
/// themselves, alternative 5 covaries y with 2-4.
ProblemSpec illustrative_fixture(double x, double y, double mu1 = 2.1);

struct Assumption1Report {
  bool holds = false;
  double min_intra = 0.0;
  double max_inter = 0.0;
};

/// Checks that every intra-cluster correlation exceeds every inter-cluster one.
Assumption1Report check_assumption1(const ProblemSpec& spec);

nlohmann::json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const nlohmann::json& doc);

/// Observation x_{i,m} = mu_i + sum_f W_{if} z_{m,f} + s_i e_{m,i}, with z and e
/// counter-based normals keyed by the seed. Observation m of every
/// alternative belongs to the same joint replication, so any subset of
/// alternatives observed at a common replication index is jointly N(mu, Sigma),
/// independent across m, regardless of which worker draws it.
class SampleSource {
 public:
  SampleSource(const ProblemSpec& spec, std::uint64_t seed);

  const ProblemSpec& spec() const { return *spec_; }
  std::uint64_t seed() const { return seed_; }

  double observe(std::size_t i, std::uint64_t m) const;
  /// Observations of `alts` at replication m.
  void observe_many(std::span<const std::size_t> alts, std::uint64_t m, std::span<double> out) const;
  void observe_row(std::uint64_t m, std::span<double> out) const;

 private:
  double factor_normal(std::uint64_t m, std::uint64_t f) const;
  double idio_normal(std::uint64_t m, std::uint64_t i) const;

  const ProblemSpec* spec_;
  std::uint64_t seed_;
  std::uint64_t factor_key_;
  std::uint64_t idio_key_;
};

/// n x p matrix of i.i.d. rows (replications 0..n-1).
Matrix simulate(const ProblemSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace p3c
