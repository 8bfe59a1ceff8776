#pragma once

#include "p3c/linalg.hpp"
#include "p3c/problem.hpp"
#include "p3c/stats.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p3c {

enum class PartitionSource { ac, ac_plus, truth, random };

const char* partition_source_name(PartitionSource s);

/// Labels are 0..k-1, numbered by first appearance in index order.
struct ClusterPartition {
  std::vector<int> labels;
  int k = 0;
  std::vector<std::size_t> prototypes;  // per label, may be empty
  PartitionSource source = PartitionSource::truth;

  std::vector<std::vector<std::size_t>> members() const;
};

/// Relabels so that labels appear in order of first occurrence.
std::vector<int> canonical_labels(std::span<const int> labels, std::vector<int>* old_to_new = nullptr);

nlohmann::json partition_to_json(const ClusterPartition& part);
ClusterPartition partition_from_json(const nlohmann::json& doc);

/// Single-linkage agglomeration on similarity until k groups remain. With a
/// size cap, merges that would exceed it are skipped.
ClusterPartition ac_cluster(const Matrix& corr, int k, std::optional<std::size_t> size_cap = {});

/// Index (into the submatrix) of the largest loading on the first principal
/// component; lowest index on ties.
std::size_t select_prototype(const Matrix& corr_sub);

/// Largest total overlap between two labelings over label bijections
/// (exhaustive for k <= 8, greedy above).
std::size_t best_label_overlap(std::span<const int> a, std::span<const int> b, int k);

/// Equality up to relabeling.
bool same_partition(std::span<const int> a, std::span<const int> b, int k);

/// Uniform random split into k groups whose sizes differ by at most one.
ClusterPartition random_equal_partition(std::size_t p, int k, std::uint64_t seed);

/// 1 - k (1 - 1/k)^{p_s}.
double occupancy_bound(int k, std::size_t p_s);

// ---------------------------------------------------------------- AC+

struct AcPlusConfig {
  int k = 2;
  std::size_t p_s = 0;
  /// Replications per alternative used for clustering.
  std::size_t n = 50;
  CovMethod estimator = CovMethod::shrinkage;
  /// Query matching draws n fresh replications per query alternative (after
  /// any existing prefix) together with copies of the prototypes. When false
  /// it reads replications [0, n) and reuses whatever was already sampled.
  bool fresh_queries = true;
  /// Use exact correlations from the problem instead of samples.
  bool oracle = false;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
};

struct AcPlusResult {
  ClusterPartition partition;
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
  /// Replication prefix length reached by every alternative.
  std::vector<std::int64_t> prefix;
  /// Prototype copies simulated alongside each query alternative.
  std::int64_t prototype_copy_samples = 0;
  /// Support-set correlation estimate (support order).
  Matrix support_corr;
  /// r(tau_label, j) for every query j (query order x k).
  Matrix query_corr;
};

/// Prefix lengths already available (e.g. Stage-0) may be passed so that
/// ac_plus reports only the extension.
AcPlusResult ac_plus(const SampleSource& source, const AcPlusConfig& cfg,
                     std::span<const std::int64_t> existing_prefix = {});

// ---------------------------------------------------------------- PCC

using CorrelationFn = std::function<double(std::size_t, std::size_t)>;

struct PccBoundInputs {
  CorrelationFn corr;
  std::span<const int> truth;
  int k = 1;
  double delta_c = 0.1;
  std::int64_t n = 50;
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
  /// One prototype per true cluster (global index, in the support set).
  std::vector<std::size_t> prototypes;
};

struct PccReport {
  double empirical = -1.0;
  double empirical_se = 0.0;
  double occupancy = 1.0;
  double support_term_raw = 1.0;  // Bonferroni sum over Gamma_s
  double query_term_raw = 1.0;    // Bonferroni sum over Gamma_q
  double bound = 1.0;             // occupancy * clamp(support) * clamp(query)
  double ac_bound = 1.0;          // clamp(support): AC on the support set, equal sizes
  double ac_unequal_bound = -1.0; // with the independent-comparison term; -1 when not computed
  std::size_t gamma_s = 0;
  std::size_t gamma_q = 0;
  std::size_t gamma_prime_s = 0;
  double delta_c = 0.0;
  std::int64_t n = 0;
};

PccReport pcc_lower_bound(const PccBoundInputs& in);

struct RequiredSamplesInputs {
  CorrelationFn corr;
  std::span<const int> truth;
  int k = 1;
  double delta_c = 0.1;
  std::int64_t n0 = 0;
  std::vector<std::size_t> query;
  std::vector<std::size_t> prototypes;
};

struct RequiredSamples {
  std::int64_t additional = 0;  // N(alpha_q)
  double quantile = 0.0;        // z at level (|Gamma_q| - alpha_q) / |Gamma_q|
  double max_term = 0.0;        // max (1 - r_bc) h over Gamma_q
  std::size_t gamma_q = 0;
};

RequiredSamples required_clustering_samples(double alpha_q, const RequiredSamplesInputs& in);

struct PccMeasureConfig {
  AcPlusConfig ac;
  /// Random labels instead of AC+ (no information).
  bool random_partition = false;
};

struct PccEstimate {
  double pcc = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t reps = 0;
  /// Fraction of reps whose support set contained every true cluster.
  double occupancy_rate = 0.0;
  std::vector<bool> correct;
  std::vector<ClusterPartition> partitions;  // kept only when requested
  std::vector<std::vector<std::size_t>> supports;  // AC+ support sets, kept with partitions
};

PccEstimate measure_pcc(const ProblemSpec& spec, const PccMeasureConfig& cfg, std::size_t reps,
                        std::uint64_t seed, bool keep_partitions = false);

}  // namespace p3c
