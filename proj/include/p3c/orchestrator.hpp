#pragma once

#include "p3c/alloc.hpp"
#include "p3c/cluster.hpp"
#include "p3c/problem.hpp"
#include "p3c/stats.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace p3c {

enum class PartitionMode { ac_plus, random, truth, single };

PartitionMode parse_partition_mode(const std::string& name);
const char* partition_mode_name(PartitionMode m);

struct StageEngineConfig {
  Engine engine = Engine::gba;
  PcsMethod method = PcsMethod::monte_carlo;
  std::size_t draws = 10000;
  double epsilon = 0.01;
  /// 0 means twice the scope size.
  std::int64_t batch = 0;
  bool refresh_correlation = false;
};

struct P3cConfig {
  std::int64_t n0 = 20;

  PartitionMode partition = PartitionMode::ac_plus;
  int k = 8;
  /// Support-set size; 0 means min(p, max(2k, 50)).
  std::size_t p_s = 0;
  /// Clustering replications per alternative; 0 means n0.
  std::size_t n_cluster = 0;
  CovMethod estimator = CovMethod::shrinkage;
  bool fresh_queries = true;

  StageEngineConfig stage2;
  StageEngineConfig stage3;

  double alpha = 0.1;
  double alpha1 = 0.09;
  double alpha2 = 0.01;
  /// Indifference-zone parameter: floor on stopping-bound gaps for the
  /// sequential engines (0 = off) and the Rinott delta.
  double delta = 0.0;
  double rinott_delta = 0.1;

  StopMode mode = StopMode::fixed_precision;
  std::int64_t budget = 0;
  double hard_cap_factor = 1e4;

  /// Stage 2 ignores the Stage 0/1 samples and starts from an independent stream.
  bool discard_stage1 = false;
  /// Stage 3 starts from an independent stream instead of continuing prefixes.
  bool stage3_fresh = false;

  std::size_t workers = 1;
  std::uint64_t seed = 1;
  bool keep_trace = false;

  void validate(std::size_t p) const;
};

nlohmann::json p3c_config_to_json(const P3cConfig& cfg);
/// Missing keys keep their defaults.
P3cConfig p3c_config_from_json(const nlohmann::json& doc, P3cConfig base = {});

/// Applies a named procedure (p3c-gba, p3c-ea, p3c-cba, dc-ea, dc-cba,
/// dc-gba, rinott, gba, ea, cba, p3c, dc) to a base configuration.
P3cConfig configure_procedure(const std::string& procedure, P3cConfig base);
const std::vector<std::string>& known_procedures();

struct StageTotals {
  std::int64_t stage0 = 0;
  std::int64_t stage1 = 0;
  std::int64_t stage1_overhead = 0;  // prototype copies during query matching
  std::int64_t stage2 = 0;
  std::int64_t stage3 = 0;
  std::int64_t total() const { return stage0 + stage1 + stage1_overhead + stage2 + stage3; }
};

struct ClusterOutcome {
  std::vector<std::size_t> members;
  std::size_t local_best = 0;
  std::int64_t samples = 0;  // drawn in Stage 2
  double bound_raw = 1.0;
  double mopcs = 1.0;
  bool success = true;
  bool cap_hit = false;
  std::size_t iterations = 0;
  std::size_t worker = 0;
};

struct RunRecord {
  std::string procedure;
  std::size_t selected = 0;
  bool correct = false;
  StageTotals samples;
  std::array<double, 4> wall_seconds{};  // stages 0..3
  ClusterPartition partition;
  std::vector<ClusterOutcome> clusters;
  std::vector<std::size_t> local_bests;
  double final_bound_raw = 1.0;
  double final_mopcs = 1.0;
  bool success = true;
  bool cap_hit = false;
  /// Stage-2 moPCS averaged with weights proportional to cluster size.
  double stage2_weighted_mopcs = 1.0;
  /// Replication prefix per alternative on the main stream at termination.
  std::vector<std::int64_t> final_prefix;
  std::vector<TraceRecord> stage3_trace;
};

nlohmann::json run_record_to_json(const RunRecord& rec);

RunRecord run_p3c(const ProblemSpec& spec, const P3cConfig& cfg);
/// run_p3c with a seeded random equal-size partition in Stage 1.
RunRecord run_divide_conquer(const ProblemSpec& spec, const P3cConfig& cfg);
RunRecord run_procedure(const ProblemSpec& spec, const std::string& procedure, const P3cConfig& base);

struct MacroSummary {
  std::string procedure;
  std::size_t p = 0;
  std::size_t reps = 0;
  double mean_total = 0.0;
  double total_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// Fraction of reps whose selection equals the true best.
  double pcs_trad = 0.0;
  double pcs_trad_se = 0.0;
  /// Mean clamped plug-in Bonferroni value at termination.
  double mopcs_plugin = 0.0;
  double stage2_weighted_mopcs = 0.0;
  StageTotals mean_stage;  // rounded per-stage means
  std::array<double, 5> stage_means{};
  double mean_wall_seconds = 0.0;
  std::size_t cap_hits = 0;
  std::size_t failures = 0;
  std::vector<RunRecord> runs;
};

/// Repetition r uses seed derive_seed(seed, r).
MacroSummary macro_replicate(const ProblemSpec& spec, const std::string& procedure, const P3cConfig& base,
                             std::size_t reps, std::uint64_t seed, bool keep_runs = false);

}  // namespace p3c
