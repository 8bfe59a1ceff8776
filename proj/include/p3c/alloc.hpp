#pragma once

#include "p3c/linalg.hpp"
#include "p3c/pcs.hpp"
#include "p3c/problem.hpp"

#include "json.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace p3c {

enum class AllocCase { a, b, equal, rinott_stage2 };

const char* alloc_case_name(AllocCase c);

struct AllocationPlan {
  std::vector<std::int64_t> counts;
  std::int64_t batch = 0;
  AllocCase tag = AllocCase::equal;
  /// Samples given to I+(tau*) by the epsilon-greedy floor.
  std::int64_t eps_floor = 0;
  /// Case (b) with empty I-(tau*): everything went to tau*.
  bool fallback = false;
};

AllocationPlan equal_allocation(std::size_t p, std::int64_t batch);

/// Rounds nonnegative reals to integers summing to `total`; leftover units go
/// to the largest fractional parts, lowest index first.
std::vector<std::int64_t> largest_remainder(std::span<const double> values, std::int64_t total);

struct CbaInputs {
  std::size_t tau = 0;
  std::vector<std::size_t> omega;
  std::vector<double> means;
  Matrix cov;  // single-observation covariance
  std::int64_t batch = 0;
  /// Indifference-zone floor on gaps of competitors not above tau (0 = off).
  double gap_floor = 0.0;
};

struct CbaSolution {
  AllocationPlan plan;
  std::vector<double> fractional;
  double x0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  /// 1 or 2 per alternative in omega order: which closed-form branch applied.
  std::vector<int> branch;
};

/// Closed-form allocation maximizing the Bonferroni bound for a fixed tau.
CbaSolution cba_solve(const CbaInputs& in);
AllocationPlan cba_allocate(const CbaInputs& in);

struct StatsSnapshot {
  std::vector<double> means;
  Matrix cov;
  std::vector<std::int64_t> counts;
};

/// One GBA batch given the current P-OS. `eps_credit` (size p, optional)
/// carries fractional epsilon-floor shares across batches.
AllocationPlan gba_step(const StatsSnapshot& snap, const SelectionResult& sel, std::int64_t batch, double epsilon,
                        std::vector<double>* eps_credit = nullptr, double iz_delta = 0.0);

/// Same, selecting the P-OS first with the given method.
AllocationPlan gba_step(const StatsSnapshot& snap, std::int64_t batch, double epsilon, PcsMethod method,
                        std::size_t draws = 10000, std::uint64_t seed = 1);

// ---------------------------------------------------------------- sequential loop

enum class StopMode { fixed_precision, fixed_budget };

struct StoppingRule {
  StopMode mode = StopMode::fixed_precision;
  double alpha = 0.1;
  /// Total samples in scope (including reused prior samples) for fixed budget.
  std::int64_t budget = 0;
  /// Indifference-zone floor on mean gaps in the stopping bound (0 = off).
  double iz_delta = 0.0;
  /// Fixed-precision guard; 0 means 1e4 * scope size.
  std::int64_t hard_cap = 0;
};

enum class Engine { gba, equal, cba, rinott };

Engine parse_engine(const std::string& name);
const char* engine_name(Engine e);

struct GbaConfig {
  Engine engine = Engine::gba;
  PcsMethod method = PcsMethod::monte_carlo;
  std::size_t draws = 10000;
  std::int64_t n0 = 10;
  /// 0 means twice the scope size.
  std::int64_t batch = 0;
  double epsilon = 0.01;
  StoppingRule stop;
  bool refresh_correlation = false;
  /// Initialization adds n0 samples on top of any prior prefix instead of
  /// topping up to n0.
  bool restart = false;
  bool keep_trace = true;
  std::uint64_t seed = 1;
};

struct TraceRecord {
  std::int64_t iteration = 0;
  std::size_t tau_star = 0;  // global index
  AllocCase tag = AllocCase::a;
  double bound = 0.0;        // raw Bonferroni value
  std::int64_t cumulative = 0;
};

struct ScopeResult {
  std::size_t selected = 0;      // global index
  double final_bound_raw = 0.0;  // at termination
  double final_mopcs = 0.0;      // selection PCS value at termination
  std::int64_t new_samples = 0;  // drawn during this call
  std::int64_t total_samples = 0;
  bool success = false;          // fixed precision met
  bool cap_hit = false;
  std::size_t iterations = 0;
  std::size_t tau_switches = 0;
  std::vector<std::int64_t> final_prefix;  // per scope member
  std::vector<TraceRecord> trace;
};

/// Algorithm loop over `scope` (global indices). Observation r of member i
/// is replication r of the source; `prior_prefix` (per member, may be empty)
/// marks replications already drawn, which are replayed into the statistics.
ScopeResult run_gba(const SampleSource& source, std::span<const std::size_t> scope,
                    std::span<const std::int64_t> prior_prefix, const GbaConfig& cfg);

nlohmann::json trace_record_to_json(const TraceRecord& r);

// ---------------------------------------------------------------- Rinott

/// Rinott constant for p systems, confidence 1 - alpha, first-stage size n0.
double rinott_h(std::size_t p, double alpha, std::int64_t n0);

/// Two-stage indifference-zone procedure; first-stage variances use
/// replications [0, n0).
ScopeResult rinott_two_stage(const SampleSource& source, std::span<const std::size_t> scope,
                             std::span<const std::int64_t> prior_prefix, std::int64_t n0, double alpha, double delta);

}  // namespace p3c
