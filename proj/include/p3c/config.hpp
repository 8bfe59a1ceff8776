#pragma once

#include "p3c/orchestrator.hpp"
#include "p3c/problem.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace p3c {

/// PCC sweep settings (used by pcc-sweep and verify pcc-bounds).
struct PccSweepConfig {
  std::vector<std::size_t> p_s{50};
  std::vector<std::size_t> n{50, 200, 1000};
  std::size_t reps = 200;
  double delta_c = 0.1;
  CovMethod estimator = CovMethod::shrinkage;
};

/// One experiment document: a problem, the procedures to run on it and the
/// shared procedure settings.
struct ExperimentConfig {
  nlohmann::json problem;
  std::vector<std::string> procedures{"p3c-gba"};
  P3cConfig procedure;
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  PccSweepConfig pcc;
};

ExperimentConfig experiment_from_json(const nlohmann::json& doc);
/// Every field, defaults included.
nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::string& path);
nlohmann::json load_json_file(const std::string& path);

// ---------------------------------------------------------------- fixtures

/// One illustrative-example setting: covariances x, y; mean of alternative 1;
/// per-alternative sample sizes.
struct FixtureRow {
  std::string label;
  double x = 0.0;
  double y = 0.0;
  double mu1 = 2.1;
  std::vector<std::int64_t> counts;
};

/// Fifteen positive-definite (x, y) cells with N = 10 each.
std::vector<FixtureRow> table1_rows();
/// High-confidence row followed by the low-confidence rows N1 = 5..10.
std::vector<FixtureRow> table2_rows();
std::vector<FixtureRow> fixture_rows(const std::string& id);

}  // namespace p3c
