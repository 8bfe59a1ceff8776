#pragma once

#include "p3c/cluster.hpp"
#include "p3c/config.hpp"
#include "p3c/pcs.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace p3c {

struct FixtureEval {
  FixtureRow row;
  std::vector<McEstimate> pcs;  // every alternative, shared draws
  SelectionResult selection;
};

FixtureEval evaluate_fixture(const FixtureRow& row, std::size_t draws, std::uint64_t seed);

struct SignProbe {
  std::string name;
  std::size_t tau = 0;  // 0-based
  bool wrt_x = true;
  int expected = 1;
  FdResult fd;
  /// expected * derivative >= 3 standard errors.
  bool pass = false;
};

/// Central differences of PCS(1) and PCS(5) in x and y on the illustrative
/// fixture with N = 10 everywhere.
std::vector<SignProbe> sign_probes(std::size_t draws, std::uint64_t seed, double x = 0.02, double y = 0.02,
                                   double h = 0.01);

struct PccPoint {
  std::size_t p_s = 0;
  std::size_t n = 0;
  PccEstimate empirical;
  double occupancy = 0.0;
  /// Lower bound over reps whose support held every true cluster.
  double bound_mean = 0.0;
  double bound_max = 0.0;
  std::size_t bound_reps = 0;
};

/// AC+ on `spec` with true-correlation bounds evaluated on each rep's split.
PccPoint pcc_point(const ProblemSpec& spec, std::size_t p_s, std::size_t n, std::size_t reps, std::uint64_t seed,
                   double delta_c, CovMethod estimator);

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Suites: signs, pos-preference, negative-n1, pcc-bounds. `problem` is
/// used by pcc-bounds (a block model when null).
std::vector<CheckLine> run_verify_suite(const std::string& suite, std::size_t draws, std::uint64_t seed,
                                        const PccSweepConfig& pcc, const nlohmann::json* problem = nullptr);

}  // namespace p3c
