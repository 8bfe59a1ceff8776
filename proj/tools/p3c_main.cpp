// p3c command-line driver.

#include "p3c/config.hpp"
#include "p3c/error.hpp"
#include "p3c/io.hpp"
#include "p3c/orchestrator.hpp"
#include "p3c/simd.hpp"
#include "p3c/verify.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace p3c;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> draws;
  std::optional<std::size_t> reps;
};

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path path = fs::path(dir) / name;
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

ExperimentConfig load_with_overrides(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  const auto doc = load_json_file(c.config);
  ExperimentConfig e = doc.contains("problem") ? experiment_from_json(doc) : experiment_from_json({{"problem", doc}});
  if (c.seed) e.seed = *c.seed;
  if (c.workers) e.procedure.workers = *c.workers;
  if (c.reps) {
    e.reps = *c.reps;
    e.pcc.reps = *c.reps;
  }
  if (c.draws) {
    e.procedure.stage2.draws = *c.draws;
    e.procedure.stage3.draws = *c.draws;
  }
  return e;
}

// RNG seed override from the environment (the only env-based setting).
void apply_env_seed(Common& c) {
  if (c.seed) return;
  if (const char* s = std::getenv("P3C_SEED")) {
    try {
      c.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError("P3C_SEED must be an unsigned integer");
    }
  }
}

int cmd_gen(const Common& c, std::size_t observations) {
  const auto e = load_with_overrides(c);
  const ProblemSpec spec = problem_from_json(e.problem);
  auto f = open_out(c.out, "problem.json");
  f << problem_to_json(spec).dump(2) << '\n';
  const auto range = spec.eigenvalue_range();
  std::cout << "p=" << spec.p() << " k=" << spec.k() << " best=" << spec.best_index() + 1
            << " min_eigenvalue=" << fmt(range.min) << " max_eigenvalue=" << fmt(range.max) << '\n';
  if (observations > 0) {
    auto obs = open_out(c.out, "observations.csv");
    write_observations_csv(obs, simulate(spec, observations, e.seed));
  }
  return 0;
}

int cmd_run(const Common& c) {
  const auto e = load_with_overrides(c);
  const ProblemSpec spec = problem_from_json(e.problem);
  const auto cfg_json = experiment_to_json(e);
  auto summary = open_out(c.out, "summary.csv");
  auto runs = open_out(c.out, "runs.jsonl");
  CsvWriter csv(summary, cfg_json, e.seed);
  csv.header({"procedure", "p", "reps", "total_mean", "total_se", "stage0", "stage1", "stage1_overhead", "stage2",
              "stage3", "pcs_trad", "pcs_trad_se", "mopcs_plugin", "stage2_weighted_mopcs", "cap_hits",
              "failures"});
  for (const auto& name : e.procedures) {
    const auto s = macro_replicate(spec, name, e.procedure, e.reps, e.seed, true);
    csv.row({name, fmt(s.p), fmt(s.reps), fmt(s.mean_total), fmt(s.total_se), fmt(s.stage_means[0]),
             fmt(s.stage_means[1]), fmt(s.stage_means[2]), fmt(s.stage_means[3]), fmt(s.stage_means[4]),
             fmt(s.pcs_trad), fmt(s.pcs_trad_se), fmt(s.mopcs_plugin), fmt(s.stage2_weighted_mopcs),
             fmt(s.cap_hits), fmt(s.failures)});
    for (std::size_t r = 0; r < s.runs.size(); ++r) {
      auto j = run_record_to_json(s.runs[r]);
      j.erase("wall_seconds");
      j["rep"] = r;
      runs << j.dump() << '\n';
      if (e.procedure.keep_trace) {
        for (const auto& t : s.runs[r].stage3_trace) {
          auto tj = trace_record_to_json(t);
          tj["procedure"] = name;
          tj["rep"] = r;
          tj["stage"] = 3;
          runs << tj.dump() << '\n';
        }
      }
    }
    std::cout << name << ": mean total " << fmt(s.mean_total) << ", PCS_trad " << fmt(s.pcs_trad) << '\n';
  }
  return 0;
}

int cmd_pcs_table(const Common& c, const std::string& id) {
  const std::size_t draws = c.draws.value_or(1000000);
  const std::uint64_t seed = c.seed.value_or(1);
  const auto rows = fixture_rows(id);
  const nlohmann::json cfg = {{"fixture", id}, {"draws", draws}, {"seed", seed}};
  auto f = open_out(c.out, id + ".csv");
  CsvWriter csv(f, cfg, seed);
  csv.header({"setting", "x", "y", "mu1", "counts", "pcs1", "pcs1_se", "pcs2", "pcs2_se", "pcs5", "pcs5_se",
              "pcs_trad", "mopcs", "pos"});
  for (const auto& row : rows) {
    const auto ev = evaluate_fixture(row, draws, seed);
    std::string counts;
    for (auto n : row.counts) counts += (counts.empty() ? "" : " ") + std::to_string(n);
    csv.row({row.label, fmt(row.x), fmt(row.y), fmt(row.mu1), counts, fmt(ev.pcs[0].p), fmt(ev.pcs[0].se),
             fmt(ev.pcs[1].p), fmt(ev.pcs[1].se), fmt(ev.pcs[4].p), fmt(ev.pcs[4].se),
             fmt(ev.selection.pcs_trad), fmt(ev.selection.mopcs), "alt " + std::to_string(ev.selection.tau_star + 1)});
  }
  std::cout << "wrote " << (fs::path(c.out) / (id + ".csv")).string() << '\n';
  return 0;
}

int cmd_pcc_sweep(const Common& c) {
  const auto e = load_with_overrides(c);
  const ProblemSpec spec = problem_from_json(e.problem);
  auto f = open_out(c.out, "pcc_sweep.csv");
  CsvWriter csv(f, experiment_to_json(e), e.seed);
  csv.header({"n", "p_s", "pcc", "pcc_se", "lower_bound_mean", "lower_bound_max", "occupancy_cap",
              "occupancy_rate"});
  for (std::size_t ps : e.pcc.p_s) {
    for (std::size_t n : e.pcc.n) {
      const auto pt = pcc_point(spec, ps, n, e.pcc.reps, e.seed, e.pcc.delta_c, e.pcc.estimator);
      csv.row({fmt(n), fmt(ps), fmt(pt.empirical.pcc), fmt(pt.empirical.se), fmt(pt.bound_mean), fmt(pt.bound_max),
               fmt(pt.occupancy), fmt(pt.empirical.occupancy_rate)});
    }
  }
  return 0;
}

int cmd_bench(const Common& c) {
  const auto e = load_with_overrides(c);
  const ProblemSpec spec = problem_from_json(e.problem);
  auto f = open_out(c.out, "bench.csv");
  auto timing = open_out(c.out, "bench_timing.csv");
  CsvWriter csv(f, experiment_to_json(e), e.seed);
  csv.header({"procedure", "p", "reps", "total_samples", "total_se", "pcs_trad", "mopcs_plugin", "status"});
  timing << "procedure,p,mean_wall_seconds\n";
  int failures = 0;
  for (const auto& name : e.procedures) {
    try {
      const auto s = macro_replicate(spec, name, e.procedure, e.reps, e.seed);
      csv.row({name, fmt(s.p), fmt(s.reps), fmt(s.mean_total), fmt(s.total_se), fmt(s.pcs_trad),
               fmt(s.mopcs_plugin), "ok"});
      timing << name << ',' << s.p << ',' << fmt(s.mean_wall_seconds) << '\n';
    } catch (const std::exception& ex) {
      ++failures;
      std::string msg = ex.what();
      csv.row({name, fmt(spec.p()), fmt(e.reps), "", "", "", "", "error: " + msg});
      std::cerr << name << ": " << msg << '\n';
    }
  }
  return failures ? 1 : 0;
}

int cmd_verify(const Common& c, const std::string& suite) {
  PccSweepConfig pcc;
  pcc.n = {50, 200};
  pcc.reps = 100;
  std::optional<nlohmann::json> problem;
  std::uint64_t seed = c.seed.value_or(1);
  if (!c.config.empty()) {
    const auto e = load_with_overrides(c);
    pcc = e.pcc;
    problem = e.problem;
    if (!c.seed) seed = e.seed;
  } else if (c.reps) {
    pcc.reps = *c.reps;
  }
  const std::size_t draws = c.draws.value_or(1000000);
  const auto lines = run_verify_suite(suite, draws, seed, pcc, problem ? &*problem : nullptr);
  bool ok = true;
  for (const auto& l : lines) {
    std::cout << (l.pass ? "PASS " : "FAIL ") << l.name << "  " << l.detail << '\n';
    ok = ok && l.pass;
  }
  return ok ? 0 : 1;
}

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config, "Experiment or problem JSON");
  if (needs_config) opt->required();
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--seed", c.seed, "Root RNG seed");
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--draws", c.draws, "Monte Carlo draws")->check(CLI::PositiveNumber);
  sub->add_option("--reps", c.reps, "Macro-replications")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel clustering-and-conquer ranking and selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("p3c 0.1 (") + simd::isa_name(simd::kernels().isa) + ")");

  Common c;
  std::size_t observations = 0;
  std::string fixture, suite;

  auto* gen = app.add_subcommand("gen", "Build a problem instance and write it as JSON");
  add_common(gen, c, true);
  gen->add_option("--observations", observations, "Also export this many simulated rows");

  auto* run = app.add_subcommand("run", "Run the configured procedures with macro-replications");
  add_common(run, c, true);

  auto* table = app.add_subcommand("pcs-table", "Monte Carlo PCS for the illustrative tables");
  add_common(table, c, false);
  table->add_option("fixture", fixture, "table1 or table2")->required()->check(CLI::IsMember({"table1", "table2"}));

  auto* sweep = app.add_subcommand("pcc-sweep", "Empirical PCC and lower bounds over (p_s, n)");
  add_common(sweep, c, true);

  auto* bench = app.add_subcommand("bench", "Sample-size comparison across procedures");
  add_common(bench, c, true);

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  add_common(verify, c, false);
  verify->add_option("suite", suite, "signs | pos-preference | negative-n1 | pcc-bounds")
      ->required()
      ->check(CLI::IsMember({"signs", "pos-preference", "negative-n1", "pcc-bounds"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_env_seed(c);
    if (*gen) return cmd_gen(c, observations);
    if (*run) return cmd_run(c);
    if (*table) return cmd_pcs_table(c, fixture);
    if (*sweep) return cmd_pcc_sweep(c);
    if (*bench) return cmd_bench(c);
    if (*verify) return cmd_verify(c, suite);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
