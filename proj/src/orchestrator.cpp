#include "p3c/orchestrator.hpp"

#include "p3c/error.hpp"
#include "p3c/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace p3c {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Seed streams.
constexpr std::uint64_t kSourceStream = 0xA0;
constexpr std::uint64_t kStage1Stream = 1;
constexpr std::uint64_t kStage2Stream = 2;
constexpr std::uint64_t kStage3Stream = 3;
constexpr std::uint64_t kPuristStage2Stream = 0xA2;
constexpr std::uint64_t kPuristStage3Stream = 0xA3;

}  // namespace

PartitionMode parse_partition_mode(const std::string& name) {
  if (name == "ac_plus" || name == "ac+") return PartitionMode::ac_plus;
  if (name == "random") return PartitionMode::random;
  if (name == "truth") return PartitionMode::truth;
  if (name == "single") return PartitionMode::single;
  throw ConfigError("unknown partition mode '" + name + "'");
}

const char* partition_mode_name(PartitionMode m) {
  switch (m) {
    case PartitionMode::ac_plus: return "ac_plus";
    case PartitionMode::random: return "random";
    case PartitionMode::truth: return "truth";
    case PartitionMode::single: return "single";
  }
  return "?";
}

void P3cConfig::validate(std::size_t p) const {
  if (n0 < 2) throw ConfigError("n0 must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw ConfigError("alpha1 and alpha2 must be positive");
  if (std::abs(alpha1 + alpha2 - alpha) > 1e-9) throw ConfigError("alpha1 + alpha2 must equal alpha");
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  if (k < 1) throw ConfigError("k must be at least 1");
  if ((partition == PartitionMode::ac_plus || partition == PartitionMode::random) &&
      static_cast<std::size_t>(k) > p)
    throw ConfigError("k exceeds the number of alternatives");
  if (mode == StopMode::fixed_budget && budget <= 0) throw ConfigError("fixed budget mode needs budget > 0");
  if (delta < 0.0) throw ConfigError("delta must be nonnegative");
  if ((stage2.engine == Engine::rinott || stage3.engine == Engine::rinott) && !(rinott_delta > 0.0))
    throw ConfigError("rinott engine needs rinott_delta > 0");
  if ((stage2.engine == Engine::rinott || stage3.engine == Engine::rinott) && mode == StopMode::fixed_budget)
    throw ConfigError("rinott engine has no fixed-budget mode");
  if (stage2.epsilon < 0.0 || stage3.epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
}

// ---------------------------------------------------------------- config JSON

namespace {

nlohmann::json stage_to_json(const StageEngineConfig& s) {
  return {{"engine", engine_name(s.engine)},   {"method", pcs_method_name(s.method)},
          {"draws", s.draws},                  {"epsilon", s.epsilon},
          {"batch", s.batch},                  {"refresh_correlation", s.refresh_correlation}};
}

StageEngineConfig stage_from_json(const nlohmann::json& j, StageEngineConfig s) {
  if (!j.is_object()) throw ConfigError("stage engine config must be an object");
  if (j.contains("engine")) s.engine = parse_engine(j.at("engine").get<std::string>());
  if (j.contains("method")) s.method = parse_pcs_method(j.at("method").get<std::string>());
  if (j.contains("draws")) s.draws = j.at("draws").get<std::size_t>();
  if (j.contains("epsilon")) s.epsilon = j.at("epsilon").get<double>();
  if (j.contains("batch")) s.batch = j.at("batch").get<std::int64_t>();
  if (j.contains("refresh_correlation")) s.refresh_correlation = j.at("refresh_correlation").get<bool>();
  return s;
}

}  // namespace

nlohmann::json p3c_config_to_json(const P3cConfig& c) {
  return {{"n0", c.n0},
          {"partition", partition_mode_name(c.partition)},
          {"k", c.k},
          {"p_s", c.p_s},
          {"n_cluster", c.n_cluster},
          {"estimator", cov_method_name(c.estimator)},
          {"fresh_queries", c.fresh_queries},
          {"stage2", stage_to_json(c.stage2)},
          {"stage3", stage_to_json(c.stage3)},
          {"alpha", c.alpha},
          {"alpha1", c.alpha1},
          {"alpha2", c.alpha2},
          {"delta", c.delta},
          {"rinott_delta", c.rinott_delta},
          {"mode", c.mode == StopMode::fixed_precision ? "fixed_precision" : "fixed_budget"},
          {"budget", c.budget},
          {"hard_cap_factor", c.hard_cap_factor},
          {"discard_stage1", c.discard_stage1},
          {"stage3_fresh", c.stage3_fresh},
          {"workers", c.workers},
          {"seed", c.seed},
          {"keep_trace", c.keep_trace}};
}

P3cConfig p3c_config_from_json(const nlohmann::json& j, P3cConfig c) {
  try {
    if (!j.is_object()) throw ConfigError("procedure config must be an object");
    static const std::vector<std::string> known = {
        "n0",    "partition",    "k",      "p_s",    "n_cluster",       "estimator",       "fresh_queries",
        "stage2", "stage3",      "alpha",  "alpha1", "alpha2",          "delta",           "rinott_delta",
        "mode",  "budget",       "hard_cap_factor",  "discard_stage1",  "stage3_fresh",    "workers",
        "seed",  "keep_trace"};
    for (const auto& [key, _] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ConfigError("unknown procedure config key '" + key + "'");
    if (j.contains("n0")) c.n0 = j.at("n0").get<std::int64_t>();
    if (j.contains("partition")) c.partition = parse_partition_mode(j.at("partition").get<std::string>());
    if (j.contains("k")) c.k = j.at("k").get<int>();
    if (j.contains("p_s")) c.p_s = j.at("p_s").get<std::size_t>();
    if (j.contains("n_cluster")) c.n_cluster = j.at("n_cluster").get<std::size_t>();
    if (j.contains("estimator")) c.estimator = parse_cov_method(j.at("estimator").get<std::string>());
    if (j.contains("fresh_queries")) c.fresh_queries = j.at("fresh_queries").get<bool>();
    if (j.contains("stage2")) c.stage2 = stage_from_json(j.at("stage2"), c.stage2);
    if (j.contains("stage3")) c.stage3 = stage_from_json(j.at("stage3"), c.stage3);
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("alpha1")) c.alpha1 = j.at("alpha1").get<double>();
    if (j.contains("alpha2")) c.alpha2 = j.at("alpha2").get<double>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("rinott_delta")) c.rinott_delta = j.at("rinott_delta").get<double>();
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "fixed_precision") c.mode = StopMode::fixed_precision;
      else if (m == "fixed_budget") c.mode = StopMode::fixed_budget;
      else throw ConfigError("unknown stopping mode '" + m + "'");
    }
    if (j.contains("budget")) c.budget = j.at("budget").get<std::int64_t>();
    if (j.contains("hard_cap_factor")) c.hard_cap_factor = j.at("hard_cap_factor").get<double>();
    if (j.contains("discard_stage1")) c.discard_stage1 = j.at("discard_stage1").get<bool>();
    if (j.contains("stage3_fresh")) c.stage3_fresh = j.at("stage3_fresh").get<bool>();
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("keep_trace")) c.keep_trace = j.at("keep_trace").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("procedure config: ") + e.what());
  }
  return c;
}

const std::vector<std::string>& known_procedures() {
  static const std::vector<std::string> names = {"p3c-gba", "p3c-ea", "p3c-cba", "dc-ea", "dc-cba", "dc-gba",
                                                 "rinott",  "gba",    "ea",      "cba",   "p3c",    "dc"};
  return names;
}

P3cConfig configure_procedure(const std::string& procedure, P3cConfig c) {
  auto both = [&](Engine e) {
    c.stage2.engine = e;
    c.stage3.engine = e;
  };
  if (procedure == "p3c") {
    c.partition = PartitionMode::ac_plus;
  } else if (procedure == "dc") {
    c.partition = PartitionMode::random;
  } else if (procedure == "p3c-gba" || procedure == "p3c-ea" || procedure == "p3c-cba") {
    c.partition = PartitionMode::ac_plus;
    both(procedure == "p3c-gba" ? Engine::gba : procedure == "p3c-ea" ? Engine::equal : Engine::cba);
  } else if (procedure == "dc-gba" || procedure == "dc-ea" || procedure == "dc-cba") {
    c.partition = PartitionMode::random;
    both(procedure == "dc-gba" ? Engine::gba : procedure == "dc-ea" ? Engine::equal : Engine::cba);
  } else if (procedure == "rinott" || procedure == "gba" || procedure == "ea" || procedure == "cba") {
    c.partition = PartitionMode::single;
    both(procedure == "rinott" ? Engine::rinott
         : procedure == "gba"  ? Engine::gba
         : procedure == "ea"   ? Engine::equal
                               : Engine::cba);
  } else {
    throw ConfigError("unknown procedure '" + procedure + "'");
  }
  return c;
}

// ---------------------------------------------------------------- records

nlohmann::json run_record_to_json(const RunRecord& r) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters) {
    std::vector<std::size_t> members;
    for (auto m : c.members) members.push_back(m + 1);
    clusters.push_back({{"members", members},
                        {"local_best", c.local_best + 1},
                        {"samples", c.samples},
                        {"bound_raw", c.bound_raw},
                        {"mopcs", c.mopcs},
                        {"success", c.success},
                        {"cap_hit", c.cap_hit},
                        {"iterations", c.iterations},
                        {"worker", c.worker}});
  }
  std::vector<std::size_t> bests;
  for (auto b : r.local_bests) bests.push_back(b + 1);
  return {{"procedure", r.procedure},
          {"selected", r.selected + 1},
          {"correct", r.correct},
          {"samples",
           {{"stage0", r.samples.stage0},
            {"stage1", r.samples.stage1},
            {"stage1_overhead", r.samples.stage1_overhead},
            {"stage2", r.samples.stage2},
            {"stage3", r.samples.stage3},
            {"total", r.samples.total()}}},
          {"wall_seconds", r.wall_seconds},
          {"partition", partition_to_json(r.partition)},
          {"clusters", clusters},
          {"local_bests", bests},
          {"final_bound_raw", r.final_bound_raw},
          {"final_mopcs", r.final_mopcs},
          {"success", r.success},
          {"cap_hit", r.cap_hit},
          {"stage2_weighted_mopcs", r.stage2_weighted_mopcs}};
}

// ---------------------------------------------------------------- P3C

namespace {

GbaConfig scope_config(const StageEngineConfig& s, const P3cConfig& cfg, double alpha, std::uint64_t seed,
                       std::size_t scope_size) {
  GbaConfig g;
  g.engine = s.engine;
  g.method = s.method;
  g.draws = s.draws;
  g.n0 = cfg.n0;
  g.batch = s.batch;
  g.epsilon = s.epsilon;
  g.refresh_correlation = s.refresh_correlation;
  g.keep_trace = cfg.keep_trace;
  g.seed = seed;
  g.stop.mode = cfg.mode;
  g.stop.alpha = alpha;
  g.stop.iz_delta = cfg.delta;
  g.stop.hard_cap = static_cast<std::int64_t>(std::llround(cfg.hard_cap_factor * static_cast<double>(scope_size)));
  return g;
}

ScopeResult run_scope(const SampleSource& src, std::span<const std::size_t> scope,
                      std::span<const std::int64_t> prior, const StageEngineConfig& s, const P3cConfig& cfg,
                      double alpha, std::uint64_t seed, std::int64_t budget_total, bool restart) {
  // Rinott is a complete two-stage procedure; prior replications only
  // raise the final counts.
  if (s.engine == Engine::rinott) return rinott_two_stage(src, scope, prior, cfg.n0, alpha, cfg.rinott_delta);
  GbaConfig g = scope_config(s, cfg, alpha, seed, scope.size());
  g.restart = restart;
  g.stop.budget = budget_total;
  return run_gba(src, scope, prior, g);
}

}  // namespace

RunRecord run_p3c(const ProblemSpec& spec, const P3cConfig& cfg) {
  const std::size_t p = spec.p();
  cfg.validate(p);
  RunRecord rec;
  rec.procedure = "p3c";
  const SampleSource source(spec, rng::derive_seed(cfg.seed, kSourceStream));
  std::vector<std::int64_t> prefix(p, 0);

  // Stage 0.
  auto t0 = Clock::now();
  std::fill(prefix.begin(), prefix.end(), cfg.n0);
  rec.samples.stage0 = cfg.n0 * static_cast<std::int64_t>(p);
  rec.wall_seconds[0] = seconds_since(t0);

  // Stage 1.
  t0 = Clock::now();
  try {
    switch (cfg.partition) {
      case PartitionMode::single:
        rec.partition.labels.assign(p, 0);
        rec.partition.k = 1;
        rec.partition.source = PartitionSource::truth;
        break;
      case PartitionMode::truth:
        rec.partition.labels.assign(spec.partition().begin(), spec.partition().end());
        rec.partition.k = spec.k();
        rec.partition.source = PartitionSource::truth;
        break;
      case PartitionMode::random:
        rec.partition = random_equal_partition(p, cfg.k, rng::derive_seed(cfg.seed, kStage1Stream));
        break;
      case PartitionMode::ac_plus: {
        if (cfg.k == 1) {
          rec.partition.labels.assign(p, 0);
          rec.partition.k = 1;
          rec.partition.source = PartitionSource::ac_plus;
          break;
        }
        if (static_cast<std::size_t>(cfg.k) == p) {
          rec.partition.labels.resize(p);
          std::iota(rec.partition.labels.begin(), rec.partition.labels.end(), 0);
          rec.partition.k = cfg.k;
          rec.partition.source = PartitionSource::ac_plus;
          break;
        }
        AcPlusConfig ac;
        ac.k = cfg.k;
        ac.p_s = cfg.p_s > 0 ? cfg.p_s : std::min(p, std::max<std::size_t>(2 * cfg.k, 50));
        ac.n = cfg.n_cluster > 0 ? cfg.n_cluster : static_cast<std::size_t>(cfg.n0);
        ac.estimator = cfg.estimator;
        ac.fresh_queries = cfg.fresh_queries;
        ac.workers = cfg.workers;
        ac.seed = rng::derive_seed(cfg.seed, kStage1Stream);
        const auto res = ac_plus(source, ac, prefix);
        for (std::size_t i = 0; i < p; ++i) {
          rec.samples.stage1 += res.prefix[i] - prefix[i];
          prefix[i] = res.prefix[i];
        }
        rec.samples.stage1_overhead = res.prototype_copy_samples;
        rec.partition = res.partition;
        break;
      }
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(1, e.what());
  }
  rec.wall_seconds[1] = seconds_since(t0);

  // Stage 2.
  t0 = Clock::now();
  const auto groups = rec.partition.members();
  const std::size_t k = groups.size();
  rec.clusters.resize(k);
  const SampleSource purist2(spec, rng::derive_seed(cfg.seed, kPuristStage2Stream));
  const SampleSource& src2 = cfg.discard_stage1 ? purist2 : source;

  // Fixed-budget split.
  std::vector<std::int64_t> share(k, 0);
  std::int64_t reserve3 = 0;
  if (cfg.mode == StopMode::fixed_budget) {
    const std::int64_t spent = rec.samples.total();
    const std::int64_t pool_all = std::max<std::int64_t>(0, cfg.budget - spent);
    if (k >= 2) reserve3 = static_cast<std::int64_t>(std::floor(static_cast<double>(pool_all) * cfg.alpha2 / cfg.alpha));
    const std::int64_t pool2 = pool_all - reserve3;
    std::vector<double> w(k);
    for (std::size_t c = 0; c < k; ++c)
      w[c] = static_cast<double>(pool2) * static_cast<double>(groups[c].size()) / static_cast<double>(p);
    share = largest_remainder(w, pool2);
    for (std::size_t c = 0; c < k; ++c)
      if (groups[c].size() < 2) {
        reserve3 += share[c];
        share[c] = 0;
      }
  }

  std::vector<ScopeResult> scope_results(k);
  std::vector<std::exception_ptr> errors(k);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].size() > groups[b].size(); });
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, k));
  const std::uint64_t seed2 = rng::derive_seed(cfg.seed, kStage2Stream);

  auto run_cluster = [&](std::size_t c) {
    const auto& mem = groups[c];
    if (mem.size() == 1) {
      scope_results[c].selected = mem[0];
      scope_results[c].success = true;
      scope_results[c].final_bound_raw = 1.0;
      scope_results[c].final_mopcs = 1.0;
      scope_results[c].final_prefix = {cfg.discard_stage1 ? 0 : prefix[mem[0]]};
      return;
    }
    std::vector<std::int64_t> prior;
    if (!cfg.discard_stage1)
      for (auto i : mem) prior.push_back(prefix[i]);
    std::int64_t budget_total = share[c];
    for (auto v : prior) budget_total += v;
    try {
      scope_results[c] =
          run_scope(src2, mem, prior, cfg.stage2, cfg, cfg.alpha1, rng::derive_seed(seed2, c), budget_total, false);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (workers == 1) {
    for (std::size_t c : order) {
      run_cluster(c);
      rec.clusters[c].worker = 0;
    }
  } else {
    std::vector<std::vector<std::size_t>> assigned(workers);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      assigned[pos % workers].push_back(order[pos]);
      rec.clusters[order[pos]].worker = pos % workers;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c : assigned[w]) run_cluster(c);
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (errors[c]) {
      try {
        std::rethrow_exception(errors[c]);
      } catch (const std::exception& e) {
        throw StageError(2, "cluster " + std::to_string(c + 1) + ": " + e.what());
      }
    }
  }

  double weighted = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& out = rec.clusters[c];
    const auto& sr = scope_results[c];
    out.members = groups[c];
    out.local_best = sr.selected;
    out.samples = sr.new_samples;
    out.bound_raw = sr.final_bound_raw;
    out.mopcs = sr.final_mopcs;
    out.success = sr.success;
    out.cap_hit = sr.cap_hit;
    out.iterations = sr.iterations;
    rec.samples.stage2 += sr.new_samples;
    rec.local_bests.push_back(sr.selected);
    weighted += sr.final_mopcs * static_cast<double>(groups[c].size());
    if (!cfg.discard_stage1)
      for (std::size_t t = 0; t < groups[c].size(); ++t) prefix[groups[c][t]] = sr.final_prefix[t];
  }
  rec.stage2_weighted_mopcs = weighted / static_cast<double>(p);
  rec.wall_seconds[2] = seconds_since(t0);

  // Stage 3.
  t0 = Clock::now();
  if (k == 1) {
    rec.selected = rec.local_bests[0];
    rec.final_bound_raw = scope_results[0].final_bound_raw;
    rec.final_mopcs = scope_results[0].final_mopcs;
    rec.success = scope_results[0].success;
    rec.cap_hit = scope_results[0].cap_hit;
  } else {
    const SampleSource purist3(spec, rng::derive_seed(cfg.seed, kPuristStage3Stream));
    const SampleSource& src3 = cfg.stage3_fresh ? purist3 : (cfg.discard_stage1 ? purist2 : source);
    std::vector<std::int64_t> prior;
    if (!cfg.stage3_fresh) {
      for (std::size_t c = 0; c < k; ++c) {
        const auto& mem = groups[c];
        const auto pos = static_cast<std::size_t>(std::find(mem.begin(), mem.end(), rec.local_bests[c]) - mem.begin());
        prior.push_back(scope_results[c].final_prefix[pos]);
      }
    }
    std::int64_t budget_total = reserve3;
    for (auto v : prior) budget_total += v;
    ScopeResult sr;
    try {
      sr = run_scope(src3, rec.local_bests, prior, cfg.stage3, cfg, cfg.alpha2,
                     rng::derive_seed(cfg.seed, kStage3Stream), budget_total, !cfg.stage3_fresh);
    } catch (const std::exception& e) {
      throw StageError(3, e.what());
    }
    rec.samples.stage3 = sr.new_samples;
    rec.selected = sr.selected;
    rec.final_bound_raw = sr.final_bound_raw;
    rec.final_mopcs = sr.final_mopcs;
    rec.success = sr.success;
    rec.cap_hit = sr.cap_hit;
    rec.stage3_trace = std::move(sr.trace);
    if (!cfg.stage3_fresh && !cfg.discard_stage1)
      for (std::size_t c = 0; c < k; ++c) prefix[rec.local_bests[c]] = sr.final_prefix[c];
  }
  rec.wall_seconds[3] = seconds_since(t0);
  for (const auto& c : rec.clusters) rec.cap_hit = rec.cap_hit || c.cap_hit;
  rec.correct = rec.selected == spec.best_index();
  rec.final_prefix = std::move(prefix);
  return rec;
}

RunRecord run_divide_conquer(const ProblemSpec& spec, const P3cConfig& cfg) {
  P3cConfig c = cfg;
  c.partition = PartitionMode::random;
  auto rec = run_p3c(spec, c);
  rec.procedure = "dc";
  return rec;
}

RunRecord run_procedure(const ProblemSpec& spec, const std::string& procedure, const P3cConfig& base) {
  const P3cConfig cfg = configure_procedure(procedure, base);
  auto rec = run_p3c(spec, cfg);
  rec.procedure = procedure;
  return rec;
}

MacroSummary macro_replicate(const ProblemSpec& spec, const std::string& procedure, const P3cConfig& base,
                             std::size_t reps, std::uint64_t seed, bool keep_runs) {
  if (reps < 1) throw ConfigError("macro_replicate needs reps >= 1");
  MacroSummary s;
  s.procedure = procedure;
  s.p = spec.p();
  s.reps = reps;
  std::vector<double> totals;
  std::size_t correct = 0;
  double mopcs = 0.0, weighted = 0.0, wall = 0.0;
  std::array<double, 5> stage{};
  for (std::size_t r = 0; r < reps; ++r) {
    P3cConfig cfg = base;
    cfg.seed = rng::derive_seed(seed, r);
    RunRecord rec = run_procedure(spec, procedure, cfg);
    totals.push_back(static_cast<double>(rec.samples.total()));
    correct += rec.correct ? 1 : 0;
    mopcs += std::clamp(rec.final_bound_raw, 0.0, 1.0);
    weighted += rec.stage2_weighted_mopcs;
    for (double w : rec.wall_seconds) wall += w;
    stage[0] += static_cast<double>(rec.samples.stage0);
    stage[1] += static_cast<double>(rec.samples.stage1);
    stage[2] += static_cast<double>(rec.samples.stage1_overhead);
    stage[3] += static_cast<double>(rec.samples.stage2);
    stage[4] += static_cast<double>(rec.samples.stage3);
    s.cap_hits += rec.cap_hit ? 1 : 0;
    s.failures += rec.success ? 0 : 1;
    if (keep_runs) s.runs.push_back(std::move(rec));
  }
  const double n = static_cast<double>(reps);
  s.mean_total = std::accumulate(totals.begin(), totals.end(), 0.0) / n;
  double ss = 0.0;
  for (double t : totals) ss += (t - s.mean_total) * (t - s.mean_total);
  s.total_se = reps > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  s.ci_low = s.mean_total - 1.96 * s.total_se;
  s.ci_high = s.mean_total + 1.96 * s.total_se;
  s.pcs_trad = static_cast<double>(correct) / n;
  s.pcs_trad_se = std::sqrt(s.pcs_trad * (1.0 - s.pcs_trad) / n);
  s.mopcs_plugin = mopcs / n;
  s.stage2_weighted_mopcs = weighted / n;
  s.mean_wall_seconds = wall / n;
  for (std::size_t i = 0; i < 5; ++i) s.stage_means[i] = stage[i] / n;
  s.mean_stage.stage0 = std::llround(s.stage_means[0]);
  s.mean_stage.stage1 = std::llround(s.stage_means[1]);
  s.mean_stage.stage1_overhead = std::llround(s.stage_means[2]);
  s.mean_stage.stage2 = std::llround(s.stage_means[3]);
  s.mean_stage.stage3 = std::llround(s.stage_means[4]);
  return s;
}

}  // namespace p3c
