#include "doctest.h"

#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" P3C_CLI_PATH "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("p3c_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

fs::path small_experiment(const fs::path& dir) {
  const nlohmann::json doc = {
      {"problem",
       {{"model", "block"},
        {"cluster_sizes", {3, 3}},
        {"intra_corr", 0.6},
        {"inter_corr", 0.1},
        {"means", {1.0, 0.6, 0.5, 0.8, 0.4, 0.3}}}},
      {"procedures", {"p3c-gba", "rinott"}},
      {"procedure", {{"k", 2}, {"p_s", 6}, {"delta", 0.1}}},
      {"reps", 3},
      {"seed", 5}};
  const fs::path path = dir / "exp.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

// Data rows of a CSV, skipping the '#' provenance lines.
std::vector<std::string> data_rows(const fs::path& p) {
  std::vector<std::string> out;
  for (const auto& l : lines(p))
    if (!l.empty() && l[0] != '#') out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("argument errors exit with status 2") {
    CHECK(run("--version") == 0);
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("run") == 2);
    CHECK(run("run --config /nonexistent/p3c.json") == 2);
    CHECK(run("verify nonsense") == 2);
  }

  TEST_CASE("gen writes the problem JSON") {
    const auto dir = scratch("gen");
    const auto exp = small_experiment(dir);
    REQUIRE(run("gen --config " + exp.string() + " --out " + dir.string() + " --observations 4") == 0);
    const auto doc = nlohmann::json::parse(slurp(dir / "problem.json"));
    CHECK(doc.at("model") == "block");
    CHECK(doc.at("p") == 6);
    CHECK(data_rows(dir / "observations.csv").size() == 5);
  }

  TEST_CASE("run is reproducible and honours P3C_SEED") {
    const auto a = scratch("run_a"), b = scratch("run_b"), c = scratch("run_c");
    const auto exp = small_experiment(a);
    REQUIRE(run("run --config " + exp.string() + " --out " + a.string()) == 0);
    REQUIRE(run("run --config " + exp.string() + " --out " + b.string()) == 0);
    CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
    CHECK(slurp(a / "runs.jsonl") == slurp(b / "runs.jsonl"));

    const auto head = lines(a / "summary.csv");
    REQUIRE(head.size() >= 2);
    CHECK(head[0].rfind("# config_hash=", 0) == 0);
    CHECK(head[0].find("seed=5") != std::string::npos);
    CHECK(data_rows(a / "summary.csv").size() == 3);  // header + two procedures
    CHECK(lines(a / "runs.jsonl").size() == 6);

    REQUIRE(run("run --config " + exp.string() + " --out " + c.string(), "P3C_SEED=99") == 0);
    CHECK(lines(c / "summary.csv")[0].find("seed=99") != std::string::npos);
    CHECK(slurp(c / "runs.jsonl") != slurp(a / "runs.jsonl"));
    CHECK(run("run --config " + exp.string() + " --out " + c.string(), "P3C_SEED=abc") == 2);
  }

  TEST_CASE("pcs-table writes one row per fixture setting") {
    const auto dir = scratch("table");
    REQUIRE(run("pcs-table table2 --draws 2000 --out " + dir.string()) == 0);
    const auto rows = data_rows(dir / "table2.csv");
    CHECK(rows.size() > 1);
    CHECK(rows[0].rfind("setting,", 0) == 0);
  }

  TEST_CASE("bench keeps timing out of the main CSV") {
    const auto dir = scratch("bench");
    const auto exp = small_experiment(dir);
    REQUIRE(run("bench --config " + exp.string() + " --out " + dir.string()) == 0);
    CHECK(data_rows(dir / "bench.csv").size() == 3);
    CHECK(slurp(dir / "bench.csv").find("wall") == std::string::npos);
    const auto timing = lines(dir / "bench_timing.csv");
    CHECK(timing.size() == 3);
    CHECK(timing[0] == "procedure,p,mean_wall_seconds");
  }

  TEST_CASE("verify reports pass lines and exit status") {
    CHECK(run("verify pos-preference --draws 200000") == 0);
  }
}
