#include "p3c/config.hpp"

#include "p3c/error.hpp"

#include <fstream>
#include <sstream>

namespace p3c {

namespace {

const std::vector<std::string> kExperimentKeys = {"problem", "procedures", "procedure", "reps", "seed", "pcc"};

PccSweepConfig pcc_from_json(const nlohmann::json& j) {
  PccSweepConfig c;
  if (!j.is_object()) throw ConfigError("pcc config must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "p_s" && key != "n" && key != "reps" && key != "delta_c" && key != "estimator")
      throw ConfigError("unknown pcc config key '" + key + "'");
  if (j.contains("p_s")) c.p_s = j.at("p_s").get<std::vector<std::size_t>>();
  if (j.contains("n")) c.n = j.at("n").get<std::vector<std::size_t>>();
  if (j.contains("reps")) c.reps = j.at("reps").get<std::size_t>();
  if (j.contains("delta_c")) c.delta_c = j.at("delta_c").get<double>();
  if (j.contains("estimator")) c.estimator = parse_cov_method(j.at("estimator").get<std::string>());
  if (c.reps < 1) throw ConfigError("pcc reps must be positive");
  if (!(c.delta_c > 0.0)) throw ConfigError("pcc delta_c must be positive");
  return c;
}

}  // namespace

ExperimentConfig experiment_from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  try {
    if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (const auto& [key, _] : doc.items())
      if (std::find(kExperimentKeys.begin(), kExperimentKeys.end(), key) == kExperimentKeys.end())
        throw ConfigError("unknown experiment key '" + key + "'");
    if (!doc.contains("problem")) throw ConfigError("experiment config needs a 'problem' object");
    c.problem = doc.at("problem");
    if (doc.contains("procedures")) c.procedures = doc.at("procedures").get<std::vector<std::string>>();
    for (const auto& name : c.procedures) configure_procedure(name, {});
    if (doc.contains("procedure")) c.procedure = p3c_config_from_json(doc.at("procedure"));
    if (doc.contains("reps")) c.reps = doc.at("reps").get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("pcc")) c.pcc = pcc_from_json(doc.at("pcc"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  if (c.reps < 1) throw ConfigError("reps must be positive");
  return c;
}

nlohmann::json experiment_to_json(const ExperimentConfig& c) {
  return {{"problem", c.problem},
          {"procedures", c.procedures},
          {"procedure", p3c_config_to_json(c.procedure)},
          {"reps", c.reps},
          {"seed", c.seed},
          {"pcc",
           {{"p_s", c.pcc.p_s},
            {"n", c.pcc.n},
            {"reps", c.pcc.reps},
            {"delta_c", c.pcc.delta_c},
            {"estimator", cov_method_name(c.pcc.estimator)}}}};
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

ExperimentConfig load_experiment(const std::string& path) { return experiment_from_json(load_json_file(path)); }

// ---------------------------------------------------------------- fixtures

std::vector<FixtureRow> table1_rows() {
  std::vector<FixtureRow> rows;
  for (double x : {0.01, 0.02, 0.03, 0.05}) {
    for (double y : {0.0, 0.02, 0.04, 0.06}) {
      if (x == 0.05 && y == 0.06) continue;  // not positive definite
      std::ostringstream label;
      label << "x=" << x << " y=" << y;
      rows.push_back({label.str(), x, y, 2.1, {10, 10, 10, 10, 10}});
    }
  }
  return rows;
}

std::vector<FixtureRow> table2_rows() {
  std::vector<FixtureRow> rows;
  rows.push_back({"high N1=5", 0.05, 0.01, 2.1, {5, 10, 5, 5, 5}});
  for (std::int64_t n1 = 5; n1 <= 10; ++n1)
    rows.push_back({"low N1=" + std::to_string(n1), 0.05, 0.01, 2.01, {n1, 10, 5, 5, 5}});
  return rows;
}

std::vector<FixtureRow> fixture_rows(const std::string& id) {
  if (id == "table1") return table1_rows();
  if (id == "table2") return table2_rows();
  throw ConfigError("unknown fixture '" + id + "' (expected table1 or table2)");
}

}  // namespace p3c
