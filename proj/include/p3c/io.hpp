#pragma once

#include "p3c/linalg.hpp"

#include "json.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace p3c {

std::uint64_t fnv1a64(const std::string& bytes);
/// Hex FNV-1a of the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& doc);

/// CSV with two '#' provenance lines (hash and seed, then the materialized
/// config) ahead of the header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const nlohmann::json& config, std::uint64_t seed);
  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
  std::size_t columns_ = 0;
};

/// Shortest round-tripping decimal form.
std::string fmt(double v);
std::string fmt(std::int64_t v);
std::string fmt(std::size_t v);

void write_jsonl(std::ostream& out, const std::vector<nlohmann::json>& records);

/// Header row of 1-based alternative indices, one row per replication.
void write_observations_csv(std::ostream& out, const Matrix& data);
void write_matrix_csv(std::ostream& out, const Matrix& m);

}  // namespace p3c
