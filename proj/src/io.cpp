#include "p3c/io.hpp"

#include "p3c/error.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>

namespace p3c {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const nlohmann::json& doc) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(doc.dump());
  return out.str();
}

CsvWriter::CsvWriter(std::ostream& out, const nlohmann::json& config, std::uint64_t seed) : out_(out) {
  out_ << "# config_hash=" << config_hash(config) << " seed=" << seed << '\n';
  out_ << "# config=" << config.dump() << '\n';
}

void CsvWriter::header(const std::vector<std::string>& columns) {
  columns_ = columns.size();
  row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (columns_ != 0 && cells.size() != columns_) throw Error("csv row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    const auto& c = cells[i];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (char ch : c) {
        if (ch == '"') out_ << '"';
        out_ << ch;
      }
      out_ << '"';
    } else {
      out_ << c;
    }
  }
  out_ << '\n';
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::int64_t v) { return std::to_string(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

void write_jsonl(std::ostream& out, const std::vector<nlohmann::json>& records) {
  for (const auto& r : records) out << r.dump() << '\n';
}

void write_observations_csv(std::ostream& out, const Matrix& data) {
  for (Eigen::Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << (j + 1);
  out << '\n';
  write_matrix_csv(out, data);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
    out << '\n';
  }
}

}  // namespace p3c
