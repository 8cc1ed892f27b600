#include "tasktcn/evaluation/tables.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::evaluation {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_results_table(std::span<const ResultRow> rows) {
  std::ostringstream os;
  os << "model\tembedding_type\tembedding_position\tdataset\tskill\tskill_ratio_of_means\tnRMSE\t"
        "significant\tstatus\n";
  for (const auto& r : rows) {
    os << r.model << '\t' << r.embedding_type << '\t' << r.embedding_position << '\t' << r.dataset
       << '\t' << format_number(r.skill) << '\t' << format_number(r.ratio_skill) << '\t'
       << format_number(r.nrmse) << '\t'
       << (r.significant ? (*r.significant ? "yes" : "no") : "n/a") << '\t' << r.status << '\n';
  }
  return os.str();
}

void write_results_table(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << format_results_table(rows);
}

void write_metric_rows(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "park_id\tmodel_id\tnRMSE\n";
  for (const auto& r : rows) out << r.park_id << '\t' << r.model_id << '\t' << format_number(r.nrmse) << '\n';
}

std::vector<MetricRow> read_metric_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<MetricRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    MetricRow r;
    std::string value;
    if (!std::getline(ls, r.park_id, '\t') || !std::getline(ls, r.model_id, '\t') ||
        !std::getline(ls, value)) {
      throw ParseError(path.string() + ": malformed metric row", line_no);
    }
    const auto res = std::from_chars(value.data(), value.data() + value.size(), r.nrmse);
    if (res.ec != std::errc{}) throw ParseError(path.string() + ": bad nRMSE value", line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_number(row[j]);
    out << '\n';
  }
}

}  // namespace tasktcn::evaluation
