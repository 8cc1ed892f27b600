#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tasktcn/evaluation/metrics.hpp"

namespace tasktcn::evaluation {

/// One line of a results table.
struct ResultRow {
  std::string model;
  std::string embedding_type;
  std::string embedding_position;
  std::string dataset;
  double skill = 0.0;
  double ratio_skill = 0.0;
  double nrmse = 0.0;
  /// Unset when the test could not run (e.g. too few parks).
  std::optional<bool> significant;
  std::string status = "ok";
};

/// Tab-separated with header: model, embedding_type, embedding_position,
/// dataset, skill, skill_ratio_of_means, nRMSE, significant, status.
void write_results_table(const std::filesystem::path& path, std::span<const ResultRow> rows);
std::string format_results_table(std::span<const ResultRow> rows);

/// Per-park metric rows as park_id, model_id, nRMSE.
void write_metric_rows(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metric_rows(const std::filesystem::path& path);

/// Whitespace-separated square matrix, one row per line.
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace tasktcn::evaluation
