#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tasktcn/embedding/embedding_table.hpp"

namespace tasktcn::data {

using embedding::TaskId;

/// Which portion of a park's history a record holds. Statistics and model
/// selection refuse anything tagged `test`.
enum class Split { whole, train, test };

/// One park: time-indexed features [T_total, F] (row-major) and power in [0, 1].
struct ParkRecord {
  std::string park_id;
  TaskId task_id{};
  std::vector<std::int64_t> timestamps;  // unix seconds, UTC
  std::vector<std::string> feature_names;
  std::vector<float> features;
  std::vector<float> power;
  Split split = Split::whole;
  /// Generator bookkeeping for synthetic parks; -1 when unknown.
  int cluster = -1;

  std::size_t length() const { return timestamps.size(); }
  std::size_t num_features() const { return feature_names.size(); }
  float feature(std::size_t t, std::size_t f) const { return features[t * num_features() + f]; }
  float& feature(std::size_t t, std::size_t f) { return features[t * num_features() + f]; }

  /// Column f as a contiguous series.
  std::vector<float> feature_series(std::size_t f) const;
  /// Index of a named feature; throws ValidationError when absent.
  std::size_t feature_index(const std::string& name) const;
  /// Rows [begin, end) as a new record with the same metadata.
  ParkRecord slice(std::size_t begin, std::size_t end) const;
  /// Throws ValidationError unless shapes agree, time increases and power is in [0, 1].
  void check() const;
};

enum class DatasetKind { wind, solar, synthetic };

/// Column mapping and resolutions of one dataset family.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  std::int64_t raw_resolution = 3600;     // seconds
  std::int64_t target_resolution = 3600;  // seconds
  std::size_t day_len = 24;
  std::string timestamp_column = "timestamp";
  std::string power_column = "power";
  /// Consumed feature columns in order; empty takes every column between the
  /// timestamp and the power column.
  std::vector<std::string> feature_columns;
  /// Feature compared by DTW for zero-shot source selection.
  std::string similarity_feature;

  /// 1 h raw data interpolated to 15 min, 96 steps per day.
  static DatasetSpec wind();
  /// 3 h raw data interpolated to 1 h, 24 steps per day.
  static DatasetSpec solar();
  static DatasetSpec synthetic(std::size_t day_len, std::string similarity_feature);

  /// Throws ConfigError unless day_len * target_resolution is one day and
  /// the raw resolution is a multiple of the target.
  void validate() const;
};

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& s);

constexpr std::int64_t kSecondsPerDay = 86400;

/// Day index (days since 1970-01-01 UTC) of a unix timestamp.
std::int64_t day_of(std::int64_t timestamp);

}  // namespace tasktcn::data
