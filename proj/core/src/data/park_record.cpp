#include "tasktcn/data/park_record.hpp"

#include <algorithm>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::data {

std::int64_t day_of(std::int64_t timestamp) {
  std::int64_t day = timestamp / kSecondsPerDay;
  if (timestamp % kSecondsPerDay < 0) --day;
  return day;
}

std::vector<float> ParkRecord::feature_series(std::size_t f) const {
  if (f >= num_features()) throw ContractViolation("feature index out of range");
  std::vector<float> out(length());
  for (std::size_t t = 0; t < length(); ++t) out[t] = feature(t, f);
  return out;
}

std::size_t ParkRecord::feature_index(const std::string& name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) {
    throw ValidationError("park " + park_id + " has no feature '" + name + "'");
  }
  return static_cast<std::size_t>(it - feature_names.begin());
}

ParkRecord ParkRecord::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > length()) throw ContractViolation("record slice out of range");
  ParkRecord out;
  out.park_id = park_id;
  out.task_id = task_id;
  out.feature_names = feature_names;
  out.split = split;
  out.cluster = cluster;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.power.assign(power.begin() + static_cast<std::ptrdiff_t>(begin),
                   power.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t f = num_features();
  out.features.assign(features.begin() + static_cast<std::ptrdiff_t>(begin * f),
                      features.begin() + static_cast<std::ptrdiff_t>(end * f));
  return out;
}

void ParkRecord::check() const {
  if (power.size() != length() || features.size() != length() * num_features()) {
    throw ValidationError("park " + park_id + ": inconsistent record shapes");
  }
  for (std::size_t t = 1; t < length(); ++t) {
    if (timestamps[t] <= timestamps[t - 1]) {
      throw ValidationError("park " + park_id + ": timestamps not strictly increasing");
    }
  }
  for (float p : power) {
    if (!(p >= 0.0f && p <= 1.0f)) {
      throw ValidationError("park " + park_id + ": power outside [0, 1]");
    }
  }
}

DatasetSpec DatasetSpec::wind() {
  DatasetSpec s;
  s.kind = DatasetKind::wind;
  s.raw_resolution = 3600;
  s.target_resolution = 900;
  s.day_len = 96;
  s.similarity_feature = "wind_speed_100m";
  return s;
}

DatasetSpec DatasetSpec::solar() {
  DatasetSpec s;
  s.kind = DatasetKind::solar;
  s.raw_resolution = 3 * 3600;
  s.target_resolution = 3600;
  s.day_len = 24;
  s.similarity_feature = "direct_radiation";
  return s;
}

DatasetSpec DatasetSpec::synthetic(std::size_t day_len, std::string similarity_feature) {
  DatasetSpec s;
  s.kind = DatasetKind::synthetic;
  s.day_len = day_len;
  s.target_resolution = kSecondsPerDay / static_cast<std::int64_t>(day_len);
  s.raw_resolution = s.target_resolution;
  s.similarity_feature = std::move(similarity_feature);
  return s;
}

void DatasetSpec::validate() const {
  if (day_len == 0 || target_resolution <= 0 || raw_resolution <= 0) {
    throw ConfigError("dataset resolutions and day length must be positive");
  }
  if (static_cast<std::int64_t>(day_len) * target_resolution != kSecondsPerDay) {
    throw ConfigError("day_len * target_resolution must equal 24 h");
  }
  if (raw_resolution % target_resolution != 0) {
    throw ConfigError("raw resolution must be a multiple of the target resolution");
  }
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::wind:
      return "wind";
    case DatasetKind::solar:
      return "solar";
    case DatasetKind::synthetic:
      return "synthetic";
  }
  return "synthetic";
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "wind") return DatasetKind::wind;
  if (s == "solar" || s == "pv") return DatasetKind::solar;
  if (s == "synthetic") return DatasetKind::synthetic;
  throw ConfigError("unknown dataset kind '" + s + "'");
}

}  // namespace tasktcn::data
