#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tasktcn/autodiff/tensor.hpp"
#include "tasktcn/data/park_record.hpp"

namespace tasktcn::data {

/// Day-shaped training instances: x [N, F, T], y [N, T], one task id per day.
struct SampleSet {
  autodiff::Tensor<float> x;
  autodiff::Tensor<float> y;
  std::vector<TaskId> ids;
  /// Index of the source record in the list passed to make_samples.
  std::vector<std::size_t> record_index;

  std::size_t size() const { return ids.size(); }
  std::size_t num_features() const { return x.rank() == 3 ? x.dim(1) : 0; }
  std::size_t day_len() const { return x.rank() == 3 ? x.dim(2) : 0; }

  /// Samples at the given positions, in that order.
  SampleSet subset(std::span<const std::size_t> positions) const;
  /// Samples with the given task id, in original order.
  SampleSet for_task(TaskId id) const;
  /// Concatenation; both must share F and T.
  static SampleSet concat(const SampleSet& a, const SampleSet& b);
};

/// One sample per whole day; every record must hold a multiple of day_len rows
/// and the same number of features.
SampleSet make_samples(std::span<const ParkRecord> records, std::size_t day_len);

/// Binary snapshot of prepared records (features, power, timestamps, tags).
void save_records(const std::filesystem::path& path, std::span<const ParkRecord> records);
std::vector<ParkRecord> load_records(const std::filesystem::path& path);

/// Loads every *.csv in `dir` (sorted by name), interpolates to the target
/// resolution and keeps complete days. Task ids follow the sorted order. When
/// `cache_dir` is non-empty the result is cached under a hash of the raw bytes
/// and `spec`, and reused while that hash matches.
std::vector<ParkRecord> prepare_dataset(const std::filesystem::path& dir, const DatasetSpec& spec,
                                        const std::filesystem::path& cache_dir = {});

}  // namespace tasktcn::data
