#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tasktcn/common/rng.hpp"
#include "tasktcn/data/park_record.hpp"

namespace tasktcn::data {

/// Inserts linearly interpolated rows between neighbours that are at most
/// `source_resolution` apart. Larger gaps are left open; nothing is
/// extrapolated past either end.
ParkRecord interpolate_linear(const ParkRecord& record, std::int64_t source_resolution,
                              std::int64_t target_resolution);

/// Keeps UTC days holding exactly `day_len` rows.
ParkRecord filter_complete_days(const ParkRecord& record, std::size_t day_len);

/// Number of whole UTC days that filter_complete_days would keep.
std::size_t count_complete_days(const ParkRecord& record, std::size_t day_len);

/// Boundary at midnight of the first day plus `train_days` days. Throws
/// InsufficientData when either side would be empty.
std::pair<ParkRecord, ParkRecord> split_train_test(const ParkRecord& record,
                                                   std::size_t train_days = 365);

/// Chronologically last max(1, floor(days * fraction)) whole days go to
/// validation. Requires 0 < fraction < 1 and at least one fit day left.
std::pair<ParkRecord, ParkRecord> validation_split(const ParkRecord& train, double fraction,
                                                   std::size_t day_len);

/// Per-feature z-scoring fit on training rows only. Constant features are
/// dropped and listed in dropped().
class Standardizer {
 public:
  Standardizer() = default;

  /// Throws ContractViolation if any record is tagged Split::test.
  static Standardizer fit(std::span<const ParkRecord> train);
  static Standardizer from_stats(std::vector<std::string> names, std::vector<double> mean,
                                 std::vector<double> stddev);

  /// Features are matched by name; power is never touched.
  ParkRecord apply(const ParkRecord& record) const;

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }
  const std::vector<std::string>& dropped() const { return dropped_; }
  std::size_t num_features() const { return names_.size(); }
  bool fitted() const { return !names_.empty(); }

 private:
  std::vector<std::string> names_;
  std::vector<double> mean_;
  std::vector<double> std_;
  std::vector<std::string> dropped_;
};

/// Partition of parks into n groups; fold k targets group k and trains on the rest.
struct FoldPlan {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> groups;

  std::size_t num_folds() const { return groups.size(); }
  std::vector<std::string> sources(std::size_t fold) const;
  const std::vector<std::string>& targets(std::size_t fold) const { return groups.at(fold); }
  /// Fold in which `park` is the target.
  std::size_t target_fold(const std::string& park) const;

  std::string to_json() const;
  static FoldPlan from_json(const std::string& text);
};

/// Seeded Fisher-Yates shuffle, then consecutive groups whose sizes differ by
/// at most one (larger groups first).
FoldPlan make_folds(std::span<const std::string> parks, std::size_t n, std::uint64_t seed);

/// Uniform integer in [0, n) from the top bits of one draw.
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace tasktcn::data
