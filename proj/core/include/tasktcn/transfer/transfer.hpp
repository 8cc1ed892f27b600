#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tasktcn/data/park_record.hpp"
#include "tasktcn/data/samples.hpp"
#include "tasktcn/models/task_model.hpp"

namespace tasktcn::transfer {

using embedding::TaskId;

/// Forecast for unseen target samples using the conditioning of `selected`.
/// Only tasks 1..num_sources are eligible; the model is not modified.
autodiff::Tensor<float> zero_shot_forecast(models::TaskModel& model, const autodiff::Tensor<float>& x,
                                           TaskId selected, std::size_t num_sources);

/// Task among 1..num_sources whose conditioning gives the lowest MSE on the
/// target subset; ties go to the lowest id. Throws InsufficientData when the
/// subset is empty.
TaskId select_source_by_mse(models::TaskModel& model, const data::SampleSet& subset,
                            std::size_t num_sources);

/// Chronologically first `fraction` of the samples (at least one).
data::SampleSet leading_fraction(const data::SampleSet& samples, double fraction);

enum class Season { winter, spring, summer, autumn, full_year };

std::string to_string(Season season);
Season parse_season(const std::string& s);

/// `days` whole days from the first day on or after the record start that
/// falls in `season` (meteorological: Dec-Feb, Mar-May, Jun-Aug, Sep-Nov).
/// days = 365 or Season::full_year returns the whole record. Throws
/// InsufficientData when the record cannot supply the window.
data::ParkRecord season_window(const data::ParkRecord& record, Season season, std::size_t days,
                               std::size_t day_len);

enum class EmbeddingInit { standard_normal, copy };

struct FinetuneConfig {
  Season season = Season::full_year;
  std::size_t days = 30;
  std::vector<std::size_t> epochs_grid{1, 2, 5, 10, 20};
  std::vector<double> weight_decay_grid{0.0, 0.25, 0.5};
  EmbeddingInit init = EmbeddingInit::standard_normal;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  /// 0.2 for a 7-day budget, 0.1 otherwise.
  double validation_fraction() const { return days == 7 ? 0.2 : 0.1; }
};

struct GridCell {
  std::size_t epochs = 0;
  double weight_decay = 0.0;
  double val_nrmse = 0.0;
};

struct FinetuneReport {
  TaskId task{};
  /// Copy source when init = copy.
  TaskId copy_source{};
  std::vector<GridCell> grid;
  GridCell chosen;
  std::uint64_t frozen_hash_before = 0;
  std::uint64_t frozen_hash_after = 0;

  bool frozen_unchanged() const { return frozen_hash_before == frozen_hash_after; }
};

/// Finetunes the embedding row of `task` (already appended) on `fit` and
/// keeps the grid cell with the lowest nRMSE on `validation`; ties prefer
/// fewer epochs, then less weight decay. Every other parameter and every other
/// row is left bit-identical.
FinetuneReport finetune_embedding(models::TaskModel& model, TaskId task,
                                  const data::SampleSet& fit, const data::SampleSet& validation,
                                  const FinetuneConfig& config);

/// Window, split, extend and finetune in one call. `target_train` is the
/// standardised training record of the new park; `num_sources` tasks exist
/// before the call. The new task id is M + 1.
FinetuneReport adapt_to_target(models::TaskModel& model, const data::ParkRecord& target_train,
                               std::size_t day_len, const FinetuneConfig& config);

}  // namespace tasktcn::transfer
