#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tasktcn/data/preprocess.hpp"
#include "tasktcn/data/samples.hpp"
#include "tasktcn/evaluation/metrics.hpp"
#include "tasktcn/experiment/config.hpp"
#include "tasktcn/models/trainer.hpp"

namespace tasktcn::experiment {

/// Whole park records in park-id order; task ids 1..P follow that order.
struct Dataset {
  std::string name;
  data::DatasetSpec spec;
  std::vector<data::ParkRecord> records;

  std::vector<std::string> park_ids() const;
  const data::ParkRecord& park(const std::string& id) const;
};

/// Generates the synthetic set in memory when dataset.path is empty,
/// otherwise reads the CSV directory (cluster labels from a synth manifest
/// when one is present).
Dataset load_dataset(const ExperimentConfig& config);

/// One fold: sources renumbered 1..M in fold order, everything standardised
/// with statistics of the sources' training rows.
struct FoldData {
  std::size_t fold = 0;
  std::size_t day_len = 24;
  data::Standardizer standardizer;
  std::vector<data::ParkRecord> source_train;
  std::vector<data::ParkRecord> source_test;
  /// Targets keep task id 0; they have no row in a source model.
  std::vector<data::ParkRecord> target_train;
  std::vector<data::ParkRecord> target_test;
  data::SampleSet fit;
  data::SampleSet validation;

  std::vector<std::string> source_parks() const;
};

FoldData prepare_fold(const Dataset& dataset, const data::FoldPlan& plan, std::size_t fold,
                      std::size_t train_days, double validation_fraction);

/// Day samples of one record, every sample tagged with `id`.
data::SampleSet record_samples(const data::ParkRecord& record, models::TaskId id,
                               std::size_t day_len);

/// Test nRMSE of `record` forecast under task `id`.
double record_nrmse(models::TaskModel& model, const data::ParkRecord& record, models::TaskId id,
                    std::size_t day_len);

/// Seed of grid cell `cell` in fold `fold`.
std::uint64_t cell_seed(std::uint64_t master, std::size_t fold, std::size_t cell);

struct CellRun {
  std::size_t fold = 0;
  std::size_t cell = 0;
  ModelCell spec;
  std::uint64_t seed = 0;
  /// "ok" or "failed: <reason>".
  std::string status = "ok";
  double val_nrmse = 0.0;
  models::TrainReport report;
  /// Test nRMSE of every source park.
  std::vector<evaluation::MetricRow> test;
  std::unique_ptr<models::TaskModel> model;

  bool ok() const { return status == "ok"; }
};

/// Builds and trains one cell on the fold. Divergence and invalid configs are
/// reported through `status` instead of thrown.
CellRun run_cell(const ExperimentConfig& config, const FoldData& fold, const ModelCell& cell,
                 std::size_t cell_index);

}  // namespace tasktcn::experiment
