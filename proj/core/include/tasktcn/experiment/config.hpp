#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tasktcn/data/park_record.hpp"
#include "tasktcn/data/synthetic.hpp"
#include "tasktcn/models/model_config.hpp"
#include "tasktcn/models/trainer.hpp"
#include "tasktcn/transfer/transfer.hpp"

namespace tasktcn::experiment {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetConfig {
  data::DatasetKind kind = data::DatasetKind::synthetic;
  /// Directory of park CSVs; empty with kind synthetic generates in memory.
  std::filesystem::path path;
  std::filesystem::path cache_dir;
  std::size_t train_days = 365;
  std::vector<std::string> feature_columns;
  std::string similarity_feature;
};

/// Declared hyperparameter grids; every combination is one model cell.
struct ModelGrid {
  std::vector<models::ModelKind> kinds{models::ModelKind::tcn};
  std::vector<models::EmbeddingKind> embedding_kinds{models::EmbeddingKind::normal,
                                                     models::EmbeddingKind::bayes};
  std::vector<models::EmbeddingPosition> positions{models::EmbeddingPosition::first,
                                                   models::EmbeddingPosition::all_but_last};
  std::vector<std::size_t> width_factors{1, 5, 10, 20};
  std::vector<std::size_t> embedding_dims{12};
  std::vector<double> kld_weights{1e-1, 1e-3, 1e-6};
  std::vector<std::size_t> epochs{50, 100};
  std::vector<std::size_t> batch_sizes_mlp{1024, 2048, 4096};
  std::vector<std::size_t> batch_sizes_tcn{32, 64, 128};
  std::size_t channels = 0;
  std::size_t levels = 0;
  double dropout = 0.2;
};

struct TrainingConfig {
  std::size_t warm_epochs = 25;
  double lr_max = 1e-3;
  double lr = 1e-4;
  double warmup_fraction = 0.3;
  double div_start = 25.0;
  double div_final = 1e4;
  double validation_fraction = 0.1;
};

struct FinetuneGrid {
  std::vector<transfer::Season> seasons{transfer::Season::winter, transfer::Season::spring,
                                        transfer::Season::summer, transfer::Season::autumn};
  std::vector<std::size_t> days{7, 14, 30, 60, 90, 365};
  std::vector<transfer::EmbeddingInit> inits{transfer::EmbeddingInit::standard_normal,
                                             transfer::EmbeddingInit::copy};
  std::vector<std::size_t> epochs_grid{1, 2, 5, 10, 20};
  std::vector<double> weight_decay_grid{0.0, 0.25, 0.5};
  double lr = 1e-4;
  std::size_t batch_size = 32;
};

/// One concrete model + training setting from the grid.
struct ModelCell {
  models::ModelConfig model;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;

  /// "tcn-normal-first" style label, unique within a sweep via key().
  std::string label() const;
  std::string key() const;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string profile = "paper";
  std::uint64_t seed = 1;
  std::uint64_t fold_seed = 7;
  std::size_t num_folds = 5;
  std::filesystem::path output_dir = "out";
  std::size_t threads = 0;  // 0: hardware concurrency
  DatasetConfig dataset;
  data::SyntheticSpec synthetic;
  ModelGrid grid;
  TrainingConfig training;
  FinetuneGrid finetune;
  /// Label of the baseline model for skill tables; empty picks the first
  /// MLP cell, else the first cell.
  std::string baseline;

  /// Exhaustive product of the grid in a fixed order.
  std::vector<ModelCell> cells(std::size_t num_features, std::size_t num_tasks,
                               std::size_t seq_len) const;
  models::TrainConfig train_config(const ModelCell& cell, std::uint64_t seed) const;
  void validate() const;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Full grids with defaults for wind/solar data.
  static ExperimentConfig paper_preset();
  /// Synthetic data and a reduced grid that finishes in minutes.
  static ExperimentConfig fast_preset();
  static ExperimentConfig preset(const std::string& profile);
};

/// Stable 64-bit digest of the resolved configuration.
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace tasktcn::experiment
