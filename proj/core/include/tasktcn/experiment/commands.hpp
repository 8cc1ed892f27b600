#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tasktcn/autodiff/gradcheck.hpp"
#include "tasktcn/data/preprocess.hpp"
#include "tasktcn/evaluation/embedding_space.hpp"
#include "tasktcn/evaluation/tables.hpp"
#include "tasktcn/experiment/config.hpp"
#include "tasktcn/experiment/pipeline.hpp"

namespace tasktcn::experiment {

/// Writes one CSV per park plus manifest.json (generator spec, seed, cluster
/// of every park) into `out`.
std::vector<data::ParkRecord> cmd_synth(const ExperimentConfig& config,
                                        const std::filesystem::path& out, std::ostream& log);

struct LeaderboardEntry {
  std::size_t cell = 0;
  std::string key;
  std::string label;
  /// Mean validation nRMSE over folds; NaN when any fold failed.
  double val_nrmse = 0.0;
  std::string status = "ok";
};

/// Ascending validation nRMSE, ties by key; failed cells last.
std::vector<LeaderboardEntry> rank_leaderboard(std::vector<LeaderboardEntry> entries);

/// Baseline label: the configured one, else "mlp-bayes", else the first MLP
/// label, else the first label.
std::string resolve_baseline(const std::string& configured, std::span<const std::string> labels);

/// One results row per label: skill against the baseline over the shared
/// parks and the two-sided Wilcoxon verdict on their nRMSEs (unset when
/// fewer than five non-zero differences exist).
std::vector<evaluation::ResultRow> summarize(
    const std::map<std::string, std::vector<evaluation::MetricRow>>& metrics,
    const std::string& baseline, const std::string& dataset,
    const std::map<std::string, std::string>& failures = {});

struct SweepResult {
  Dataset dataset;
  data::FoldPlan plan;
  std::vector<ModelCell> cells;
  std::vector<LeaderboardEntry> leaderboard;
  /// Selected cell index per label and fold.
  std::map<std::string, std::vector<std::size_t>> selected;
  /// Per-park test nRMSE of the selected models, averaged over the folds in
  /// which the park is a source.
  std::map<std::string, std::vector<evaluation::MetricRow>> park_nrmse;
  std::vector<evaluation::ResultRow> results;
  std::string baseline;
};

/// Trains every grid cell in every fold, keeps per fold and label the cell
/// with the lowest validation nRMSE, and writes under <out>/mtl: folds.json,
/// leaderboard.tsv, selection.json, checkpoints/fold<k>/<label>.json,
/// metrics/<label>.tsv, results.tsv and manifest.json.
SweepResult cmd_train_mtl(const ExperimentConfig& config, std::ostream& log);

/// Same sweep; writes <out>/gridsearch/leaderboard.tsv and best.json holding
/// the best cell per model kind.
SweepResult cmd_gridsearch(const ExperimentConfig& config, std::ostream& log);

struct ZeroShotSelection {
  std::string label;
  std::size_t fold = 0;
  std::string target;
  std::string source;
  models::TaskId source_task{};
  double dtw_cost = 0.0;
  double nrmse = 0.0;
};

struct ZeroShotResult {
  std::vector<ZeroShotSelection> selections;
  std::vector<evaluation::ResultRow> results;
};

/// Needs the train-mtl output. DTW on the similarity feature picks a source
/// per target; the target's test year is forecast under that task id.
ZeroShotResult cmd_zero_shot(const ExperimentConfig& config, std::ostream& log);

struct FinetuneRun {
  std::string label;
  std::size_t fold = 0;
  std::string target;
  transfer::Season season = transfer::Season::full_year;
  std::size_t days = 0;
  transfer::EmbeddingInit init = transfer::EmbeddingInit::standard_normal;
  std::string status = "ok";
  transfer::FinetuneReport report;
  double nrmse = 0.0;
};

struct FinetuneResult {
  std::vector<FinetuneRun> runs;
  std::vector<evaluation::ResultRow> results;
};

/// Needs the train-mtl output. For every target, season, day budget and
/// init: extend, finetune the new embedding row, forecast the test year.
FinetuneResult cmd_finetune(const ExperimentConfig& config, std::ostream& log);

/// Distance matrices and correlation of one checkpoint into `out`. With a
/// synth manifest the cluster separation of the embedding space is added.
evaluation::EmbeddingAnalysis cmd_analyze_embedding(const std::filesystem::path& checkpoint,
                                                    const std::filesystem::path& out,
                                                    const std::filesystem::path& manifest,
                                                    std::ostream& log);

/// Prints the per-op table; true when every op passed.
bool cmd_gradcheck(std::uint64_t seed, std::ostream& log);

/// Test nRMSE of every park registered in the checkpoint.
std::vector<evaluation::MetricRow> evaluate_checkpoint(const ExperimentConfig& config,
                                                       const std::filesystem::path& checkpoint);

/// Bit-exact code version string.
std::string code_version();

}  // namespace tasktcn::experiment
