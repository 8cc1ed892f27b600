#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tasktcn/autodiff/optim.hpp"
#include "tasktcn/data/samples.hpp"
#include "tasktcn/models/task_model.hpp"

namespace tasktcn::models {

struct TrainConfig {
  /// Epochs under the one-cycle policy, then `epochs` at the constant rate.
  std::size_t warm_epochs = 25;
  std::size_t epochs = 50;
  /// Days per step for the TCN; rows per step for the MLP (rounded up to days).
  std::size_t batch_size = 64;
  double lr_max = 1e-3;
  double lr = 1e-4;
  double warmup_fraction = 0.3;
  double div_start = 25.0;
  double div_final = 1e4;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  /// Restore the epoch with the lowest validation nRMSE at the end.
  bool keep_best = true;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_nrmse;
  std::size_t best_epoch = 0;  // 1-based; 0 when no validation data or no epoch ran
  double best_val_nrmse = 0.0;
  std::size_t steps = 0;
};

/// Parameter values plus buffers, restorable into the same model.
struct ModelState {
  std::vector<Tensor<float>> parameters;
  std::vector<Tensor<float>> buffers;

  static ModelState capture(TaskModel& model);
  void restore(TaskModel& model) const;
};

/// Joint training of every parameter in RunMode::train with MSE (+ KLD for
/// Bayesian embeddings). Throws TrainingDiverged on a non-finite loss or
/// gradient.
TrainReport train_model(TaskModel& model, const data::SampleSet& fit,
                        const data::SampleSet* validation, const TrainConfig& config);

/// Updates only row `task` of the embedding tables at a constant rate with
/// decoupled weight decay; the body runs in RunMode::finetune so batch-norm
/// statistics and all other parameters stay untouched. Calls `on_epoch`
/// after each epoch (1-based).
class EmbeddingFinetuner {
 public:
  EmbeddingFinetuner(TaskModel& model, TaskId task, double lr, double weight_decay,
                     std::size_t batch_size, std::uint64_t seed);

  /// Mean training loss of the epoch.
  double run_epoch(const data::SampleSet& fit);
  std::size_t epochs_done() const { return epoch_; }

 private:
  TaskModel* model_;
  TaskId task_;
  double lr_;
  double weight_decay_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::vector<autodiff::AdamState<float>> states_;
};

/// Mean nRMSE over all samples (predictions flattened, clipped to [0, 1]).
double evaluate_nrmse(TaskModel& model, const data::SampleSet& samples);
/// MSE of the raw eval-mode forecast.
double evaluate_mse(TaskModel& model, const data::SampleSet& samples);

/// Deterministic permutation of [0, n) for epoch `epoch` of a run.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace tasktcn::models
