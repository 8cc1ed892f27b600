#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tasktcn/embedding/embedding_table.hpp"
#include "tasktcn/models/layers.hpp"
#include "tasktcn/models/model_config.hpp"

namespace tasktcn::models {

using embedding::TaskEmbedding;
using embedding::TaskId;

/// train: batch statistics, dropout, sampled Bayesian embeddings.
/// eval: running statistics, no dropout, posterior-mean embeddings.
/// finetune: body as in eval, embeddings sampled as in train.
enum class RunMode { train, eval, finetune };

class TaskModel {
 public:
  TaskModel(ModelConfig config, Rng& rng);
  virtual ~TaskModel() = default;

  const ModelConfig& config() const { return config_; }
  TaskEmbedding& embedding() { return embedding_; }
  const TaskEmbedding& embedding() const { return embedding_; }

  /// x: [N, F, T] standardised features, one task id per sample. Returns [N, T].
  virtual Var<float> forward(Binding& b, const Tensor<float>& x, std::span<const TaskId> ids,
                             RunMode mode, Rng& rng) = 0;
  /// Every trainable parameter, embedding tables included.
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<Buffer> buffers() = 0;
  virtual std::unique_ptr<TaskModel> clone() const = 0;

  /// Eval-mode forecast without recording gradients, evaluated in chunks.
  Tensor<float> predict(const Tensor<float>& x, std::span<const TaskId> ids,
                        std::size_t chunk = 512);

  /// Appends task M+1 to the embedding table; nothing else changes.
  TaskId add_task(const embedding::ExtendInit& init, Rng& rng);

  /// Embedding KLD for Bayesian tables, invalid Var otherwise.
  Var<float> regularizer(Binding& b) { return embedding_.regularizer(b); }

  std::size_t parameter_count();
  /// FNV-1a over names and raw bytes of the selected parameters.
  std::uint64_t parameter_hash(bool include_embedding = true);
  /// Hash of all non-embedding parameters plus embedding rows [1, rows].
  std::uint64_t frozen_hash(std::size_t rows);

 protected:
  static TaskEmbedding make_embedding(const ModelConfig& config, Rng& rng);
  static Phase body_phase(RunMode mode) {
    return mode == RunMode::train ? Phase::train : Phase::eval;
  }
  static bool sample_embedding(RunMode mode) { return mode != RunMode::eval; }

  ModelConfig config_;
  TaskEmbedding embedding_;
};

/// Embedding concatenated with batch-normed features, then the width schedule.
class TaskMlp final : public TaskModel {
 public:
  explicit TaskMlp(ModelConfig config);

  /// The MLP maps every time step independently; x may have any T.
  Var<float> forward(Binding& b, const Tensor<float>& x, std::span<const TaskId> ids,
                     RunMode mode, Rng& rng) override;
  std::vector<Parameter*> parameters() override;
  std::vector<Buffer> buffers() override;
  std::unique_ptr<TaskModel> clone() const override;

  const std::vector<std::size_t>& widths() const { return widths_; }

 private:
  TaskMlp(ModelConfig config, Rng&& rng);

  std::vector<std::size_t> widths_;
  BatchNormLayer input_norm_;
  std::vector<BatchNormLayer> norms_;  // one per hidden layer after the first
  std::vector<LinearLayer> hidden_;
  LinearLayer head_;
};

class TaskTcn final : public TaskModel {
 public:
  explicit TaskTcn(ModelConfig config);

  /// x must have T == config().seq_len.
  Var<float> forward(Binding& b, const Tensor<float>& x, std::span<const TaskId> ids,
                     RunMode mode, Rng& rng) override;
  std::vector<Parameter*> parameters() override;
  std::vector<Buffer> buffers() override;
  std::unique_ptr<TaskModel> clone() const override;

  std::vector<ResidualBlock>& blocks() { return blocks_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }

  /// Sets every injection conv to zero; the output becomes task independent.
  void zero_injection();
  /// Output of the first injecting block's 1x1 conv for task m: [C, T].
  Tensor<float> transformed_embedding(TaskId m);

 private:
  TaskTcn(ModelConfig config, Rng&& rng);

  BatchNormLayer input_norm_;
  std::vector<ResidualBlock> blocks_;
  CausalConv head_;
};

std::unique_ptr<TaskModel> make_model(const ModelConfig& config);

}  // namespace tasktcn::models
