#include "tasktcn/models/task_model.hpp"

#include <algorithm>

#include "tasktcn/common/errors.hpp"
#include "tasktcn/common/hash.hpp"

namespace tasktcn::models {

using autodiff::Tape;

TaskModel::TaskModel(ModelConfig config, Rng& rng)
    : config_(std::move(config)), embedding_(make_embedding(config_, rng)) {}

TaskEmbedding TaskModel::make_embedding(const ModelConfig& config, Rng& rng) {
  config.validate();
  if (config.embedding_kind == EmbeddingKind::bayes) {
    return embedding::BayesianEmbeddingTable(config.num_tasks, config.embedding_dim,
                                             config.kld_weight, rng);
  }
  return embedding::EmbeddingTable(config.num_tasks, config.embedding_dim, rng);
}

Tensor<float> TaskModel::predict(const Tensor<float>& x, std::span<const TaskId> ids,
                                 std::size_t chunk) {
  if (x.rank() != 3 || x.dim(0) != ids.size()) {
    throw ContractViolation("predict: x must be [N, F, T] with one id per sample");
  }
  const std::size_t n = x.dim(0), f = x.dim(1), t = x.dim(2);
  Tensor<float> out({n, t});
  Rng unused(0);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t stop = std::min(n, start + chunk);
    const std::size_t stride = f * t;
    Tensor<float> part({stop - start, f, t},
                       std::vector<float>(x.data() + start * stride, x.data() + stop * stride));
    Tape<float> tape;
    Binding binding(tape, [](const Parameter&) { return false; });
    Var<float> y = forward(binding, part, ids.subspan(start, stop - start), RunMode::eval, unused);
    std::copy(y.value().values().begin(), y.value().values().end(), out.data() + start * t);
  }
  return out;
}

TaskId TaskModel::add_task(const embedding::ExtendInit& init, Rng& rng) {
  embedding_.extend(init, rng);
  config_.num_tasks = embedding_.num_tasks();
  return TaskId(static_cast<std::uint32_t>(config_.num_tasks));
}

std::size_t TaskModel::parameter_count() {
  std::size_t total = 0;
  for (const Parameter* p : parameters()) total += p->value.numel();
  return total;
}

std::uint64_t TaskModel::parameter_hash(bool include_embedding) {
  Fnv1a h;
  for (const Parameter* p : parameters()) {
    if (p->embedding && !include_embedding) continue;
    h.update(p->name);
    h.update(p->value.values());
  }
  return h.digest();
}

std::uint64_t TaskModel::frozen_hash(std::size_t rows) {
  Fnv1a h;
  for (const Parameter* p : parameters()) {
    h.update(p->name);
    auto values = p->value.values();
    if (p->embedding) {
      const std::size_t width = p->value.dim(1);
      values = values.subspan(0, std::min(values.size(), rows * width));
    }
    h.update(values);
  }
  return h.digest();
}

// ---------------------------------------------------------------------------
// TaskMlp

TaskMlp::TaskMlp(ModelConfig config) : TaskMlp(config, Rng(config.seed)) {}

TaskMlp::TaskMlp(ModelConfig config, Rng&& rng) : TaskModel(std::move(config), rng) {
  if (config_.kind != ModelKind::mlp) throw ConfigError("TaskMlp needs kind = mlp");
  widths_ = width_schedule(config_.num_features, config_.width_factor);
  input_norm_ = BatchNormLayer("input_norm", config_.num_features);
  std::size_t in = config_.num_features + config_.embedding_dim;
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    if (i > 0) norms_.emplace_back("hidden" + std::to_string(i) + ".norm", in);
    hidden_.emplace_back("hidden" + std::to_string(i) + ".linear", in, widths_[i], rng);
    in = widths_[i];
  }
  head_ = LinearLayer("head", in, widths_.back(), rng);
}

Var<float> TaskMlp::forward(Binding& b, const Tensor<float>& x, std::span<const TaskId> ids,
                            RunMode mode, Rng& rng) {
  if (x.rank() != 3 || x.dim(0) != ids.size() || x.dim(1) != config_.num_features) {
    throw ContractViolation("mlp forward: x must be [N, " + std::to_string(config_.num_features) +
                            ", T] with one id per sample");
  }
  embedding::validate_task_ids(ids, embedding_.num_tasks());
  const std::size_t n = x.dim(0), f = x.dim(1), t = x.dim(2);
  Tensor<float> rows({n * t, f});
  std::vector<TaskId> row_ids(n * t);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      row_ids[i * t + s] = ids[i];
      for (std::size_t c = 0; c < f; ++c) rows[(i * t + s) * f + c] = x[(i * f + c) * t + s];
    }
  }
  const Phase phase = body_phase(mode);
  Var<float> h = input_norm_.forward(b, b.tape().constant(rows), phase);
  Var<float> e = embedding_.forward(b, row_ids, sample_embedding(mode), rng);
  h = autodiff::concat_features(h, e);
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    if (i > 0) h = norms_[i - 1].forward(b, h, phase);
    h = autodiff::relu(hidden_[i].forward(b, h));
  }
  return autodiff::reshape(head_.forward(b, h), {n, t});
}

std::vector<Parameter*> TaskMlp::parameters() {
  std::vector<Parameter*> out = embedding_.parameters();
  input_norm_.collect(out);
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    if (i > 0) norms_[i - 1].collect(out);
    hidden_[i].collect(out);
  }
  head_.collect(out);
  return out;
}

std::vector<Buffer> TaskMlp::buffers() {
  std::vector<Buffer> out;
  input_norm_.collect(out);
  for (auto& norm : norms_) norm.collect(out);
  return out;
}

std::unique_ptr<TaskModel> TaskMlp::clone() const { return std::make_unique<TaskMlp>(*this); }

// ---------------------------------------------------------------------------
// TaskTcn

TaskTcn::TaskTcn(ModelConfig config) : TaskTcn(config, Rng(config.seed)) {}

TaskTcn::TaskTcn(ModelConfig config, Rng&& rng) : TaskModel(std::move(config), rng) {
  if (config_.kind != ModelKind::tcn) throw ConfigError("TaskTcn needs kind = tcn");
  const std::size_t levels = config_.resolved_levels();
  const std::size_t channels = config_.resolved_channels();
  const auto injected = config_.injected_blocks();
  input_norm_ = BatchNormLayer("input_norm", config_.num_features);
  std::size_t in = config_.num_features;
  for (std::size_t l = 0; l < levels; ++l) {
    const bool inject = std::find(injected.begin(), injected.end(), l) != injected.end();
    blocks_.emplace_back("block" + std::to_string(l), in, channels, config_.kernel_size,
                         std::size_t{1} << l, static_cast<float>(config_.dropout),
                         config_.embedding_dim, inject, rng);
    in = channels;
  }
  head_ = CausalConv("head", channels, 1, 1, 1, false, rng);
}

Var<float> TaskTcn::forward(Binding& b, const Tensor<float>& x, std::span<const TaskId> ids,
                            RunMode mode, Rng& rng) {
  if (x.rank() != 3 || x.dim(0) != ids.size() || x.dim(1) != config_.num_features ||
      x.dim(2) != config_.seq_len) {
    throw ContractViolation("tcn forward: x must be [N, " + std::to_string(config_.num_features) +
                            ", " + std::to_string(config_.seq_len) +
                            "] with one id per sample, got " + autodiff::shape_to_string(x.shape()));
  }
  embedding::validate_task_ids(ids, embedding_.num_tasks());
  const Phase phase = body_phase(mode);
  Var<float> h = input_norm_.forward(b, b.tape().constant(x), phase);
  Var<float> e;
  if (!config_.injected_blocks().empty()) {
    e = autodiff::repeat_time(embedding_.forward(b, ids, sample_embedding(mode), rng),
                              config_.seq_len);
  }
  for (auto& block : blocks_) h = block.forward(b, h, e, phase, rng);
  return autodiff::reshape(head_.forward(b, h), {x.dim(0), x.dim(2)});
}

std::vector<Parameter*> TaskTcn::parameters() {
  std::vector<Parameter*> out = embedding_.parameters();
  input_norm_.collect(out);
  for (auto& block : blocks_) block.collect(out);
  head_.collect(out);
  return out;
}

std::vector<Buffer> TaskTcn::buffers() {
  std::vector<Buffer> out;
  input_norm_.collect(out);
  return out;
}

std::unique_ptr<TaskModel> TaskTcn::clone() const { return std::make_unique<TaskTcn>(*this); }

void TaskTcn::zero_injection() {
  for (auto& block : blocks_) {
    if (block.injection) block.injection->zero();
  }
}

Tensor<float> TaskTcn::transformed_embedding(TaskId m) {
  auto it = std::find_if(blocks_.begin(), blocks_.end(),
                         [](const ResidualBlock& blk) { return blk.injection.has_value(); });
  if (it == blocks_.end()) throw Unsupported("model has no embedding injection");
  const CausalConv& conv = *it->injection;
  const std::vector<float> e = embedding_.vector(m);
  const std::size_t channels = conv.out_channels(), d = conv.in_channels(), t = config_.seq_len;
  Tensor<float> out({channels, t});
  for (std::size_t c = 0; c < channels; ++c) {
    float acc = conv.bias.value[c];
    for (std::size_t k = 0; k < d; ++k) acc += conv.weight.value[c * d + k] * e[k];
    for (std::size_t s = 0; s < t; ++s) out[c * t + s] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<TaskModel> make_model(const ModelConfig& config) {
  config.validate();
  if (config.kind == ModelKind::mlp) return std::make_unique<TaskMlp>(config);
  return std::make_unique<TaskTcn>(config);
}

}  // namespace tasktcn::models
