#include "tasktcn/models/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tasktcn/autodiff/ops.hpp"
#include "tasktcn/common/errors.hpp"
#include "tasktcn/data/preprocess.hpp"
#include "tasktcn/evaluation/metrics.hpp"

namespace tasktcn::models {

using autodiff::Tape;

ModelState ModelState::capture(TaskModel& model) {
  ModelState s;
  for (const Parameter* p : model.parameters()) s.parameters.push_back(p->value);
  for (const Buffer& b : model.buffers()) s.buffers.push_back(*b.value);
  return s;
}

void ModelState::restore(TaskModel& model) const {
  auto params = model.parameters();
  auto bufs = model.buffers();
  if (params.size() != parameters.size() || bufs.size() != buffers.size()) {
    throw ContractViolation("model state does not fit this model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = parameters[i];
  for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i].value = buffers[i];
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[data::uniform_index(rng, i)]);
  return order;
}

namespace {

std::size_t days_per_batch(const TaskModel& model, std::size_t batch_size, std::size_t day_len) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (model.config().kind == ModelKind::mlp) {
    return std::max<std::size_t>(1, (batch_size + day_len - 1) / day_len);
  }
  return batch_size;
}

/// Forward + backward of one batch; returns the loss value.
double step_gradients(TaskModel& model, Binding& binding, const data::SampleSet& batch,
                      RunMode mode, Rng& rng) {
  Var<float> pred = model.forward(binding, batch.x, batch.ids, mode, rng);
  Var<float> loss = autodiff::mse_loss(pred, batch.y.reshaped(pred.shape()));
  Var<float> reg = model.regularizer(binding);
  if (reg.valid()) loss = autodiff::add(loss, reg);
  const float value = loss.value().item();
  if (!std::isfinite(value)) throw TrainingDiverged("training loss became non-finite");
  try {
    binding.tape().backward(loss);
  } catch (const TrainingDiverged&) {
    throw;
  } catch (const NumericalFault& e) {
    throw TrainingDiverged(std::string("gradient fault: ") + e.what());
  }
  binding.accumulate_grads();
  return value;
}

}  // namespace

TrainReport train_model(TaskModel& model, const data::SampleSet& fit,
                        const data::SampleSet* validation, const TrainConfig& config) {
  if (fit.size() == 0) throw InsufficientData("no training samples");
  const std::size_t per_batch = days_per_batch(model, config.batch_size, fit.day_len());
  const std::size_t batches = (fit.size() + per_batch - 1) / per_batch;
  const std::size_t total_epochs = config.warm_epochs + config.epochs;

  auto params = model.parameters();
  std::vector<autodiff::AdamState<float>> states;
  for (const Parameter* p : params) states.emplace_back(p->value.numel());

  autodiff::OneCycleSchedule schedule{std::max<std::size_t>(1, config.warm_epochs * batches),
                                      config.lr_max, config.warmup_fraction, config.div_start,
                                      config.div_final};
  Rng noise(derive_seed(config.seed, 0x5eed));
  TrainReport report;
  std::optional<ModelState> best;
  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    const auto order = epoch_order(fit.size(), config.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * per_batch, end = std::min(fit.size(), begin + per_batch);
      const auto batch = fit.subset(std::span(order).subspan(begin, end - begin));
      for (Parameter* p : params) p->zero_grad();
      Tape<float> tape;
      Binding binding(tape);
      loss_sum += step_gradients(model, binding, batch, RunMode::train, noise);
      const double lr = epoch < config.warm_epochs ? schedule.lr(report.steps) : config.lr;
      for (std::size_t i = 0; i < params.size(); ++i) {
        autodiff::adam_step<float>(params[i]->value.values(), params[i]->grad.values(), states[i],
                                   lr, config.weight_decay);
      }
      ++report.steps;
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(batches));
    if (validation != nullptr && validation->size() > 0) {
      const double val = evaluate_nrmse(model, *validation);
      if (!std::isfinite(val)) throw TrainingDiverged("validation forecast became non-finite");
      report.val_nrmse.push_back(val);
      if (report.best_epoch == 0 || val < report.best_val_nrmse) {
        report.best_epoch = epoch + 1;
        report.best_val_nrmse = val;
        if (config.keep_best) best = ModelState::capture(model);
      }
    }
  }
  if (best) best->restore(model);
  return report;
}

EmbeddingFinetuner::EmbeddingFinetuner(TaskModel& model, TaskId task, double lr,
                                       double weight_decay, std::size_t batch_size,
                                       std::uint64_t seed)
    : model_(&model),
      task_(task),
      lr_(lr),
      weight_decay_(weight_decay),
      batch_size_(batch_size),
      seed_(seed) {
  const TaskId ids[] = {task};
  embedding::validate_task_ids(ids, model.embedding().num_tasks());
  for (const Parameter* p : model.embedding().parameters()) states_.emplace_back(p->value.dim(1));
}

double EmbeddingFinetuner::run_epoch(const data::SampleSet& fit) {
  if (fit.size() == 0) throw InsufficientData("empty finetuning window");
  const std::size_t per_batch = days_per_batch(*model_, batch_size_, fit.day_len());
  const std::size_t batches = (fit.size() + per_batch - 1) / per_batch;
  const auto order = epoch_order(fit.size(), seed_, epoch_);
  Rng noise(derive_seed(seed_, 0x10000 + epoch_));
  auto tables = model_->embedding().parameters();
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * per_batch, end = std::min(fit.size(), begin + per_batch);
    const auto batch = fit.subset(std::span(order).subspan(begin, end - begin));
    for (Parameter* p : tables) p->zero_grad();
    Tape<float> tape;
    Binding binding(tape, [](const Parameter& p) { return p.embedding; });
    loss_sum += step_gradients(*model_, binding, batch, RunMode::finetune, noise);
    for (std::size_t i = 0; i < tables.size(); ++i) {
      const std::size_t d = tables[i]->value.dim(1);
      auto row = tables[i]->value.values().subspan(task_.row() * d, d);
      auto grad = std::span<const float>(tables[i]->grad.values()).subspan(task_.row() * d, d);
      autodiff::adam_step<float>(row, grad, states_[i], lr_, weight_decay_);
    }
  }
  ++epoch_;
  return loss_sum / static_cast<double>(batches);
}

double evaluate_nrmse(TaskModel& model, const data::SampleSet& samples) {
  if (samples.size() == 0) throw InsufficientData("no samples to evaluate");
  const auto pred = model.predict(samples.x, samples.ids);
  return evaluation::nrmse(pred.values(), samples.y.values());
}

double evaluate_mse(TaskModel& model, const data::SampleSet& samples) {
  if (samples.size() == 0) throw InsufficientData("no samples to evaluate");
  const auto pred = model.predict(samples.x, samples.ids);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - samples.y[i];
    sq += d * d;
  }
  return sq / static_cast<double>(pred.numel());
}

}  // namespace tasktcn::models
