#include "tasktcn/embedding/embedding_table.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tasktcn/autodiff/ops.hpp"

namespace tasktcn::embedding {

using autodiff::Binding;
using autodiff::Parameter;
using autodiff::Tensor;
using autodiff::Var;

void validate_task_ids(std::span<const TaskId> ids, std::size_t num_tasks) {
  for (TaskId id : ids) {
    if (id.value < 1 || id.value > num_tasks) {
      throw UnknownTask("unknown task id " + std::to_string(id.value) + " (table has " +
                        std::to_string(num_tasks) + " tasks)");
    }
  }
}

float softplus(float x) { return x > 20.0f ? x : std::log1p(std::exp(x)); }

float softplus_inverse(float sigma) {
  if (sigma < 0.0f) throw ContractViolation("softplus_inverse: negative sigma");
  if (sigma > 20.0f) return sigma;
  if (sigma == 0.0f) return -1.0e4f;
  return std::max(-1.0e4f, static_cast<float>(std::log(std::expm1(static_cast<double>(sigma)))));
}

namespace {

std::vector<std::size_t> rows_of(std::span<const TaskId> ids) {
  std::vector<std::size_t> rows(ids.size());
  std::transform(ids.begin(), ids.end(), rows.begin(), [](TaskId id) { return id.row(); });
  return rows;
}

std::vector<float> normal_values(std::size_t count, Rng& rng) {
  std::vector<float> out(count);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (float& v : out) v = dist(rng);
  return out;
}

Tensor<float> normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  return Tensor<float>({rows, cols}, normal_values(rows * cols, rng));
}

/// Appends one row to a [M, D] parameter; existing entries are copied verbatim.
void append_row(Parameter& p, std::span<const float> row) {
  const std::size_t m = p.value.dim(0), d = p.value.dim(1);
  std::vector<float> data(p.value.values().begin(), p.value.values().end());
  data.insert(data.end(), row.begin(), row.end());
  p.value = Tensor<float>({m + 1, d}, std::move(data));
  p.grad = Tensor<float>(p.value.shape());
}

std::vector<float> read_row(const Parameter& p, TaskId m) {
  const std::size_t d = p.value.dim(1);
  const float* begin = p.value.data() + m.row() * d;
  return std::vector<float>(begin, begin + d);
}

void write_row(Parameter& p, TaskId m, std::span<const float> values) {
  const std::size_t d = p.value.dim(1);
  if (values.size() != d) throw ContractViolation("embedding row has wrong width");
  std::copy(values.begin(), values.end(), p.value.data() + m.row() * d);
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingTable

EmbeddingTable::EmbeddingTable(std::size_t num_tasks, std::size_t dim, Rng& rng) {
  if (num_tasks == 0 || dim == 0) throw ConfigError("embedding table needs M >= 1 and D >= 1");
  weights_ = Parameter("embedding.weight", normal_matrix(num_tasks, dim, rng), true);
}

EmbeddingTable::EmbeddingTable(Tensor<float> weights)
    : weights_("embedding.weight", std::move(weights), true) {
  if (weights_.value.rank() != 2) throw ContractViolation("embedding weights must be [M, D]");
}

std::vector<float> EmbeddingTable::row(TaskId m) const {
  const TaskId ids[] = {m};
  validate_task_ids(ids, num_tasks());
  return read_row(weights_, m);
}

Var<float> EmbeddingTable::lookup(Binding& binding, std::span<const TaskId> ids) {
  validate_task_ids(ids, num_tasks());
  const auto rows = rows_of(ids);
  return autodiff::gather_rows<float>(binding(weights_), rows);
}

void EmbeddingTable::extend(const ExtendInit& init, Rng& rng) {
  const std::vector<float> values =
      init.mode == InitMode::copy ? row(init.source) : normal_values(dim(), rng);
  append_row(weights_, values);
}

// ---------------------------------------------------------------------------
// BayesianEmbeddingTable

BayesianEmbeddingTable::BayesianEmbeddingTable(std::size_t num_tasks, std::size_t dim,
                                               double kld_weight, Rng& rng, float rho_init)
    : kld_weight_(kld_weight), rho_init_(rho_init) {
  if (num_tasks == 0 || dim == 0) throw ConfigError("embedding table needs M >= 1 and D >= 1");
  if (kld_weight < 0.0) throw ConfigError("KLD weight must be non-negative");
  mu_ = Parameter("embedding.mu", normal_matrix(num_tasks, dim, rng), true);
  rho_ = Parameter("embedding.rho", Tensor<float>({num_tasks, dim}, rho_init), true);
}

std::vector<float> BayesianEmbeddingTable::mean_row(TaskId m) const {
  const TaskId ids[] = {m};
  validate_task_ids(ids, num_tasks());
  return read_row(mu_, m);
}

std::vector<float> BayesianEmbeddingTable::sigma_row(TaskId m) const {
  const TaskId ids[] = {m};
  validate_task_ids(ids, num_tasks());
  auto row = read_row(rho_, m);
  for (float& v : row) v = softplus(v);
  return row;
}

void BayesianEmbeddingTable::set_mean_row(TaskId m, std::span<const float> values) {
  const TaskId ids[] = {m};
  validate_task_ids(ids, num_tasks());
  write_row(mu_, m, values);
}

void BayesianEmbeddingTable::set_sigma_row(TaskId m, std::span<const float> values) {
  const TaskId ids[] = {m};
  validate_task_ids(ids, num_tasks());
  std::vector<float> raw(values.begin(), values.end());
  for (float& v : raw) v = softplus_inverse(v);
  write_row(rho_, m, raw);
}

Var<float> BayesianEmbeddingTable::sample(Binding& binding, std::span<const TaskId> ids, Rng& rng) {
  Tensor<float> eps({ids.size(), dim()}, normal_values(ids.size() * dim(), rng));
  return sample_with_noise(binding, ids, eps);
}

Var<float> BayesianEmbeddingTable::sample_with_noise(Binding& binding, std::span<const TaskId> ids,
                                                     const Tensor<float>& eps) {
  validate_task_ids(ids, num_tasks());
  if (eps.shape() != autodiff::Shape{ids.size(), dim()}) {
    throw ContractViolation("sample_with_noise: eps must be [N, D]");
  }
  const auto rows = rows_of(ids);
  auto mu = autodiff::gather_rows<float>(binding(mu_), rows);
  auto sigma = autodiff::gather_rows<float>(autodiff::softplus(binding(rho_)), rows);
  return autodiff::add(mu, autodiff::mul(sigma, binding.tape().constant(eps)));
}

Var<float> BayesianEmbeddingTable::mean(Binding& binding, std::span<const TaskId> ids) {
  validate_task_ids(ids, num_tasks());
  const auto rows = rows_of(ids);
  return autodiff::gather_rows<float>(binding(mu_), rows);
}

Var<float> BayesianEmbeddingTable::kld(Binding& binding) {
  auto sigma = autodiff::softplus(binding(rho_));
  auto divergence = autodiff::kld_std_normal(binding(mu_), sigma);
  return autodiff::scale(divergence, static_cast<float>(kld_weight_));
}

void BayesianEmbeddingTable::extend(const ExtendInit& init, Rng& rng) {
  if (init.mode == InitMode::copy) {
    const TaskId ids[] = {init.source};
    validate_task_ids(ids, num_tasks());
    const auto mu_row = read_row(mu_, init.source);
    const auto rho_row = read_row(rho_, init.source);
    append_row(mu_, mu_row);
    append_row(rho_, rho_row);
    return;
  }
  append_row(mu_, normal_values(dim(), rng));
  append_row(rho_, std::vector<float>(dim(), rho_init_));
}

// ---------------------------------------------------------------------------
// TaskEmbedding

EmbeddingKind TaskEmbedding::kind() const {
  return std::holds_alternative<EmbeddingTable>(table_) ? EmbeddingKind::normal
                                                        : EmbeddingKind::bayes;
}

std::size_t TaskEmbedding::num_tasks() const {
  return std::visit([](const auto& t) { return t.num_tasks(); }, table_);
}

std::size_t TaskEmbedding::dim() const {
  return std::visit([](const auto& t) { return t.dim(); }, table_);
}

Var<float> TaskEmbedding::forward(Binding& binding, std::span<const TaskId> ids, bool sample,
                                  Rng& rng) {
  if (auto* table = deterministic()) return table->lookup(binding, ids);
  auto* table = bayesian();
  return sample ? table->sample(binding, ids, rng) : table->mean(binding, ids);
}

Var<float> TaskEmbedding::regularizer(Binding& binding) {
  if (auto* table = bayesian()) return table->kld(binding);
  return {};
}

std::vector<float> TaskEmbedding::vector(TaskId m) const {
  if (const auto* table = deterministic()) return table->row(m);
  return bayesian()->mean_row(m);
}

void TaskEmbedding::extend(const ExtendInit& init, Rng& rng) {
  std::visit([&](auto& t) { t.extend(init, rng); }, table_);
}

std::vector<Parameter*> TaskEmbedding::parameters() {
  if (auto* table = deterministic()) return {&table->weights()};
  auto* table = bayesian();
  return {&table->mu(), &table->rho()};
}

std::vector<const Parameter*> TaskEmbedding::parameters() const {
  if (const auto* table = deterministic()) return {&table->weights()};
  const auto* table = bayesian();
  return {&table->mu(), &table->rho()};
}

}  // namespace tasktcn::embedding
