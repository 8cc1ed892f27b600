#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tasktcn/autodiff/parameter.hpp"
#include "tasktcn/common/rng.hpp"

namespace tasktcn::embedding {

/// 1-based task identifier. New tasks are appended as M+1, M+2, ...
struct TaskId {
  std::uint32_t value = 0;

  constexpr TaskId() = default;
  constexpr explicit TaskId(std::uint32_t v) : value(v) {}
  constexpr std::size_t row() const { return static_cast<std::size_t>(value) - 1; }
  auto operator<=>(const TaskId&) const = default;
};

enum class InitMode { standard_normal, copy };

/// How the row for a newly added task is initialised.
struct ExtendInit {
  InitMode mode = InitMode::standard_normal;
  TaskId source{};

  static ExtendInit standard_normal() { return {}; }
  static ExtendInit copy_from(TaskId m) { return {InitMode::copy, m}; }
};

/// Deterministic embedding g(m) = W[m] (row selection by Kronecker delta).
class EmbeddingTable {
 public:
  /// Rows drawn from N(0, 1).
  EmbeddingTable(std::size_t num_tasks, std::size_t dim, Rng& rng);
  explicit EmbeddingTable(autodiff::Tensor<float> weights);

  std::size_t num_tasks() const { return weights_.value.dim(0); }
  std::size_t dim() const { return weights_.value.dim(1); }

  std::vector<float> row(TaskId m) const;
  /// Differentiable lookup, output [N, D]; gradient only reaches selected rows.
  autodiff::Var<float> lookup(autodiff::Binding& binding, std::span<const TaskId> ids);

  void extend(const ExtendInit& init, Rng& rng);

  autodiff::Parameter& weights() { return weights_; }
  const autodiff::Parameter& weights() const { return weights_; }

 private:
  autodiff::Parameter weights_;
};

/// Variational embedding: each row is N(mu, sigma^2) with sigma = softplus(rho),
/// regularised towards N(0, 1) with a KLD weighted by `kld_weight`.
class BayesianEmbeddingTable {
 public:
  static constexpr float kDefaultRhoInit = -5.0f;

  BayesianEmbeddingTable(std::size_t num_tasks, std::size_t dim, double kld_weight, Rng& rng,
                         float rho_init = kDefaultRhoInit);

  std::size_t num_tasks() const { return mu_.value.dim(0); }
  std::size_t dim() const { return mu_.value.dim(1); }
  double kld_weight() const { return kld_weight_; }
  float rho_init() const { return rho_init_; }

  std::vector<float> mean_row(TaskId m) const;
  std::vector<float> sigma_row(TaskId m) const;
  void set_mean_row(TaskId m, std::span<const float> values);
  /// Sets sigma exactly (sigma = 0 is representable and yields w = mu).
  void set_sigma_row(TaskId m, std::span<const float> values);

  /// mu[m] + sigma[m] * eps with one fresh standard-normal eps per instance.
  autodiff::Var<float> sample(autodiff::Binding& binding, std::span<const TaskId> ids, Rng& rng);
  /// Reparameterised draw with caller-supplied noise, eps shape [N, D].
  autodiff::Var<float> sample_with_noise(autodiff::Binding& binding, std::span<const TaskId> ids,
                                         const autodiff::Tensor<float>& eps);
  /// Posterior mean rows; used at inference.
  autodiff::Var<float> mean(autodiff::Binding& binding, std::span<const TaskId> ids);
  /// kld_weight * sum over all M rows of KL(N(mu, sigma^2) || N(0, 1)).
  autodiff::Var<float> kld(autodiff::Binding& binding);

  void extend(const ExtendInit& init, Rng& rng);

  autodiff::Parameter& mu() { return mu_; }
  autodiff::Parameter& rho() { return rho_; }
  const autodiff::Parameter& mu() const { return mu_; }
  const autodiff::Parameter& rho() const { return rho_; }

 private:
  autodiff::Parameter mu_;
  autodiff::Parameter rho_;
  double kld_weight_;
  float rho_init_;
};

enum class EmbeddingKind { normal, bayes };

/// Either embedding flavour behind one interface, as used by the models.
class TaskEmbedding {
 public:
  TaskEmbedding(EmbeddingTable table) : table_(std::move(table)) {}
  TaskEmbedding(BayesianEmbeddingTable table) : table_(std::move(table)) {}

  EmbeddingKind kind() const;
  std::size_t num_tasks() const;
  std::size_t dim() const;

  /// Embedding vectors for a batch. With `sample` set, Bayesian tables draw
  /// w = mu + sigma * eps; otherwise they return mu.
  autodiff::Var<float> forward(autodiff::Binding& binding, std::span<const TaskId> ids,
                               bool sample, Rng& rng);
  /// KLD term for Bayesian tables, invalid Var for deterministic ones.
  autodiff::Var<float> regularizer(autodiff::Binding& binding);

  /// Point estimate of g(m): W[m] or mu[m].
  std::vector<float> vector(TaskId m) const;
  void extend(const ExtendInit& init, Rng& rng);

  std::vector<autodiff::Parameter*> parameters();
  std::vector<const autodiff::Parameter*> parameters() const;

  EmbeddingTable* deterministic() { return std::get_if<EmbeddingTable>(&table_); }
  BayesianEmbeddingTable* bayesian() { return std::get_if<BayesianEmbeddingTable>(&table_); }
  const EmbeddingTable* deterministic() const { return std::get_if<EmbeddingTable>(&table_); }
  const BayesianEmbeddingTable* bayesian() const {
    return std::get_if<BayesianEmbeddingTable>(&table_);
  }

 private:
  std::variant<EmbeddingTable, BayesianEmbeddingTable> table_;
};

/// Throws UnknownTask unless every id lies in [1, num_tasks].
void validate_task_ids(std::span<const TaskId> ids, std::size_t num_tasks);

float softplus(float x);
/// Inverse of softplus; sigma = 0 maps to a large negative finite value.
float softplus_inverse(float sigma);

}  // namespace tasktcn::embedding
