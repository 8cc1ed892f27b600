#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tasktcn/embedding/embedding_table.hpp"

namespace tasktcn::models {

using embedding::EmbeddingKind;

enum class ModelKind { mlp, tcn };

/// Residual blocks that receive the transformed task embedding. `none` keeps
/// the table but injects nothing, giving a task-agnostic TCN.
enum class EmbeddingPosition { first, all_but_last, none };

struct ModelConfig {
  ModelKind kind = ModelKind::tcn;
  EmbeddingKind embedding_kind = EmbeddingKind::normal;
  EmbeddingPosition embedding_position = EmbeddingPosition::first;
  std::size_t num_features = 1;
  std::size_t num_tasks = 1;
  /// Time steps per sample (one day). Only the TCN consumes whole days.
  std::size_t seq_len = 24;
  /// Width factor k of the first hidden layer / TCN channel count.
  std::size_t width_factor = 1;
  std::size_t embedding_dim = 12;
  std::size_t kernel_size = 3;
  /// 0 selects the smallest level count whose receptive field covers seq_len.
  std::size_t levels = 0;
  /// 0 selects width_factor * num_features channels per level.
  std::size_t channels = 0;
  double dropout = 0.2;
  double kld_weight = 1e-3;
  std::uint64_t seed = 0;

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  std::size_t resolved_levels() const;
  std::size_t resolved_channels() const;
  /// Blocks (0-based) that receive the embedding.
  std::vector<std::size_t> injected_blocks() const;

  /// Canonical one-line description; also used for deterministic tie-breaking.
  std::string key() const;
};

/// Hidden sizes of the task MLP: k*F_in, halved (floor) down to a floor of 11,
/// followed by 5 and 1. A start of at most 11 skips the halving.
std::vector<std::size_t> width_schedule(std::size_t num_features, std::size_t width_factor);

/// Receptive field of `levels` residual blocks with two convolutions each and
/// dilation doubling per level: 1 + 2 (K - 1) (2^L - 1).
std::size_t receptive_field(std::size_t levels, std::size_t kernel_size);

/// Smallest L >= 1 with receptive_field(L, K) >= seq_len.
std::size_t levels_for(std::size_t seq_len, std::size_t kernel_size);

std::string to_string(ModelKind kind);
std::string to_string(EmbeddingKind kind);
std::string to_string(EmbeddingPosition position);
ModelKind parse_model_kind(const std::string& s);
EmbeddingKind parse_embedding_kind(const std::string& s);
EmbeddingPosition parse_embedding_position(const std::string& s);

}  // namespace tasktcn::models
