#include "tasktcn/models/model_config.hpp"

#include <algorithm>
#include <sstream>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::models {

std::vector<std::size_t> width_schedule(std::size_t num_features, std::size_t width_factor) {
  constexpr std::size_t kFloor = 11;
  std::vector<std::size_t> sizes{num_features * width_factor};
  if (sizes.front() > kFloor) {
    while (sizes.back() > kFloor) {
      sizes.push_back(std::max(sizes.back() / 2, kFloor));
    }
  }
  sizes.push_back(5);
  sizes.push_back(1);
  return sizes;
}

std::size_t receptive_field(std::size_t levels, std::size_t kernel_size) {
  if (kernel_size == 0) return 1;
  return 1 + 2 * (kernel_size - 1) * ((std::size_t{1} << levels) - 1);
}

std::size_t levels_for(std::size_t seq_len, std::size_t kernel_size) {
  if (kernel_size <= 1) {
    if (seq_len > 1) throw ConfigError("kernel size 1 cannot cover more than one step");
    return 1;
  }
  std::size_t levels = 1;
  while (receptive_field(levels, kernel_size) < seq_len) ++levels;
  return levels;
}

std::size_t ModelConfig::resolved_levels() const {
  return levels != 0 ? levels : levels_for(seq_len, kernel_size);
}

std::size_t ModelConfig::resolved_channels() const {
  return channels != 0 ? channels : width_factor * num_features;
}

std::vector<std::size_t> ModelConfig::injected_blocks() const {
  const std::size_t total = resolved_levels();
  switch (embedding_position) {
    case EmbeddingPosition::first:
      return {0};
    case EmbeddingPosition::all_but_last: {
      std::vector<std::size_t> blocks;
      for (std::size_t b = 0; b + 1 < std::max<std::size_t>(total, 2); ++b) blocks.push_back(b);
      return blocks;
    }
    case EmbeddingPosition::none:
      return {};
  }
  return {};
}

void ModelConfig::validate() const {
  if (num_features == 0) throw ConfigError("model needs at least one input feature");
  if (num_tasks == 0) throw ConfigError("model needs at least one task");
  if (embedding_dim == 0) throw ConfigError("embedding dimension must be positive");
  if (width_factor != 1 && width_factor != 5 && width_factor != 10 && width_factor != 20) {
    throw ConfigError("width factor k must be one of {1, 5, 10, 20}, got " +
                      std::to_string(width_factor));
  }
  if (!(dropout >= 0.0) || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (kld_weight < 0.0) throw ConfigError("KLD weight must be non-negative");
  if (kind == ModelKind::mlp) {
    if (embedding_position == EmbeddingPosition::all_but_last) {
      throw ConfigError("the MLP concatenates the embedding at its input only");
    }
    return;
  }
  if (kernel_size != 3) throw ConfigError("task-TCN uses kernel size 3");
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  const std::size_t rf = receptive_field(resolved_levels(), kernel_size);
  if (rf < seq_len) {
    throw ConfigError("receptive field " + std::to_string(rf) + " of " +
                      std::to_string(resolved_levels()) + " levels does not cover " +
                      std::to_string(seq_len) + " steps");
  }
}

std::string ModelConfig::key() const {
  std::ostringstream os;
  os << to_string(kind) << "|" << to_string(embedding_kind) << "|" << to_string(embedding_position)
     << "|k=" << width_factor << "|D=" << embedding_dim << "|L=" << resolved_levels()
     << "|C=" << resolved_channels() << "|p=" << dropout << "|lambda=" << kld_weight;
  return os.str();
}

std::string to_string(ModelKind kind) { return kind == ModelKind::mlp ? "mlp" : "tcn"; }

std::string to_string(EmbeddingKind kind) {
  return kind == EmbeddingKind::normal ? "normal" : "bayes";
}

std::string to_string(EmbeddingPosition position) {
  switch (position) {
    case EmbeddingPosition::first:
      return "first";
    case EmbeddingPosition::all_but_last:
      return "all";
    case EmbeddingPosition::none:
      return "none";
  }
  return "first";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "mlp") return ModelKind::mlp;
  if (s == "tcn") return ModelKind::tcn;
  throw ConfigError("unknown model kind '" + s + "'");
}

EmbeddingKind parse_embedding_kind(const std::string& s) {
  if (s == "normal") return EmbeddingKind::normal;
  if (s == "bayes") return EmbeddingKind::bayes;
  throw ConfigError("unknown embedding kind '" + s + "'");
}

EmbeddingPosition parse_embedding_position(const std::string& s) {
  if (s == "first") return EmbeddingPosition::first;
  if (s == "all" || s == "all_but_last") return EmbeddingPosition::all_but_last;
  if (s == "none") return EmbeddingPosition::none;
  throw ConfigError("unknown embedding position '" + s + "'");
}

}  // namespace tasktcn::models
