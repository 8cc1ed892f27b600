#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tasktcn/data/preprocess.hpp"
#include "tasktcn/models/task_model.hpp"

namespace tasktcn::experiment {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Everything needed to reuse a trained model on new data.
struct Checkpoint {
  std::unique_ptr<models::TaskModel> model;
  /// Park id of task m at position m - 1.
  std::vector<std::string> tasks;
  data::Standardizer standardizer;
  std::size_t fold = 0;
  std::string cell;
  std::uint64_t seed = 0;
  double val_nrmse = 0.0;

  Checkpoint() = default;
  Checkpoint(Checkpoint&&) noexcept = default;
  Checkpoint& operator=(Checkpoint&&) noexcept = default;
};

std::string model_config_to_json(const models::ModelConfig& config);
models::ModelConfig model_config_from_json(const std::string& text);

/// JSON document with schema version, config, named parameter and buffer
/// tensors, task registry and feature statistics.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws ConfigError on malformed input, a schema mismatch
/// or tensors that do not fit the stored config.
Checkpoint deserialize_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tasktcn::experiment
