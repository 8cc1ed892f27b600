#pragma once

#include <vector>

#include "tasktcn/evaluation/metrics.hpp"
#include "tasktcn/models/task_model.hpp"

namespace tasktcn::evaluation {

/// Output [C, T] of the injection 1x1 conv of the first injecting block for
/// task m. Throws Unsupported for MLP models or TCNs without injection.
autodiff::Tensor<float> transformed_embedding(models::TaskModel& model, models::TaskId m);

/// Point embedding per task (W rows or posterior means), task order 1..M.
std::vector<std::vector<double>> embedding_vectors(const models::TaskModel& model);
/// Flattened transformed embedding per task.
std::vector<std::vector<double>> transformed_vectors(models::TaskModel& model);

struct EmbeddingAnalysis {
  Matrix embedding_distances;
  /// Empty for models without a transformed space.
  Matrix transformed_distances;
  /// One matrix per channel of the transformed space.
  std::vector<Matrix> channel_distances;
  /// Pearson r between the two spaces; NaN when undefined or unavailable.
  double correlation = 0.0;
};

EmbeddingAnalysis analyze_embedding(models::TaskModel& model);

/// Mean off-diagonal distance within and between labelled groups.
struct ClusterSeparation {
  double within = 0.0;
  double between = 0.0;
};
ClusterSeparation cluster_separation(const Matrix& distances, const std::vector<int>& labels);

}  // namespace tasktcn::evaluation
