#include "tasktcn/evaluation/embedding_space.hpp"

#include <cmath>
#include <limits>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::evaluation {

using models::TaskId;

autodiff::Tensor<float> transformed_embedding(models::TaskModel& model, TaskId m) {
  auto* tcn = dynamic_cast<models::TaskTcn*>(&model);
  if (tcn == nullptr) throw Unsupported("transformed embedding needs a task-TCN");
  return tcn->transformed_embedding(m);
}

std::vector<std::vector<double>> embedding_vectors(const models::TaskModel& model) {
  std::vector<std::vector<double>> out;
  const auto& emb = model.embedding();
  for (std::size_t m = 1; m <= emb.num_tasks(); ++m) {
    const auto v = emb.vector(TaskId(static_cast<std::uint32_t>(m)));
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

std::vector<std::vector<double>> transformed_vectors(models::TaskModel& model) {
  std::vector<std::vector<double>> out;
  for (std::size_t m = 1; m <= model.embedding().num_tasks(); ++m) {
    const auto t = transformed_embedding(model, TaskId(static_cast<std::uint32_t>(m)));
    out.emplace_back(t.values().begin(), t.values().end());
  }
  return out;
}

EmbeddingAnalysis analyze_embedding(models::TaskModel& model) {
  EmbeddingAnalysis out;
  out.embedding_distances = pairwise_distances(embedding_vectors(model));
  out.correlation = std::numeric_limits<double>::quiet_NaN();
  auto* tcn = dynamic_cast<models::TaskTcn*>(&model);
  if (tcn == nullptr) return out;
  std::vector<std::vector<double>> transformed;
  try {
    transformed = transformed_vectors(model);
  } catch (const Unsupported&) {
    return out;
  }
  out.transformed_distances = pairwise_distances(transformed);
  const std::size_t m = transformed.size();
  const std::size_t steps = tcn->config().seq_len;
  const std::size_t channels = m == 0 ? 0 : transformed.front().size() / steps;
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<std::vector<double>> column(m);
    for (std::size_t i = 0; i < m; ++i) column[i] = {transformed[i][c * steps]};
    out.channel_distances.push_back(pairwise_distances(column));
  }
  try {
    out.correlation = space_correlation(out.embedding_distances, out.transformed_distances);
  } catch (const Error&) {
  }
  return out;
}

ClusterSeparation cluster_separation(const Matrix& distances, const std::vector<int>& labels) {
  if (labels.size() != distances.size()) throw ContractViolation("one label per task required");
  double within = 0.0, between = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i] == labels[j]) {
        within += distances[i][j];
        ++nw;
      } else {
        between += distances[i][j];
        ++nb;
      }
    }
  }
  if (nw == 0 || nb == 0) throw ValidationError("need pairs both within and between groups");
  return {within / static_cast<double>(nw), between / static_cast<double>(nb)};
}

}  // namespace tasktcn::evaluation
