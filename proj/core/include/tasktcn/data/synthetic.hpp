#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tasktcn/data/park_record.hpp"

namespace tasktcn::data {

enum class ClusterProfile {
  wind,   // logistic response
  solar,  // affine response gated by the diurnal feature, clipped
  mixed   // clusters alternate wind, solar, wind, ...
};

struct SyntheticSpec {
  std::size_t num_tasks = 8;
  std::size_t num_clusters = 2;
  std::size_t days = 150;
  std::size_t day_len = 24;
  /// Includes the diurnal clock feature in the last column.
  std::size_t num_features = 6;
  /// Standard deviation of additive power noise (before clipping).
  double noise = 0.05;
  /// Observation noise on every weather feature.
  double feature_noise = 0.1;
  /// Spread of task mixtures around their cluster's mixture.
  double mixture_spread = 0.3;
  /// Spread of task gain and offset; 0 makes same-cluster tasks share them.
  double task_spread = 1.0;
  /// Per-step AR(1) coefficient of the latent weather signals.
  double ar_coefficient = 0.97;
  /// Steps averaged (within the day) by the power response.
  std::size_t lag_window = 6;
  ClusterProfile profile = ClusterProfile::mixed;
  std::string similarity_feature = "wind_speed_100m";
  /// Extra parks that copy task clone_of[i] (1-based): same features and
  /// response, fresh power noise.
  std::vector<std::size_t> clone_of;
  std::uint64_t seed = 0;
  std::int64_t start = 1420070400;  // 2015-01-01T00:00:00Z

  void validate() const;
  DatasetSpec dataset_spec() const;
};

/// Parks with task ids 1..num_tasks (+ clones), ids "park_01", ...; each
/// record's `cluster` holds its generating cluster. Bit-reproducible from seed.
std::vector<ParkRecord> gen_synthetic(const SyntheticSpec& spec);

std::string to_string(ClusterProfile profile);
ClusterProfile parse_cluster_profile(const std::string& s);

}  // namespace tasktcn::data
