#include "tasktcn/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tasktcn/common/errors.hpp"
#include "tasktcn/common/rng.hpp"

namespace tasktcn::data {

namespace {

struct TaskParams {
  std::size_t cluster = 0;
  bool solar = false;
  std::vector<double> offsets;  // per weather feature
  std::vector<double> mixture;  // per weather feature
  double gain = 1.0;
  double bias = 0.0;
};

double diurnal(std::size_t step_in_day, std::size_t day_len) {
  const double hour = 24.0 * static_cast<double>(step_in_day) / static_cast<double>(day_len);
  return std::max(0.0, std::sin(2.0 * std::numbers::pi * (hour - 6.0) / 24.0));
}

bool cluster_is_solar(ClusterProfile profile, std::size_t cluster) {
  switch (profile) {
    case ClusterProfile::wind:
      return false;
    case ClusterProfile::solar:
      return true;
    case ClusterProfile::mixed:
      return cluster % 2 == 1;
  }
  return false;
}

std::vector<double> unit_normal_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0.0;
  for (double& x : v) {
    x = dist(rng);
    norm += x * x;
  }
  norm = std::sqrt(std::max(norm, 1e-12));
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_tasks == 0 || num_clusters == 0 || num_clusters > num_tasks) {
    throw ConfigError("synthetic data needs 1 <= clusters <= tasks");
  }
  if (days == 0 || day_len == 0 || num_features < 2) {
    throw ConfigError("synthetic data needs days, day_len >= 1 and at least two features");
  }
  if (kSecondsPerDay % static_cast<std::int64_t>(day_len) != 0) {
    throw ConfigError("day_len must divide 86400 seconds");
  }
  if (noise < 0 || feature_noise < 0 || mixture_spread < 0 || task_spread < 0) {
    throw ConfigError("noise and spread parameters must be non-negative");
  }
  if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) {
    throw ConfigError("AR coefficient must lie in [0, 1)");
  }
  if (lag_window == 0) throw ConfigError("lag window must be positive");
  for (std::size_t src : clone_of) {
    if (src < 1 || src > num_tasks) throw ConfigError("clone source out of range");
  }
}

DatasetSpec SyntheticSpec::dataset_spec() const {
  return DatasetSpec::synthetic(day_len, similarity_feature);
}

std::vector<ParkRecord> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t weather = spec.num_features - 1;
  const std::size_t steps = spec.days * spec.day_len;
  const std::int64_t resolution = kSecondsPerDay / static_cast<std::int64_t>(spec.day_len);

  // Latent weather per cluster: stationary unit-variance AR(1) signals.
  std::vector<std::vector<double>> latent(spec.num_clusters);
  std::vector<std::vector<double>> cluster_mixture(spec.num_clusters);
  const double phi = spec.ar_coefficient;
  const double innovation = std::sqrt(1.0 - phi * phi);
  for (std::size_t c = 0; c < spec.num_clusters; ++c) {
    Rng rng(derive_seed(spec.seed, c));
    std::normal_distribution<double> dist(0.0, 1.0);
    auto& z = latent[c];
    z.resize(steps * weather);
    for (std::size_t j = 0; j < weather; ++j) z[j] = dist(rng);
    for (std::size_t t = 1; t < steps; ++t) {
      for (std::size_t j = 0; j < weather; ++j) {
        z[t * weather + j] = phi * z[(t - 1) * weather + j] + innovation * dist(rng);
      }
    }
    cluster_mixture[c] = unit_normal_vector(weather, rng);
  }

  const std::size_t base_tasks = spec.num_tasks;
  std::vector<TaskParams> params(base_tasks);
  for (std::size_t m = 0; m < base_tasks; ++m) {
    Rng rng(derive_seed(spec.seed, 1000 + m));
    std::normal_distribution<double> dist(0.0, 1.0);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    TaskParams& p = params[m];
    p.cluster = m * spec.num_clusters / base_tasks;
    p.solar = cluster_is_solar(spec.profile, p.cluster);
    p.offsets.resize(weather);
    for (double& o : p.offsets) o = 0.1 * spec.task_spread * dist(rng);
    p.mixture = cluster_mixture[p.cluster];
    const double scale = spec.mixture_spread / std::sqrt(static_cast<double>(weather));
    for (double& a : p.mixture) a += scale * dist(rng);
    p.gain = 0.8 + 0.4 * spec.task_spread * unit(rng);
    p.bias = 0.4 * spec.task_spread * unit(rng);
  }

  const std::size_t total = base_tasks + spec.clone_of.size();
  std::vector<ParkRecord> parks;
  parks.reserve(total);
  for (std::size_t m = 0; m < total; ++m) {
    const std::size_t source = m < base_tasks ? m : spec.clone_of[m - base_tasks] - 1;
    const TaskParams& p = params[source];
    Rng feature_rng(derive_seed(spec.seed, 2000 + source));
    Rng power_rng(derive_seed(spec.seed, 3000 + m));
    std::normal_distribution<double> dist(0.0, 1.0);

    ParkRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "park_%02zu", m + 1);
    r.park_id = id;
    r.task_id = TaskId(static_cast<std::uint32_t>(m + 1));
    r.cluster = static_cast<int>(p.cluster);
    r.feature_names.push_back(spec.similarity_feature);
    for (std::size_t j = 1; j < weather; ++j) r.feature_names.push_back("nwp_" + std::to_string(j));
    r.feature_names.push_back("diurnal");
    r.timestamps.resize(steps);
    r.features.resize(steps * spec.num_features);
    r.power.resize(steps);

    const auto& z = latent[p.cluster];
    for (std::size_t t = 0; t < steps; ++t) {
      r.timestamps[t] = spec.start + static_cast<std::int64_t>(t) * resolution;
      for (std::size_t j = 0; j < weather; ++j) {
        const double noise = spec.feature_noise * dist(feature_rng);
        r.features[t * spec.num_features + j] =
            static_cast<float>(z[t * weather + j] + p.offsets[j] + noise);
      }
      r.features[t * spec.num_features + weather] =
          static_cast<float>(diurnal(t % spec.day_len, spec.day_len));
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t day_start = t - t % spec.day_len;
      const std::size_t first = t + 1 >= spec.lag_window ? std::max(day_start, t + 1 - spec.lag_window)
                                                         : day_start;
      double s = 0.0;
      for (std::size_t j = 0; j < weather; ++j) {
        double avg = 0.0;
        for (std::size_t u = first; u <= t; ++u) avg += r.features[u * spec.num_features + j];
        s += p.mixture[j] * avg / static_cast<double>(t - first + 1);
      }
      double power;
      if (p.solar) {
        const double d = r.features[t * spec.num_features + weather];
        power = p.gain * d * (0.6 + 0.3 * s + p.bias);
      } else {
        power = p.gain / (1.0 + std::exp(-(2.5 * s + 2.0 * p.bias)));
      }
      power = std::clamp(power, 0.0, 1.0) + spec.noise * dist(power_rng);
      r.power[t] = static_cast<float>(std::clamp(power, 0.0, 1.0));
    }
    parks.push_back(std::move(r));
  }
  return parks;
}

std::string to_string(ClusterProfile profile) {
  switch (profile) {
    case ClusterProfile::wind:
      return "wind";
    case ClusterProfile::solar:
      return "solar";
    case ClusterProfile::mixed:
      return "mixed";
  }
  return "mixed";
}

ClusterProfile parse_cluster_profile(const std::string& s) {
  if (s == "wind") return ClusterProfile::wind;
  if (s == "solar") return ClusterProfile::solar;
  if (s == "mixed") return ClusterProfile::mixed;
  throw ConfigError("unknown cluster profile '" + s + "'");
}

}  // namespace tasktcn::data
