#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tasktcn::evaluation {

/// sqrt(mean((clip(pred, 0, 1) - target)^2)) / normalizer. Targets are
/// capacity-normalised already, hence the default normalizer of 1.
double nrmse(std::span<const float> pred, std::span<const float> target, double normalizer = 1.0);

struct MetricRow {
  std::string park_id;
  std::string model_id;
  double nrmse = 0.0;
};

struct SkillTable {
  std::map<std::string, double> per_park;
  /// Mean of the per-park skills.
  double mean_skill = 0.0;
  /// 1 - mean(ref) / mean(base), reported alongside for comparison.
  double ratio_of_means = 0.0;
};

/// Per-park skill 1 - ref / base over the shared park set. Throws
/// ValidationError if the park sets differ and UndefinedSkill when a baseline
/// nRMSE is zero.
SkillTable skill(std::span<const MetricRow> reference, std::span<const MetricRow> baseline);
/// Scalar form used for single parks.
double skill(double reference_nrmse, double baseline_nrmse);

struct WilcoxonResult {
  /// min(W+, W-)
  double statistic = 0.0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;  // pairs after dropping zero differences
  double p_value = 1.0;
  bool exact = true;
  bool significant = false;
};

/// Two-sided signed-rank test on paired values. Zero differences are dropped;
/// tied magnitudes get average ranks. The exact null distribution is used for
/// n <= 25, the tie-corrected normal approximation above. Throws
/// InsufficientData when fewer than five pairs remain.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    double alpha = 0.05);

/// Square matrix of Euclidean distances between rows.
using Matrix = std::vector<std::vector<double>>;
Matrix pairwise_distances(const std::vector<std::vector<double>>& rows);

/// Pearson correlation over the strict upper triangles of two equally sized
/// distance matrices. Throws ValidationError when either side is constant.
double space_correlation(const Matrix& a, const Matrix& b);
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace tasktcn::evaluation
