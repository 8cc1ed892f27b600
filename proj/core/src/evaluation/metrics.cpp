#include "tasktcn/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::evaluation {

double nrmse(std::span<const float> pred, std::span<const float> target, double normalizer) {
  if (pred.empty()) throw ContractViolation("nrmse of an empty series");
  if (pred.size() != target.size()) throw ContractViolation("nrmse: length mismatch");
  if (!(normalizer > 0.0)) throw ConfigError("nrmse normalizer must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), 0.0, 1.0);
    const double d = p - static_cast<double>(target[i]);
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(pred.size())) / normalizer;
}

double skill(double reference_nrmse, double baseline_nrmse) {
  if (baseline_nrmse == 0.0) throw UndefinedSkill("baseline nRMSE is zero");
  return 1.0 - reference_nrmse / baseline_nrmse;
}

SkillTable skill(std::span<const MetricRow> reference, std::span<const MetricRow> baseline) {
  std::map<std::string, double> ref, base;
  for (const auto& r : reference) ref[r.park_id] = r.nrmse;
  for (const auto& r : baseline) base[r.park_id] = r.nrmse;
  if (ref.size() != reference.size() || base.size() != baseline.size()) {
    throw ValidationError("skill: duplicate park in metric rows");
  }
  std::set<std::string> a, b;
  for (const auto& [k, v] : ref) a.insert(k);
  for (const auto& [k, v] : base) b.insert(k);
  if (a != b) throw ValidationError("skill: reference and baseline cover different parks");
  if (ref.empty()) throw InsufficientData("skill over zero parks");
  SkillTable table;
  double sum_skill = 0.0, sum_ref = 0.0, sum_base = 0.0;
  for (const auto& [park, r] : ref) {
    const double bv = base.at(park);
    if (bv == 0.0) throw UndefinedSkill("baseline nRMSE is zero for park " + park);
    const double s = 1.0 - r / bv;
    table.per_park[park] = s;
    sum_skill += s;
    sum_ref += r;
    sum_base += bv;
  }
  table.mean_skill = sum_skill / static_cast<double>(ref.size());
  table.ratio_of_means = 1.0 - sum_ref / sum_base;
  return table;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    double alpha) {
  if (a.size() != b.size()) throw ContractViolation("wilcoxon: unpaired inputs");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  if (n < 5) {
    throw InsufficientData("wilcoxon needs at least 5 non-zero differences, got " +
                           std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });
  // Doubled average ranks stay integral under ties.
  std::vector<std::size_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const std::size_t doubled = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  std::size_t w_plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0) w_plus2 += rank2[i];
  }
  WilcoxonResult res;
  res.n = n;
  res.w_plus = static_cast<double>(w_plus2) / 2.0;
  res.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;
  res.statistic = std::min(res.w_plus, res.w_minus);
  const std::size_t wmin2 = std::min(w_plus2, total2 - w_plus2);

  if (n <= 25) {
    // count[s]: sign patterns whose positive doubled ranks sum to s.
    std::vector<double> count(total2 + 1, 0.0);
    count[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (count[s] != 0.0) count[s + rank2[i]] += count[s];
      }
      reach += rank2[i];
    }
    double tail = 0.0;
    for (std::size_t s = 0; s <= wmin2; ++s) tail += count[s];
    res.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    res.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (res.statistic - mean) / std::sqrt(var);
    res.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    res.exact = false;
  }
  res.significant = res.p_value < alpha;
  return res;
}

Matrix pairwise_distances(const std::vector<std::vector<double>>& rows) {
  const std::size_t m = rows.size();
  Matrix out(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (rows[i].size() != rows[j].size()) throw ContractViolation("rows differ in width");
      double sq = 0.0;
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        const double d = rows[i][k] - rows[j][k];
        sq += d * d;
      }
      out[i][j] = out[j][i] = std::sqrt(sq);
    }
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ContractViolation("pearson needs two equally long series of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double space_correlation(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ContractViolation("space_correlation needs equal matrices over >= 2 tasks");
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      x.push_back(a[i][j]);
      y.push_back(b[i][j]);
    }
  }
  if (x.size() < 2) throw ValidationError("correlation needs at least three tasks");
  return pearson(x, y);
}

}  // namespace tasktcn::evaluation
