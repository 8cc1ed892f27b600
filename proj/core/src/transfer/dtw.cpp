#include "tasktcn/transfer/dtw.hpp"

#include <algorithm>
#include <limits>
#include <optional>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::transfer {

namespace {

struct Cell {
  double cost;
  std::size_t len;
};

bool better(const Cell& x, const Cell& y) {
  return x.cost < y.cost || (x.cost == y.cost && x.len < y.len);
}

Cell best_of(const Cell& a, const Cell& b, const Cell& c) {
  Cell out = a;
  if (better(b, out)) out = b;
  if (better(c, out)) out = c;
  return out;
}

constexpr Cell kUnreachable{std::numeric_limits<double>::infinity(),
                            std::numeric_limits<std::size_t>::max()};

void require_non_empty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ContractViolation("dtw of an empty series");
}

}  // namespace

DtwResult dtw_distance(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b);
  const std::size_t m = b.size();
  std::vector<Cell> prev(m, kUnreachable), cur(m, kUnreachable);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = a[i] - b[j];
      const double local = d * d;
      if (i == 0 && j == 0) {
        cur[j] = {local, 1};
        continue;
      }
      const Cell up = i > 0 ? prev[j] : kUnreachable;
      const Cell left = j > 0 ? cur[j - 1] : kUnreachable;
      const Cell diag = i > 0 && j > 0 ? prev[j - 1] : kUnreachable;
      const Cell from = best_of(diag, up, left);
      cur[j] = {local + from.cost, from.len + 1};
    }
    std::swap(prev, cur);
  }
  return {prev[m - 1].cost, prev[m - 1].len};
}

std::pair<DtwResult, std::vector<std::pair<std::size_t, std::size_t>>> dtw_path(
    std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b);
  const std::size_t n = a.size(), m = b.size();
  std::vector<Cell> table(n * m, kUnreachable);
  // 0 diag, 1 up (i-1), 2 left (j-1)
  std::vector<unsigned char> move(n * m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = a[i] - b[j];
      const double local = d * d;
      if (i == 0 && j == 0) {
        table[0] = {local, 1};
        continue;
      }
      const Cell diag = i > 0 && j > 0 ? table[(i - 1) * m + j - 1] : kUnreachable;
      const Cell up = i > 0 ? table[(i - 1) * m + j] : kUnreachable;
      const Cell left = j > 0 ? table[i * m + j - 1] : kUnreachable;
      Cell from = diag;
      unsigned char mv = 0;
      if (better(up, from)) {
        from = up;
        mv = 1;
      }
      if (better(left, from)) {
        from = left;
        mv = 2;
      }
      table[i * m + j] = {local + from.cost, from.len + 1};
      move[i * m + j] = mv;
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> path;
  std::size_t i = n - 1, j = m - 1;
  path.emplace_back(i, j);
  while (i != 0 || j != 0) {
    switch (move[i * m + j]) {
      case 0:
        --i;
        --j;
        break;
      case 1:
        --i;
        break;
      default:
        --j;
        break;
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  const Cell end = table[n * m - 1];
  return {DtwResult{end.cost, end.len}, std::move(path)};
}

SourceChoice select_source_dtw(std::span<const data::ParkRecord> sources,
                               const data::ParkRecord& target, const std::string& feature) {
  if (sources.empty()) throw InsufficientData("zero-shot selection without source parks");
  if (target.split == data::Split::test) {
    throw ContractViolation("source selection must not read test data of " + target.park_id);
  }
  const auto target_series = target.feature_series(target.feature_index(feature));
  const std::vector<double> t(target_series.begin(), target_series.end());
  std::optional<SourceChoice> best;
  for (const auto& src : sources) {
    if (src.split == data::Split::test) {
      throw ContractViolation("source selection must not read test data of " + src.park_id);
    }
    const auto series = src.feature_series(src.feature_index(feature));
    const std::vector<double> s(series.begin(), series.end());
    const double cost = dtw_distance(s, t).mean_cost();
    if (!best || cost < best->mean_cost || (cost == best->mean_cost && src.task_id < best->task)) {
      best = SourceChoice{src.task_id, src.park_id, cost};
    }
  }
  return *best;
}

}  // namespace tasktcn::transfer
