#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tasktcn/data/park_record.hpp"

namespace tasktcn::transfer {

struct DtwResult {
  double total_cost = 0.0;
  std::size_t path_len = 0;

  double mean_cost() const { return path_len == 0 ? 0.0 : total_cost / static_cast<double>(path_len); }
};

/// Unconstrained DTW with squared local cost and steps (1,0), (0,1), (1,1).
/// Among cost-optimal paths the shortest is reported, which keeps the result
/// symmetric in its arguments. O(|b|) memory.
DtwResult dtw_distance(std::span<const double> a, std::span<const double> b);

/// Same optimum with the alignment path, as 0-based (i, j) pairs from (0, 0).
std::pair<DtwResult, std::vector<std::pair<std::size_t, std::size_t>>> dtw_path(
    std::span<const double> a, std::span<const double> b);

struct SourceChoice {
  embedding::TaskId task{};
  std::string park_id;
  double mean_cost = 0.0;
};

/// Source whose `feature` series has the smallest DTW mean cost to the
/// target's; ties go to the lowest task id. Callers pass training-period records.
SourceChoice select_source_dtw(std::span<const data::ParkRecord> sources,
                               const data::ParkRecord& target, const std::string& feature);

}  // namespace tasktcn::transfer
