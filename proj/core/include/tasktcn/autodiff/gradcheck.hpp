#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tasktcn/autodiff/tape.hpp"
#include "tasktcn/autodiff/tensor.hpp"

namespace tasktcn::autodiff {

/// Scalar-valued function of leaf variables, evaluated on a fresh tape.
using CheckedFunction = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

/// Max over all input elements of |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|)
/// where g_fd is the central finite difference with step `eps`.
double grad_check(const CheckedFunction& f, const std::vector<Tensor<double>>& inputs,
                  double eps = 1e-6);

struct GradCheckEntry {
  std::string op;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 1e-4;
  bool all_passed() const;
};

/// Checks every differentiable primitive on random shapes with dims <= 5.
GradCheckReport run_gradcheck_suite(std::uint64_t seed = 2021, double tolerance = 1e-4,
                                    std::size_t trials_per_op = 3);

}  // namespace tasktcn::autodiff
