#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::autodiff {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter tensor.
template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;
  AdamHyper hyper;

  explicit AdamState(std::size_t size = 0, AdamHyper h = {}) : m(size, T{0}), v(size, T{0}), hyper(h) {}
};

/// One Adam update with decoupled weight decay:
///   p <- p * (1 - lr * weight_decay) - lr * m_hat / (sqrt(v_hat) + eps)
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               double weight_decay = 0.0) {
  if (!(lr > 0.0)) throw ContractViolation("adam_step: learning rate must be positive");
  if (weight_decay < 0.0) throw ContractViolation("adam_step: negative weight decay");
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractViolation("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double update = (m / bc1) / (std::sqrt(v / bc2) + state.hyper.eps);
    double p = static_cast<double>(params[i]);
    if (weight_decay != 0.0) p *= decay;
    params[i] = static_cast<T>(p - lr * update);
  }
}

/// Cosine one-cycle policy: anneal from lr_max/div_start up to lr_max over the
/// warmup fraction, then down to lr_max/div_final at the last step.
struct OneCycleSchedule {
  std::size_t total_steps = 1;
  double lr_max = 1e-3;
  double warmup_fraction = 0.3;
  double div_start = 25.0;
  double div_final = 1e4;

  std::size_t peak_step() const {
    if (total_steps <= 1) return 0;
    return static_cast<std::size_t>(std::floor(warmup_fraction * static_cast<double>(total_steps - 1)));
  }

  double lr(std::size_t step) const {
    if (total_steps == 0 || step >= total_steps) {
      throw ContractViolation("one_cycle_lr: step " + std::to_string(step) + " outside [0, " +
                              std::to_string(total_steps) + ")");
    }
    const std::size_t peak = peak_step();
    if (step <= peak) {
      if (peak == 0) return lr_max;
      const double pct = static_cast<double>(step) / static_cast<double>(peak);
      return cosine(lr_max / div_start, lr_max, pct);
    }
    const double span = static_cast<double>(total_steps - 1 - peak);
    const double pct = static_cast<double>(step - peak) / span;
    return cosine(lr_max, lr_max / div_final, pct);
  }

 private:
  static double cosine(double from, double to, double pct) {
    return to + (from - to) / 2.0 * (1.0 + std::cos(std::numbers::pi * pct));
  }
};

inline double one_cycle_lr(std::size_t step, const OneCycleSchedule& schedule) {
  return schedule.lr(step);
}

}  // namespace tasktcn::autodiff
