#pragma once

#include <cstddef>
#include <span>

#include "tasktcn/autodiff/tape.hpp"
#include "tasktcn/autodiff/tensor.hpp"
#include "tasktcn/common/rng.hpp"

namespace tasktcn::autodiff {

enum class Phase { train, eval };

// Elementwise arithmetic. Operands must have identical shapes (no broadcasting).
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);

/// max(x, 0); the subgradient at 0 is 0.
template <typename T> Var<T> relu(const Var<T>& x);
/// log(1 + e^x), linear above x = 20.
template <typename T> Var<T> softplus(const Var<T>& x);

/// x: [N, F_in], weight: [F_out, F_in], bias: [F_out] or an invalid Var for none.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

/// Dilated causal convolution with implicit left zero padding of (K-1)*dilation.
/// x: [N, C_in, T], weight: [C_out, C_in, K], bias: [C_out] or invalid.
/// Output [N, C_out, T]; out[..., t] only reads x[..., t'] with t' <= t.
template <typename T>
Var<T> conv1d_causal(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                     std::size_t dilation);

template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;

  static RunningStats fresh(std::size_t channels) {
    return {Tensor<T>({channels}, T{0}), Tensor<T>({channels}, T{1})};
  }
};

/// Per-channel batch normalisation of [N, C] or [N, C, T] input. In train mode
/// batch statistics are used and `stats` (if given) is updated with `momentum`;
/// eval mode normalises with `stats`.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  RunningStats<T>* stats, Phase phase, T momentum = T(0.1), T eps = T(1e-5));

/// w = g * v / ||v|| with the norm taken per output channel (first axis).
template <typename T>
Var<T> weight_norm(const Var<T>& direction, const Var<T>& gain);

/// Inverted dropout; identity in eval mode or when p == 0.
template <typename T>
Var<T> dropout(const Var<T>& x, T p, Phase phase, Rng& rng);

/// Row gather: out[n, :] = table[rows[n], :]. Gradients scatter-add back.
template <typename T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> rows);

/// [N, A] ++ [N, B] -> [N, A + B]
template <typename T>
Var<T> concat_features(const Var<T>& a, const Var<T>& b);

/// [N, D] -> [N, D, steps], each vector repeated along time.
template <typename T>
Var<T> repeat_time(const Var<T>& a, std::size_t steps);

/// Mean squared error against a constant target of the same shape.
template <typename T>
Var<T> mse_loss(const Var<T>& pred, const Tensor<T>& target);

/// 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2): KL(N(mu, sigma^2) || N(0, 1)).
template <typename T>
Var<T> kld_std_normal(const Var<T>& mu, const Var<T>& sigma);

}  // namespace tasktcn::autodiff
