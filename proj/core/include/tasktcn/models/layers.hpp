#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tasktcn/autodiff/ops.hpp"
#include "tasktcn/autodiff/parameter.hpp"
#include "tasktcn/common/rng.hpp"

namespace tasktcn::models {

using autodiff::Binding;
using autodiff::Parameter;
using autodiff::Phase;
using autodiff::Tensor;
using autodiff::Var;

/// Named non-trainable state (batch-norm running statistics).
struct Buffer {
  std::string name;
  Tensor<float>* value;
};

struct LinearLayer {
  Parameter weight;
  Parameter bias;

  LinearLayer() = default;
  /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  LinearLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var<float> forward(Binding& b, const Var<float>& x);
  void collect(std::vector<Parameter*>& out);
};

struct BatchNormLayer {
  Parameter gamma;
  Parameter beta;
  autodiff::RunningStats<float> stats;
  std::string name;

  BatchNormLayer() = default;
  BatchNormLayer(const std::string& name, std::size_t channels);

  Var<float> forward(Binding& b, const Var<float>& x, Phase phase);
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<Buffer>& out);
};

/// Causal convolution, optionally weight-normalised (w = g v / ||v||).
struct CausalConv {
  Parameter weight;  // direction v when weight-normed
  std::optional<Parameter> gain;
  Parameter bias;
  std::size_t dilation = 1;

  CausalConv() = default;
  /// Weight-normed convs draw v from N(0, 0.01^2) and start with g = ||v||.
  /// Plain convs use the uniform fan-in initialisation.
  CausalConv(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
             std::size_t dilation, bool weight_normed, Rng& rng);

  std::size_t in_channels() const { return weight.value.dim(1); }
  std::size_t out_channels() const { return weight.value.dim(0); }

  Var<float> effective_weight(Binding& b);
  Var<float> forward(Binding& b, const Var<float>& x);
  void collect(std::vector<Parameter*>& out);
  void zero();
};

/// Two (causal conv -> weight norm -> ReLU -> dropout) stages, a 1x1
/// input-matching conv when channel counts differ, and an optional 1x1 conv
/// that adds the task embedding.
struct ResidualBlock {
  CausalConv conv1;
  CausalConv conv2;
  std::optional<CausalConv> downsample;
  std::optional<CausalConv> injection;
  float dropout = 0.0f;

  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
                std::size_t dilation, float dropout, std::size_t embedding_dim, bool inject,
                Rng& rng);

  /// e: [N, D, T] repeated embedding or an invalid Var.
  Var<float> forward(Binding& b, const Var<float>& x, const Var<float>& e, Phase phase, Rng& rng);
  void collect(std::vector<Parameter*>& out);
};

}  // namespace tasktcn::models
