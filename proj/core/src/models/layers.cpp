#include "tasktcn/models/layers.hpp"

#include <cmath>
#include <random>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::models {

namespace {

Tensor<float> uniform_tensor(autodiff::Shape shape, float bound, Rng& rng) {
  Tensor<float> t(std::move(shape));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : t.values()) v = dist(rng);
  return t;
}

Tensor<float> normal_tensor(autodiff::Shape shape, float stddev, Rng& rng) {
  Tensor<float> t(std::move(shape));
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

LinearLayer::LinearLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  weight = Parameter(name + ".weight", uniform_tensor({out, in}, bound, rng));
  bias = Parameter(name + ".bias", uniform_tensor({out}, bound, rng));
}

Var<float> LinearLayer::forward(Binding& b, const Var<float>& x) {
  return autodiff::linear(x, b(weight), b(bias));
}

void LinearLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

BatchNormLayer::BatchNormLayer(const std::string& n, std::size_t channels)
    : gamma(n + ".gamma", Tensor<float>({channels}, 1.0f)),
      beta(n + ".beta", Tensor<float>({channels}, 0.0f)),
      stats(autodiff::RunningStats<float>::fresh(channels)),
      name(n) {}

Var<float> BatchNormLayer::forward(Binding& b, const Var<float>& x, Phase phase) {
  return autodiff::batch_norm<float>(x, b(gamma), b(beta), &stats, phase);
}

void BatchNormLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void BatchNormLayer::collect(std::vector<Buffer>& out) {
  out.push_back({name + ".running_mean", &stats.mean});
  out.push_back({name + ".running_var", &stats.var});
}

CausalConv::CausalConv(const std::string& name, std::size_t in, std::size_t out,
                       std::size_t kernel, std::size_t dil, bool weight_normed, Rng& rng)
    : dilation(dil) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in * kernel));
  if (weight_normed) {
    weight = Parameter(name + ".weight_v", normal_tensor({out, in, kernel}, 0.01f, rng));
    Tensor<float> g({out});
    const std::size_t row = in * kernel;
    for (std::size_t o = 0; o < out; ++o) {
      double sq = 0.0;
      for (std::size_t i = 0; i < row; ++i) {
        const double v = weight.value[o * row + i];
        sq += v * v;
      }
      g[o] = static_cast<float>(std::sqrt(sq));
    }
    gain = Parameter(name + ".weight_g", std::move(g));
  } else {
    weight = Parameter(name + ".weight", uniform_tensor({out, in, kernel}, bound, rng));
  }
  bias = Parameter(name + ".bias", uniform_tensor({out}, bound, rng));
}

Var<float> CausalConv::effective_weight(Binding& b) {
  if (gain) return autodiff::weight_norm(b(weight), b(*gain));
  return b(weight);
}

Var<float> CausalConv::forward(Binding& b, const Var<float>& x) {
  return autodiff::conv1d_causal(x, effective_weight(b), b(bias), dilation);
}

void CausalConv::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (gain) out.push_back(&*gain);
  out.push_back(&bias);
}

void CausalConv::zero() {
  if (gain) {
    gain->value.fill(0.0f);
  } else {
    weight.value.fill(0.0f);
  }
  bias.value.fill(0.0f);
}

ResidualBlock::ResidualBlock(const std::string& name, std::size_t in, std::size_t out,
                             std::size_t kernel, std::size_t dilation, float p,
                             std::size_t embedding_dim, bool inject, Rng& rng)
    : conv1(name + ".conv1", in, out, kernel, dilation, true, rng),
      conv2(name + ".conv2", out, out, kernel, dilation, true, rng),
      dropout(p) {
  if (in != out) downsample.emplace(name + ".downsample", in, out, 1, 1, false, rng);
  if (inject) injection.emplace(name + ".injection", embedding_dim, out, 1, 1, false, rng);
}

Var<float> ResidualBlock::forward(Binding& b, const Var<float>& x, const Var<float>& e,
                                  Phase phase, Rng& rng) {
  Var<float> h = autodiff::relu(conv1.forward(b, x));
  h = autodiff::dropout(h, dropout, phase, rng);
  h = autodiff::relu(conv2.forward(b, h));
  h = autodiff::dropout(h, dropout, phase, rng);
  Var<float> out = autodiff::add(h, downsample ? downsample->forward(b, x) : x);
  if (injection && e.valid()) {
    if (e.shape().size() != 3 || e.shape()[1] != injection->in_channels()) {
      throw ContractViolation("embedding injection expects [N, D, T]");
    }
    out = autodiff::add(out, injection->forward(b, e));
  }
  return out;
}

void ResidualBlock::collect(std::vector<Parameter*>& out) {
  conv1.collect(out);
  conv2.collect(out);
  if (downsample) downsample->collect(out);
  if (injection) injection->collect(out);
}

}  // namespace tasktcn::models
