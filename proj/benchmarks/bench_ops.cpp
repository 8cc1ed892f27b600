#include <benchmark/benchmark.h>

#include <random>

#include "tasktcn/autodiff/ops.hpp"

using namespace tasktcn;
using namespace tasktcn::autodiff;

namespace {

Tensor<float> randn(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> d;
  Tensor<float> t(std::move(s));
  for (float& v : t.values()) v = d(rng);
  return t;
}

// batch 16, 24 steps, kernel 3
void BM_Conv1dCausalForwardBackward(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const auto dilation = static_cast<std::size_t>(state.range(1));
  const auto x = randn({16, ch, 24}, 1), w = randn({ch, ch, 3}, 2), bias = randn({ch}, 3);
  for (auto _ : state) {
    Tape<float> tape;
    auto xv = tape.leaf(x), wv = tape.leaf(w), bv = tape.leaf(bias);
    tape.backward(sum(conv1d_causal(xv, wv, bv, dilation)));
    benchmark::DoNotOptimize(tape.grad(wv)[0]);
  }
  state.SetItemsProcessed(state.iterations() * 16 * 24);
}
BENCHMARK(BM_Conv1dCausalForwardBackward)->Args({16, 1})->Args({16, 4})->Args({64, 1})->Args({64, 8});

void BM_BatchNormTrain(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const auto x = randn({16, ch, 24}, 1), g = randn({ch}, 2), b = randn({ch}, 3);
  for (auto _ : state) {
    Tape<float> tape;
    auto xv = tape.leaf(x);
    tape.backward(sum(batch_norm<float>(xv, tape.leaf(g), tape.leaf(b), nullptr, Phase::train)));
    benchmark::DoNotOptimize(tape.grad(xv)[0]);
  }
}
BENCHMARK(BM_BatchNormTrain)->Arg(16)->Arg(64);

}  // namespace
