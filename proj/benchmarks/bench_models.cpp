#include <benchmark/benchmark.h>

#include <random>

#include "tasktcn/models/task_model.hpp"

using namespace tasktcn;
using namespace tasktcn::models;

namespace {

ModelConfig config(ModelKind kind, std::size_t channels) {
  ModelConfig c;
  c.kind = kind;
  c.num_features = 6;
  c.num_tasks = 10;
  c.seq_len = 24;
  c.channels = channels;
  c.embedding_dim = 4;
  c.dropout = 0.1;
  c.seed = 1;
  return c;
}

struct Batch {
  autodiff::Tensor<float> x;
  std::vector<TaskId> ids;
};

Batch batch(std::size_t n) {
  Rng rng(4);
  std::normal_distribution<float> d;
  Batch b{autodiff::Tensor<float>({n, 6, 24}), {}};
  for (float& v : b.x.values()) v = d(rng);
  for (std::size_t i = 0; i < n; ++i) b.ids.emplace_back(static_cast<std::uint32_t>(i % 10 + 1));
  return b;
}

// one forward/backward pass, optimiser excluded
void BM_TrainStep(benchmark::State& state) {
  const auto kind = state.range(0) ? ModelKind::tcn : ModelKind::mlp;
  auto model = make_model(config(kind, static_cast<std::size_t>(state.range(1))));
  const auto data = batch(16);
  Rng rng(5);
  for (auto _ : state) {
    autodiff::Tape<float> tape;
    autodiff::Binding b(tape);
    auto y = model->forward(b, data.x, data.ids, RunMode::train, rng);
    tape.backward(autodiff::mean(y));
    b.accumulate_grads();
  }
}
BENCHMARK(BM_TrainStep)->Args({1, 16})->Args({1, 64})->Args({0, 16});

void BM_Predict(benchmark::State& state) {
  auto model = make_model(config(ModelKind::tcn, 16));
  const auto data = batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model->predict(data.x, data.ids));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(64)->Arg(512);

}  // namespace
