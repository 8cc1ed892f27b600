#include <benchmark/benchmark.h>

#include <random>

#include "tasktcn/data/synthetic.hpp"
#include "tasktcn/transfer/dtw.hpp"
#include "tasktcn/transfer/transfer.hpp"

using namespace tasktcn;

namespace {

void BM_Dtw(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::normal_distribution<double> d;
  std::vector<double> a(n), b(n);
  for (double& v : a) v = d(rng);
  for (double& v : b) v = d(rng);
  for (auto _ : state) benchmark::DoNotOptimize(transfer::dtw_distance(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dtw)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oNSquared);

// one target against 12 sources, 30 days at hourly resolution
void BM_SelectSourceDtw(benchmark::State& state) {
  data::SyntheticSpec spec;
  spec.num_tasks = 13;
  spec.num_clusters = 3;
  spec.days = 30;
  auto parks = data::gen_synthetic(spec);
  const auto target = parks.back();
  parks.pop_back();
  for (auto _ : state) {
    benchmark::DoNotOptimize(transfer::select_source_dtw(parks, target, spec.similarity_feature));
  }
}
BENCHMARK(BM_SelectSourceDtw);

}  // namespace
