#include <benchmark/benchmark.h>

#include <vector>

#include "fedblock/data.hpp"
#include "fedblock/nn.hpp"

namespace {

using namespace fedblock;

void BM_SgdEpoch(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto data = gen_dataset(200, 5, 20, 1);
  const auto model = init_mlp(std::vector<std::size_t>{20, hidden, 5}, 2);
  const TrainConfig cfg{0.01, 1, 20, 3};
  for (auto _ : state) benchmark::DoNotOptimize(sgd_train(model, data, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_SgdEpoch)->Arg(16)->Arg(32)->Arg(128);

void BM_Serialize(benchmark::State& state) {
  const auto model = init_mlp(std::vector<std::size_t>{20, 32, 5}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(serialize(model));
}
BENCHMARK(BM_Serialize);

}  // namespace
