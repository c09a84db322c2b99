#include <benchmark/benchmark.h>

#include "fedblock/planner.hpp"

namespace {

using namespace fedblock;

void BM_ExpectedL(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expected_L(M, M / 2));
}
BENCHMARK(BM_ExpectedL)->Arg(10)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_ExpectedV(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expected_V(M, 7));
}
BENCHMARK(BM_ExpectedV)->Arg(10)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_MonteCarloCoverage(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mc_coverage(30, 7, 10000, 1));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_MonteCarloCoverage)->Unit(benchmark::kMillisecond);

}  // namespace
