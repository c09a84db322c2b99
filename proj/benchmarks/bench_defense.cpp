#include <benchmark/benchmark.h>

#include <vector>

#include "fedblock/defense.hpp"
#include "fedblock/rng.hpp"

namespace {

using namespace fedblock;

VerificationTask make_random_task(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix Ug(5, 32);
  for (double& v : Ug.values) v = rng.normal();
  VerificationTask t;
  for (std::uint32_t i = 0; i < n; ++i) {
    TaskEntry e{ClientId{i}, Matrix(5, 32), std::vector<double>(5), 200, Ug};
    for (double& v : e.dU.values) v = rng.normal();
    for (double& v : e.db) v = rng.normal();
    for (std::size_t k = 0; k < e.U.values.size(); ++k) e.U.values[k] -= 0.01 * e.dU.values[k];
    t.trust[e.client] = 1.0;
    t.entries.push_back(std::move(e));
  }
  return t;
}

// Per-verifier cost as the subset size L grows.
void BM_Verify(benchmark::State& state) {
  const auto task = make_random_task(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(verify(task));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Verify)->Arg(4)->Arg(7)->Arg(15)->Arg(30)->Arg(60)->Complexity();

void BM_TwoMeans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<std::vector<double>> pts(n, std::vector<double>(n));
  for (auto& p : pts) {
    for (double& v : p) v = rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(two_means(pts));
}
BENCHMARK(BM_TwoMeans)->Arg(7)->Arg(30);

}  // namespace
