// Serial reference kernels against their OpenMP counterparts, plus recover
// at growing k. On a single core the parallel rows measure scheduling
// overhead only.
#include <benchmark/benchmark.h>

#include <vector>

#include "sqs/block_sparse.hpp"
#include "sqs/harness.hpp"
#include "sqs/locators.hpp"
#include "sqs/set_query.hpp"

namespace {

std::vector<double> dense_signal(std::uint64_t n, std::uint64_t seed) {
  sqs::Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

template <bool Parallel>
void BM_apply(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  const sqs::SketchMatrix m(sqs::derive_params(n, n / 100, 0.5, sqs::Norm::L2, 7, 1));
  const auto x = dense_signal(n, 2);
  for (auto _ : state) {
    auto b = Parallel ? sqs::apply(m, x) : sqs::serial::apply(m, x);
    benchmark::DoNotOptimize(b.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_cs_apply(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  const auto p = sqs::make_count_sketch_params(n, 64, 1.0, 3);
  const auto x = dense_signal(n, 4);
  for (auto _ : state) {
    auto t = Parallel ? sqs::cs_apply(p, x) : sqs::serial::cs_apply(p, x);
    benchmark::DoNotOptimize(t.cells().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_bhh_apply(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  auto sketch = sqs::bhh_build(sqs::make_block_params(n, 64, 256, 0.5, 5));
  const auto x = dense_signal(n, 6);
  for (auto _ : state) {
    if constexpr (Parallel)
      sqs::bhh_apply(sketch, x);
    else
      sqs::serial::bhh_apply(sketch, x);
    benchmark::DoNotOptimize(sketch.tables.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_recover(benchmark::State& state) {
  const auto k = static_cast<std::uint64_t>(state.range(0));
  const std::uint64_t n = 1'000'000;
  const sqs::SketchMatrix m(sqs::derive_params(n, k, 0.5, sqs::Norm::L2, 7, 7));
  const auto inst = sqs::gen_set_query_instance(n, k, 10.0, 1.0, 8);
  const auto b = sqs::apply(m, std::span<const double>(inst.x));
  sqs::Rng rng(9);
  for (auto _ : state) {
    auto r = sqs::recover(m, b, inst.support, rng);
    benchmark::DoNotOptimize(r.estimate.entries.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k));
}

}  // namespace

BENCHMARK(BM_apply<false>)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_apply<true>)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cs_apply<false>)->Arg(1 << 14)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cs_apply<true>)->Arg(1 << 14)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bhh_apply<false>)->Arg(1 << 14)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bhh_apply<true>)->Arg(1 << 14)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_recover)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
