#include <benchmark/benchmark.h>

#include <random>

#include "dualkd/metrics/metrics.hpp"

namespace m = dualkd::metrics;

namespace {

m::ScoreSet random_set(std::size_t n) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> score(0.0, 1.0);
  m::ScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 3 == 0 ? 1 : 0;
    s.labels.push_back(y);
    s.scores.push_back(score(gen) + y);
  }
  return s;
}

void BM_Auroc(benchmark::State& state) {
  const m::ScoreSet s = random_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(m::auroc(s));
}
BENCHMARK(BM_Auroc)->Arg(400)->Arg(65536);

void BM_AveragePrecision(benchmark::State& state) {
  const m::ScoreSet s = random_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(m::average_precision(s));
}
BENCHMARK(BM_AveragePrecision)->Arg(400)->Arg(65536);

void BM_F1Max(benchmark::State& state) {
  const m::ScoreSet s = random_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(m::f1_max(s));
}
BENCHMARK(BM_F1Max)->Arg(400)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
