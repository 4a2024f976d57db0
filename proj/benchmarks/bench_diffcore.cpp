#include <benchmark/benchmark.h>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/diffcore/rng.hpp"

namespace d = dualkd::diff;

namespace {

d::Tensor filled(d::Shape shape, std::uint64_t seed) {
  d::Rng rng(seed);
  d::Tensor t = d::Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const d::Tensor a = filled({n, n}, 1);
  const d::Tensor b = filled({n, n}, 2);
  d::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(d::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(17)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  d::Tensor a = filled({n, n}, 1);
  d::Tensor b = filled({n, n}, 2);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    d::Tensor loss = d::sum(d::matmul(a, b));
    loss.backward();
    a.clear_grad();
    b.clear_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64);

void BM_LayerNorm(benchmark::State& state) {
  const d::Tensor x = filled({17, 64}, 3);
  const d::Tensor g = d::Tensor::full({64}, 1.0);
  const d::Tensor b = d::Tensor::zeros({64});
  d::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(d::layer_norm(x, g, b));
}
BENCHMARK(BM_LayerNorm);

void BM_SoftmaxRows(benchmark::State& state) {
  const d::Tensor x = filled({17, 17}, 4);
  d::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(d::softmax_rows(x));
}
BENCHMARK(BM_SoftmaxRows);

}  // namespace
