#include <benchmark/benchmark.h>

#include "dualkd/diffcore/rng.hpp"
#include "dualkd/harness/config.hpp"
#include "dualkd/harness/model.hpp"
#include "dualkd/harness/trainer.hpp"

namespace d = dualkd::diff;
namespace h = dualkd::harness;

namespace {

d::Tensor image(const h::ExperimentConfig& c) {
  d::Rng rng(5);
  const std::size_t s = c.teacher.image_size;
  d::Tensor t = d::Tensor::zeros({c.teacher.in_channels, s, s});
  for (double& v : t.mutable_values()) v = rng.uniform();
  return t;
}

void BM_TeacherForward(benchmark::State& state) {
  const h::ExperimentConfig c;
  const h::Model model(c);
  const d::Tensor x = image(c);
  d::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.teacher.forward_image(x));
}
BENCHMARK(BM_TeacherForward)->Unit(benchmark::kMillisecond);

void BM_TeacherTargets(benchmark::State& state) {
  const h::ExperimentConfig c;
  const h::Model model(c);
  const d::Tensor x = image(c);
  for (auto _ : state) benchmark::DoNotOptimize(h::teacher_targets(model.teacher, x));
}
BENCHMARK(BM_TeacherTargets)->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state) {
  const h::ExperimentConfig c;
  const h::Model model(c);
  const d::Tensor x = image(c);
  for (auto _ : state) {
    const auto out = model.encoder.forward_image(x, {.patch_features = false});
    d::Tensor loss = d::squared_distance(out.final_class_token, out.class_tokens.front());
    loss.backward();
    for (auto& p : model.encoder_parameters()) p.tensor.clear_grad();
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
