// Hot paths: render, MFCC, CQT, PDC forward and one estimator training step.

#include <benchmark/benchmark.h>

#include <random>

#include "synthmatch/dataset.hpp"
#include "synthmatch/dsp.hpp"
#include "synthmatch/estimator.hpp"
#include "synthmatch/features.hpp"
#include "synthmatch/pdc.hpp"

using namespace synthmatch;

namespace {

Preset toy_preset() {
  DatasetRng rng(1);
  Preset p = sample_random_preset(make_space("toy2"), rng);
  p.set("op1.output_level", 55);
  return p;
}

void BM_Render(benchmark::State& state) {
  const Preset p = toy_preset();
  const MidiNote note;
  for (auto _ : state) benchmark::DoNotOptimize(render(p, note));
}
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);

void BM_RenderSixOp(benchmark::State& state) {
  DatasetRng rng(2);
  const Preset p = sample_random_preset(make_space("fm6-stack"), rng);
  const MidiNote note;
  for (auto _ : state) benchmark::DoNotOptimize(render(p, note));
}
BENCHMARK(BM_RenderSixOp)->Unit(benchmark::kMillisecond);

void BM_Mfcc(benchmark::State& state) {
  const AudioBuffer a = render(toy_preset(), MidiNote{});
  dsp::MfccExtractor mfcc(dsp::MfccConfig{}, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(mfcc(a));
}
BENCHMARK(BM_Mfcc)->Unit(benchmark::kMillisecond);

void BM_Cqt(benchmark::State& state) {
  const AudioBuffer a = render(toy_preset(), MidiNote{});
  dsp::CqtTransform cqt(dsp::CqtConfig{}, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(cqt.apply(a));
}
BENCHMARK(BM_Cqt)->Unit(benchmark::kMillisecond);

void BM_FeatureBundle(benchmark::State& state) {
  const AudioBuffer a = render(toy_preset(), MidiNote{});
  FeatureExtractor ex(FeatureConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(ex(a));
}
BENCHMARK(BM_FeatureBundle)->Unit(benchmark::kMillisecond);

void BM_PdcForward(benchmark::State& state) {
  const auto locs = pdc::dilated_locations(12, 4, state.range(0) != 0);
  const pdc::Shape3 shape{16, 84, 32};
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n;
  std::vector<float> x(shape.size()), out(shape.size()), v(locs.size());
  for (auto& e : x) e = n(rng);
  for (auto& e : v) e = n(rng);
  for (auto _ : state) {
    pdc::pdc_forward<float>(x, shape, v, locs, false, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(shape.size()));
}
BENCHMARK(BM_PdcForward)->Arg(0)->Arg(1);

void BM_ModelStep(benchmark::State& state) {
  const auto space = make_space("toy2");
  const FeatureConfig fc;
  const Preset p = toy_preset();
  const AudioBuffer a = render(p, MidiNote{});
  const auto shapes = input_shapes(fc, a.size());
  const ModelInput<float> input = to_model_input(extract_bundle(a, fc), fc, shapes);
  Model<float> model(ModelConfig{}, shapes, space, 1);
  const Target target = make_target(p, LossConfig{}, {});
  const auto params = model.params();
  for (auto _ : state) {
    nn::zero_grads(params);
    const auto logits = model.forward(input);
    model.backward(compute_loss(logits, target, *space, LossMode::cross_entropy).grad);
  }
}
BENCHMARK(BM_ModelStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
