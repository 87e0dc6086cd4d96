#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "coverdet/cqt.hpp"
#include "coverdet/random.hpp"

using namespace coverdet;

namespace {

AudioClip noise_clip(double seconds) {
  Rng rng(1);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  AudioClip clip;
  clip.samples.resize(static_cast<std::size_t>(seconds * kCanonicalSampleRate));
  for (float& v : clip.samples) v = u(rng);
  return clip;
}

void BM_CqtKernelBuild(benchmark::State& state) {
  for (auto _ : state) {
    CqtKernel kernel(CqtParams{}, kCanonicalSampleRate);
    benchmark::DoNotOptimize(kernel.longest_window());
  }
}
BENCHMARK(BM_CqtKernelBuild)->Unit(benchmark::kMillisecond);

void BM_ComputeCqt(benchmark::State& state) {
  const CqtKernel kernel(CqtParams{}, kCanonicalSampleRate);
  const auto clip = noise_clip(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    auto spec = compute_cqt(clip, kernel);
    benchmark::DoNotOptimize(spec.data.data());
  }
  state.SetLabel(std::to_string(state.range(0)) + " s clip");
}
BENCHMARK(BM_ComputeCqt)->Arg(3)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace
