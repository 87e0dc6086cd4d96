#include <benchmark/benchmark.h>

#include "coverdet/ops.hpp"
#include "coverdet/random.hpp"
#include "coverdet/siamese.hpp"

using namespace coverdet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool grad = false) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

// First conv layer of the default network on a [2,1,84,130] batch.
void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(3);
  const auto x = random_tensor({2, 1, 84, 130}, rng);
  const auto k = random_tensor({64, 1, 5, 5}, rng);
  const auto b = random_tensor({64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b).values().data());
}
BENCHMARK(BM_Conv2dForward)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(3);
  const auto x = random_tensor({2, 1, 84, 130}, rng);
  const auto k = random_tensor({64, 1, 5, 5}, rng, true);
  const auto b = random_tensor({64}, rng, true);
  for (auto _ : state) {
    auto loss = sum(conv2d(x, k, b));
    loss.backward();
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_EmbedDefaultArchitecture(benchmark::State& state) {
  Rng rng(5);
  const auto model = SiameseModel::create(ArchitectureConfig{}, 9);
  const auto x = random_tensor({static_cast<std::size_t>(state.range(0)), 1, 84, 130}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.embed(x).values().data());
}
BENCHMARK(BM_EmbedDefaultArchitecture)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
