#include <benchmark/benchmark.h>

#include <cmath>

#include "coverdet/eval.hpp"
#include "coverdet/random.hpp"

using namespace coverdet;

namespace {

void BM_PrecAt1(benchmark::State& state) {
  const auto n_pairs = static_cast<std::size_t>(state.range(0));
  std::vector<Clique> cliques;
  for (std::size_t c = 0; c < n_pairs; ++c) {
    const std::string id = "k" + std::to_string(c);
    cliques.push_back({id, {{id + "a", ""}, {id + "b", ""}}});
  }
  const CliqueSet cs(cliques);
  const auto pairs = positive_pairs(cs);
  Rng rng(2);
  std::normal_distribution<float> n(0.0f, 1.0f);
  EmbeddingIndex index(64);
  for (const auto& c : cs.cliques()) {
    for (const auto& t : c.tracks) {
      std::vector<float> v(64);
      for (float& x : v) x = n(rng);
      index.insert(t.id, std::move(v));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(prec_at_1(index, pairs, 16, 1, &cs).prec_at_1);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n_pairs * 2));
}
BENCHMARK(BM_PrecAt1)->Arg(1000)->Arg(12493)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
