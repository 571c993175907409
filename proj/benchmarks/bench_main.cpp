// Micro benchmarks for the hot paths: similarity construction, the greedy
// refinement loops, and label-model fit/predict.

#include <benchmark/benchmark.h>

#include <random>

#include "lfrefine/labelmodel.hpp"
#include "lfrefine/refine.hpp"
#include "lfrefine/similarity.hpp"
#include "lfrefine/synth.hpp"

using namespace lfrefine;

namespace {

SimilarityMatrix random_similarity(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix values(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) values(i, j) = values(j, i) = u(gen);
  }
  return SimilarityMatrix(SimilarityKind::cosine, std::move(values));
}

SynthData independent_data(std::size_t m, std::size_t n, std::size_t dim = 32) {
  SynthSpec spec;
  spec.n = n;
  spec.dim = dim;
  spec.seed = 1;
  for (std::size_t i = 0; i < m; ++i) spec.groups.push_back({1, 0.6 + 0.3 * i / m, 0.7, 0.0, {}, 0.05});
  return generate(spec);
}

void BM_CosineMatrix(benchmark::State& state) {
  const auto data = independent_data(static_cast<std::size_t>(state.range(0)), 10, 768);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_matrix(data.embeddings));
}
BENCHMARK(BM_CosineMatrix)->Arg(10)->Arg(73)->Arg(200);

void BM_AgreementMatrix(benchmark::State& state) {
  const auto data = independent_data(static_cast<std::size_t>(state.range(0)), 20000);
  for (auto _ : state) benchmark::DoNotOptimize(agreement_matrix(data.votes));
}
BENCHMARK(BM_AgreementMatrix)->Arg(10)->Arg(73)->Unit(benchmark::kMillisecond);

void BM_LaRe(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto sim = random_similarity(m, 2);
  for (auto _ : state) benchmark::DoNotOptimize(lare(sim, m * 7 / 10));
}
BENCHMARK(BM_LaRe)->Arg(10)->Arg(73)->Arg(200);

void BM_CosGen(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto sim = random_similarity(m, 3);
  for (auto _ : state) benchmark::DoNotOptimize(cosgen(sim, max_edges(m) / 4));
}
BENCHMARK(BM_CosGen)->Arg(10)->Arg(73)->Arg(200);

// Fit time as a function of the number of CosGen edges on fixed data.
void BM_FitByEdges(benchmark::State& state) {
  static const auto data = independent_data(40, 20000);
  const auto structure =
      refine_pipeline(cosine_matrix(data.embeddings), RefineParams::counts(0, static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(fit(data.votes, structure, TaskConfig{}));
}
BENCHMARK(BM_FitByEdges)->Arg(0)->Arg(50)->Arg(200)->Arg(600)->Unit(benchmark::kMillisecond);

// Fit time as a function of the number of LFs removed by LaRe.
void BM_FitByRemovals(benchmark::State& state) {
  static const auto data = independent_data(40, 20000);
  const auto structure =
      refine_pipeline(cosine_matrix(data.embeddings), RefineParams::counts(static_cast<std::size_t>(state.range(0)), 0));
  for (auto _ : state) benchmark::DoNotOptimize(fit(data.votes, structure, TaskConfig{}));
}
BENCHMARK(BM_FitByRemovals)->Arg(0)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const auto data = independent_data(static_cast<std::size_t>(state.range(0)), 20000);
  const auto params = fit(data.votes, DependencyStructure::independent(data.votes.m()), TaskConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(predict(params, data.votes));
}
BENCHMARK(BM_Predict)->Arg(10)->Arg(73)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
