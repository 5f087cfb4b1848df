#include <benchmark/benchmark.h>

#include <random>

#include "repcount/autodiff/ops.hpp"
#include "repcount/embed.hpp"
#include "repcount/localize.hpp"
#include "repcount/model.hpp"
#include "repcount/similarity.hpp"
#include "repcount/softdtw.hpp"

using namespace repcount;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

void BM_SoftDtw(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 32, 1), b = random_matrix(n, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(softdtw(a, b, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_SoftDtw)->Arg(20)->Arg(40)->Arg(80);

void BM_SoftDtwSlidingBackward(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto x = ad::Tensor::from_matrix(random_matrix(280, 32, 3));
  const auto e = ad::Tensor::from_matrix(random_matrix(k, 32, 4));
  for (auto _ : state) {
    ad::Tape tape;
    const auto xv = tape.leaf(x, true);
    const auto ev = tape.leaf(e, true);
    tape.backward(ad::sum_all(softdtw_sliding(xv, ev, 1.0)));
    benchmark::DoNotOptimize(tape.grad(xv).data());
  }
}
BENCHMARK(BM_SoftDtwSlidingBackward)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_Localize(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  ScoreMatrix s;
  s.scores = random_matrix(M, 3, 5);
  for (double& v : s.scores.data()) v = std::abs(v);
  for (auto _ : state) benchmark::DoNotOptimize(localize_utterances(s, 150));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Localize)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oN);

void BM_SimilarityMap(benchmark::State& state) {
  const auto cfg = PipelineConfig::desk();
  const Matrix x = random_matrix(280, cfg.d_prime, 6);
  const auto set = extract_exemplars(x, 60, 140, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(build_similarity_map(x, set, cfg).values.data().data());
}
BENCHMARK(BM_SimilarityMap)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto cfg = PipelineConfig::desk();
  const auto params = init_model_params(cfg);
  const auto x = ad::Tensor::from_matrix(random_matrix(cfg.pad_len, cfg.channels, 7));
  const auto graph = build_knn_graph(random_matrix(cfg.pad_len / cfg.w, cfg.w * cfg.channels, 8), cfg.knn_k);
  for (auto _ : state) {
    ad::Tape tape;
    ad::BoundParams p(tape, params, true);
    const auto out = forward(p, tape.constant(x), 60, 140, cfg);
    tape.backward(total_loss(out.density, 12.0, out.x_emb, graph, cfg.lambda_pl));
    benchmark::DoNotOptimize(p.grads());
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
