#include <benchmark/benchmark.h>

#include <random>

#include "footgan/conditions.hpp"
#include "footgan/discriminators.hpp"
#include "footgan/generator.hpp"
#include "footgan/metrics.hpp"
#include "footgan/ratings.hpp"
#include "footgan/signal_ops.hpp"
#include "footgan/stimuli.hpp"

using namespace footgan;
namespace F = torch::nn::functional;

namespace {

Eigen::MatrixXd normals(Eigen::Index n, Eigen::Index d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

EmbeddingSet set_of(Eigen::MatrixXd v) {
  EmbeddingSet e;
  e.vectors = std::move(v);
  return e;
}

}  // namespace

// Explicit zero stuffing followed by a stride-1 conv, the slow path.
static void BM_ZeroStuffConv(benchmark::State& state) {
  torch::NoGradGuard ng;
  auto x = torch::randn({16, state.range(0), 512});
  auto w = torch::randn({state.range(0) / 2, state.range(0), 25});
  for (auto _ : state) {
    benchmark::DoNotOptimize(F::conv1d(upsample(x, 4, UpsampleMode::zero_stuff), w, F::Conv1dFuncOptions().padding(12)));
  }
}
BENCHMARK(BM_ZeroStuffConv)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_TransposedConv(benchmark::State& state) {
  torch::NoGradGuard ng;
  auto x = torch::randn({16, state.range(0), 512});
  auto w = torch::randn({state.range(0), state.range(0) / 2, 25});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        F::conv_transpose1d(x, w, F::ConvTranspose1dFuncOptions().stride(4).padding(12).output_padding(3)));
  }
}
BENCHMARK(BM_TransposedConv)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_GeneratorForward(benchmark::State& state) {
  torch::NoGradGuard ng;
  GeneratorConfig cfg;
  cfg.base_channels = static_cast<int>(state.range(0));
  WaveGanGenerator g(cfg);
  g->eval();
  Rng rng(1);
  auto z = sample_latent(16, cfg.d_z, rng);
  auto labels = one_hot(std::vector<int>(16, 3), cfg.num_classes);
  for (auto _ : state) benchmark::DoNotOptimize(g->forward(z, labels));
}
BENCHMARK(BM_GeneratorForward)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_HiFiCritic(benchmark::State& state) {
  torch::NoGradGuard ng;
  HiFiDiscriminator d(HiFiDiscConfig::compact());
  auto x = torch::rand({16, 8192}) * 2 - 1;
  auto labels = one_hot(std::vector<int>(16, 1), 7);
  for (auto _ : state) benchmark::DoNotOptimize(d->forward(x, labels));
}
BENCHMARK(BM_HiFiCritic)->Unit(benchmark::kMillisecond);

static void BM_Fad(benchmark::State& state) {
  const auto a = set_of(normals(state.range(0), 128, 1)), b = set_of(normals(state.range(0), 128, 2));
  for (auto _ : state) benchmark::DoNotOptimize(fad(a, b));
}
BENCHMARK(BM_Fad)->Arg(500)->Arg(3500)->Unit(benchmark::kMillisecond);

static void BM_Kid(benchmark::State& state) {
  const auto a = set_of(normals(state.range(0), 64, 3)), b = set_of(normals(state.range(0), 64, 4));
  for (auto _ : state) benchmark::DoNotOptimize(kid(a, b));
}
BENCHMARK(BM_Kid)->Arg(500)->Arg(3500)->Unit(benchmark::kMillisecond);

static void BM_MmdL1(benchmark::State& state) {
  const auto a = set_of(normals(state.range(0), 512, 5)), b = set_of(normals(state.range(0), 512, 6));
  for (auto _ : state) benchmark::DoNotOptimize(mmd_l1(a, b));
}
BENCHMARK(BM_MmdL1)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_BuildWalk(benchmark::State& state) {
  std::vector<AudioClip> pool(32);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-0.4f, 0.4f);
  for (auto& c : pool) {
    c.samples.resize(kClipLength);
    for (auto& s : c.samples) s = u(rng);
  }
  WalkSpec spec;
  spec.interval_s = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_walk(pool, spec));
}
BENCHMARK(BM_BuildWalk)->Arg(2)->Arg(10);

static void BM_Summarize(benchmark::State& state) {
  std::vector<RatingPage> pages(static_cast<size_t>(state.range(0)));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (size_t i = 0; i < pages.size(); ++i) {
    pages[i].page_id = std::to_string(i);
    for (const auto& c : kConditions) pages[i].marks[c] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(summarize(pages));
}
BENCHMARK(BM_Summarize)->Arg(100)->Arg(10000);

BENCHMARK_MAIN();
