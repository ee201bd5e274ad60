#include <benchmark/benchmark.h>

#include "pcsm/dropping.hpp"
#include "pcsm/model.hpp"
#include "pcsm/saliency.hpp"
#include "pcsm/shapes.hpp"

namespace {

using namespace pcsm;

const ModelParams& bench_model() {
  static const ModelParams model = ModelParams::init(8, 1234);
  return model;
}

Cloud bench_cloud(std::size_t points) {
  return sample_shape(ShapeClass::torus, points, 0.01, 99);
}

void BM_Forward(benchmark::State& state) {
  const Cloud cloud = bench_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(bench_model(), cloud).predicted_class);
  }
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256)->Arg(1024);

void BM_LossGradient(benchmark::State& state) {
  const Cloud cloud = bench_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        loss_with_input_gradient(bench_model(), cloud, 3).loss_value);
  }
}
BENCHMARK(BM_LossGradient)->Arg(64)->Arg(256)->Arg(1024);

void BM_SaliencyScores(benchmark::State& state) {
  const Cloud cloud = bench_cloud(256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(saliency_scores(bench_model(), cloud, 3).scores);
  }
}
BENCHMARK(BM_SaliencyScores);

void BM_SphericalCore(benchmark::State& state) {
  const Cloud cloud = bench_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(spherical_core(cloud));
  }
}
BENCHMARK(BM_SphericalCore)->Arg(256)->Arg(4096);

void BM_HighDrop(benchmark::State& state) {
  const Cloud cloud = bench_cloud(256);
  DropConfig config;
  config.scheme = DropScheme::high;
  config.n = static_cast<std::size_t>(state.range(0));
  config.T = config.n / 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_drop(bench_model(), cloud, 3, config).remaining.size());
  }
}
BENCHMARK(BM_HighDrop)->Arg(25)->Arg(50);

void BM_CriticalCounts(benchmark::State& state) {
  const Cloud cloud = bench_cloud(256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(critical_counts(bench_model(), cloud).counts);
  }
}
BENCHMARK(BM_CriticalCounts);

}  // namespace

BENCHMARK_MAIN();
