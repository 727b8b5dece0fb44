#include <benchmark/benchmark.h>

#include "ssir/engine.hpp"
#include "ssir/moments.hpp"
#include "ssir/reweight.hpp"
#include "ssir/simulate.hpp"

namespace {

ssir::SimulatedDataset dataset(int n, int p) {
  ssir::RngStream stream(ssir::derive_key(17, ssir::rngtag::kData));
  return ssir::draw_dataset(stream, n, p, ssir::ModelKind::kI,
                            ssir::CovKind::kIdentity, 5);
}

void BM_BuildMoments(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto data = dataset(100, p);
  for (auto _ : state) {
    auto moments = ssir::build_moments(data.X, data.y, 10,
                                       ssir::KernelEstimator::kSliceMeans);
    benchmark::DoNotOptimize(moments);
  }
}
BENCHMARK(BM_BuildMoments)->Arg(200)->Arg(600);

void BM_DenseFillPair(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const auto data = dataset(100, 600);
  const auto moments = ssir::build_moments(data.X, data.y, 10,
                                           ssir::KernelEstimator::kSliceMeans);
  ssir::DenseMomentSource source(moments);
  std::vector<int> subset(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    subset[static_cast<std::size_t>(i)] = 3 * i;
  }
  ssir::Matrix kernel, sigma;
  for (auto _ : state) {
    source.fill_pair(subset, kernel, sigma);
    benchmark::DoNotOptimize(sigma);
  }
}
BENCHMARK(BM_DenseFillPair)->Arg(10)->Arg(20);

void BM_DataFillPair(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const auto data = dataset(90, 5000);
  ssir::DataMomentSource source(data.X, data.y, 10,
                                ssir::KernelEstimator::kSliceMeans);
  std::vector<int> subset(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    subset[static_cast<std::size_t>(i)] = 37 * i;
  }
  ssir::Matrix kernel, sigma;
  for (auto _ : state) {
    source.fill_pair(subset, kernel, sigma);
    benchmark::DoNotOptimize(sigma);
  }
}
BENCHMARK(BM_DataFillPair)->Arg(13)->Arg(20);

void BM_ScoreProjection(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const auto data = dataset(100, 600);
  const auto moments = ssir::build_moments(data.X, data.y, 10,
                                           ssir::KernelEstimator::kSliceMeans);
  ssir::DenseMomentSource source(moments);
  std::vector<int> subset(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    subset[static_cast<std::size_t>(i)] = 3 * i;
  }
  for (auto _ : state) {
    auto score = ssir::score_projection(source, subset, 1);
    benchmark::DoNotOptimize(score);
  }
}
BENCHMARK(BM_ScoreProjection)->Arg(10)->Arg(20);

void BM_WeightPass(benchmark::State& state) {
  const auto data = dataset(100, 200);
  const auto moments = ssir::build_moments(data.X, data.y, 10,
                                           ssir::KernelEstimator::kSliceMeans);
  ssir::DenseMomentSource source(moments);
  ssir::WeightPassParams params;
  params.A = static_cast<int>(state.range(0));
  params.B = 50;
  params.k = 20;
  params.d = 1;
  params.seed = 3;
  for (auto _ : state) {
    auto pass = ssir::run_weight_pass(source, params, 1);
    benchmark::DoNotOptimize(pass);
  }
}
BENCHMARK(BM_WeightPass)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_ReweightedFit(benchmark::State& state) {
  const auto data = dataset(100, 200);
  const auto moments = ssir::build_moments(data.X, data.y, 10,
                                           ssir::KernelEstimator::kSliceMeans);
  ssir::DenseMomentSource source(moments);
  ssir::Rp2Params params;
  params.A1 = 90;
  params.B1 = 30;
  params.A2 = 60;
  params.B2 = 20;
  params.k = 20;
  params.d = 1;
  params.l = 5;
  params.l_prime = 50;
  params.seed = 3;
  for (auto _ : state) {
    auto fit = ssir::ssir_rp_reweighted(source, params, 1);
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_ReweightedFit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
