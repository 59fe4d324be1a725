#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "phi/kernels.hpp"

namespace {

using phi::kernels::MatrixView;

struct Problem {
  std::size_t rows, cols, k;
  std::vector<double> points, centroids;
  std::vector<int> labels;
  std::vector<double> dist;
};

Problem make(std::size_t rows, std::size_t cols, std::size_t k) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Problem p{rows, cols, k, std::vector<double>(rows * cols), std::vector<double>(k * cols),
            std::vector<int>(rows), std::vector<double>(rows)};
  for (auto& v : p.points) v = u(gen);
  for (auto& v : p.centroids) v = u(gen);
  return p;
}

template <bool Parallel>
void BM_AssignNearest(benchmark::State& state) {
  auto p = make(static_cast<std::size_t>(state.range(0)), 256, 8);
  const MatrixView pts{p.points, p.rows, p.cols};
  const MatrixView cts{p.centroids, p.k, p.cols};
  for (auto _ : state) {
    if constexpr (Parallel) {
      phi::kernels::assign_nearest(pts, cts, p.labels, p.dist);
    } else {
      phi::kernels::assign_nearest_serial(pts, cts, p.labels, p.dist);
    }
    benchmark::DoNotOptimize(p.dist.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_AccumulateCentroids(benchmark::State& state) {
  auto p = make(static_cast<std::size_t>(state.range(0)), 256, 8);
  for (std::size_t i = 0; i < p.rows; ++i) p.labels[i] = static_cast<int>(i % p.k);
  const MatrixView pts{p.points, p.rows, p.cols};
  std::vector<int> counts(p.k);
  for (auto _ : state) {
    if constexpr (Parallel) {
      phi::kernels::accumulate_centroids(pts, p.labels, p.k, p.centroids, counts);
    } else {
      phi::kernels::accumulate_centroids_serial(pts, p.labels, p.k, p.centroids, counts);
    }
    benchmark::DoNotOptimize(p.centroids.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_WeightAndNormalize(benchmark::State& state) {
  auto p = make(static_cast<std::size_t>(state.range(0)), 256, 1);
  std::vector<double> idf(p.cols, 1.5);
  for (auto _ : state) {
    state.PauseTiming();
    auto data = p.points;
    state.ResumeTiming();
    if constexpr (Parallel) {
      phi::kernels::weight_and_normalize(data, p.rows, p.cols, idf);
    } else {
      phi::kernels::weight_and_normalize_serial(data, p.rows, p.cols, idf);
    }
    benchmark::DoNotOptimize(data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_AssignNearest<false>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_AssignNearest<true>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_AccumulateCentroids<false>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_AccumulateCentroids<true>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_WeightAndNormalize<false>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_WeightAndNormalize<true>)->Arg(16)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
