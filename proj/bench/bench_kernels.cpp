// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "wsikit/kernels.hpp"
#include "wsikit/rng.hpp"

namespace k = wsikit::kernels;

namespace {

std::vector<double> random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  wsikit::Rng rng(seed);
  std::vector<double> x(n * d);
  for (double& v : x) v = rng.normal();
  return x;
}

std::vector<int> round_robin_labels(std::size_t n, int n_labels) {
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i % static_cast<std::size_t>(n_labels));
  return l;
}

constexpr std::size_t kDim = 64;

template <bool Parallel>
void BM_Knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_points(n, kDim, 1);
  for (auto _ : state) {
    auto r = Parallel ? k::omp::knn_indices(x, n, kDim, 10) : k::serial::knn_indices(x, n, kDim, 10);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <bool Parallel>
void BM_Silhouette(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_points(n, kDim, 2);
  const auto labels = round_robin_labels(n, 10);
  for (auto _ : state) {
    auto r = Parallel ? k::omp::silhouette_values(x, n, kDim, labels, 10)
                      : k::serial::silhouette_values(x, n, kDim, labels, 10);
    benchmark::DoNotOptimize(r.data());
  }
}

template <bool Parallel>
void BM_TsneGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto y = random_points(n, 2, 3);
  std::vector<double> p(n * n, 1.0 / static_cast<double>(n * (n - 1)));
  for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 0.0;
  std::vector<double> grad(n * 2);
  for (auto _ : state) {
    if (Parallel)
      k::omp::tsne_gradient(p, y, n, 1.0, grad);
    else
      k::serial::tsne_gradient(p, y, n, 1.0, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}

}  // namespace

BENCHMARK(BM_Knn<false>)->Name("knn/serial")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Knn<true>)->Name("knn/omp")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Silhouette<false>)->Name("silhouette/serial")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Silhouette<true>)->Name("silhouette/omp")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TsneGradient<false>)->Name("tsne_gradient/serial")->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TsneGradient<true>)->Name("tsne_gradient/omp")->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
