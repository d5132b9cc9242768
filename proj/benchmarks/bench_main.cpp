// Microbenchmarks for the hot paths: pseudo-boundary search, network
// forward/backward, dense matmul, ranking metrics and clustering.

#include <benchmark/benchmark.h>

#include <vector>

#include "bassl/boundary.hpp"
#include "bassl/crn.hpp"
#include "bassl/metrics.hpp"
#include "bassl/ops.hpp"
#include "bassl/rng.hpp"

using namespace bassl;

namespace {

Mat random_mat(size_t rows, size_t cols, uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (auto& v : m.data) v = rng.gaussian();
  return m;
}

template <typename T>
Tensor<T> random_tensor(size_t rows, size_t cols, uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<T> v(rows * cols);
  for (auto& x : v) x = static_cast<T>(rng.gaussian());
  return Tensor<T>::from({rows, cols}, std::move(v), grad);
}

void BM_DtwBoundary(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto window = random_mat(2 * static_cast<size_t>(K) + 1, 32, 1);
  const auto anchors = random_mat(2, 32, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtw_boundary(window, anchors));
  }
}
BENCHMARK(BM_DtwBoundary)->Arg(4)->Arg(8);

void BM_Matmul(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  auto a = random_tensor<double>(n, n, 3);
  auto b = random_tensor<double>(n, n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b).values().data());
  }
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_CrnForward(benchmark::State& state) {
  CrnConfig cfg;
  cfg.K = static_cast<int>(state.range(0));
  auto ps = init_crn_params<double>(cfg, 5);
  auto window = random_tensor<double>(static_cast<size_t>(cfg.seq_len()),
                                      static_cast<size_t>(cfg.D_e), 6);
  Rng rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crn_forward(cfg, ps, window, {}, false, rng).values().data());
  }
}
BENCHMARK(BM_CrnForward)->Arg(4)->Arg(8);

void BM_CrnForwardBackward(benchmark::State& state) {
  CrnConfig cfg;
  cfg.K = static_cast<int>(state.range(0));
  auto ps = init_crn_params<double>(cfg, 5);
  auto window = random_tensor<double>(static_cast<size_t>(cfg.seq_len()),
                                      static_cast<size_t>(cfg.D_e), 6);
  Rng rng(7);
  for (auto _ : state) {
    ps.zero_grads();
    auto loss = mean_all(crn_forward(cfg, ps, window, {}, true, rng));
    backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_CrnForwardBackward)->Arg(4)->Arg(8);

void BM_AveragePrecision(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(8);
  std::vector<double> scores(n);
  std::vector<uint8_t> labels(n);
  for (size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = static_cast<uint8_t>(rng.uniform() < 0.1);
  }
  labels[0] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(average_precision(scores, labels));
  }
}
BENCHMARK(BM_AveragePrecision)->Arg(1000)->Arg(10000);

void BM_KMeans(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  const auto points = random_mat(n, 16, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kmeans(points, 8, 2, 10));
  }
}
BENCHMARK(BM_KMeans)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
