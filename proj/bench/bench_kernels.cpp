// OpenMP kernels against their single-threaded references.
#include <random>

#include <benchmark/benchmark.h>

#include "uwdl/clustering.hpp"
#include "uwdl/wdl.hpp"

using namespace uwdl;

namespace {

RowMatrix random_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

TrainConfig small_config(Eigen::Index d) {
  TrainConfig cfg;
  cfg.barycenter.epsilon = 0.1;
  cfg.barycenter.tau = 1000.0;
  cfg.barycenter.inner_iters = 50;
  cfg.barycenter.cost = rescale_cost(build_cost(SupportGrid::uniform(std::size_t(d))));
  return cfg;
}

template <bool Parallel>
void BM_BarycenterBatch(benchmark::State& st) {
  const Eigen::Index n = st.range(0), d = 64, k = 8;
  const TrainConfig cfg = small_config(d);
  const Matrix atoms = random_rows(k, d, 1).transpose();
  WeightLogits w{random_rows(n, k, 2)};
  const RowMatrix lambdas = w.lambda();
  for (auto _ : st) {
    RowMatrix out = Parallel ? barycenter_batch(atoms, lambdas, cfg.barycenter)
                             : barycenter_batch_serial(atoms, lambdas, cfg.barycenter);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Gradients(benchmark::State& st) {
  const Eigen::Index n = st.range(0), d = 64;
  const TrainConfig cfg = small_config(d);
  const RowMatrix data = random_rows(n, d, 3) / double(d);
  const TrainState state = init_state(data, 8, 4);
  for (auto _ : st) {
    Gradients g = Parallel ? gradients(state, data, cfg) : gradients_serial(state, data, cfg);
    benchmark::DoNotOptimize(g.loss);
  }
}

template <bool Parallel>
void BM_Knn(benchmark::State& st) {
  const RowMatrix pts = random_rows(st.range(0), 24, 5);
  for (auto _ : st) {
    KnnGraph g = Parallel ? knn_graph(pts, 25) : knn_graph_serial(pts, 25);
    benchmark::DoNotOptimize(g.adjacency.nonZeros());
  }
}

template <bool Parallel>
void BM_Inpaint(benchmark::State& st) {
  HsiCube cube;
  cube.height = 80;
  cube.width = 80;
  cube.wavelengths = SupportGrid::uniform(64);
  cube.reflectance = random_rows(6400, 64, 6);
  std::vector<std::size_t> idx;
  std::vector<int> lab;
  for (std::size_t i = 0; i < 6400; i += std::size_t(st.range(0))) {
    idx.push_back(i);
    lab.push_back(int(i % 6) + 1);
  }
  for (auto _ : st) {
    LabelMap m = Parallel ? inpaint(cube, idx, lab) : inpaint_serial(cube, idx, lab);
    benchmark::DoNotOptimize(m.labels.data());
  }
}

}  // namespace

BENCHMARK(BM_BarycenterBatch<true>)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BarycenterBatch<false>)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gradients<true>)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gradients<false>)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Knn<true>)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Knn<false>)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Inpaint<true>)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Inpaint<false>)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
