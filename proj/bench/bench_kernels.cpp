#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "vehdet/network.hpp"
#include "vehdet/ops.hpp"
#include "vehdet/ops_reference.hpp"

using namespace vehdet;

namespace {

Tensor noise(Shape4 s, std::uint32_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(s.count());
  for (float& x : v) x = u(rng);
  return Tensor(s, std::move(v));
}

// Grouped 1x1 at a stage-3 sized map, the network's dominant cost.
ConvParams pointwise(int c, int groups) {
  ConvParams p;
  p.weights = noise({c, c / groups, 1, 1}, 2);
  p.groups = groups;
  return p;
}

ConvParams depthwise(int c) {
  ConvParams p;
  p.weights = noise({c, 1, 3, 3}, 3);
  p.pad = 1;
  p.groups = c;
  return p;
}

ConvParams dense3(int in, int out) {
  ConvParams p;
  p.weights = noise({out, in, 3, 3}, 4);
  p.pad = 1;
  return p;
}

template <auto Kernel>
void BM_pointwise(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Tensor x = noise({1, c, 32, 32}, 1);
  const ConvParams p = pointwise(c, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, p));
}

template <auto Kernel>
void BM_depthwise(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Tensor x = noise({1, c, 32, 32}, 1);
  const ConvParams p = depthwise(c);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, p));
}

template <auto Kernel>
void BM_deformable(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Tensor x = noise({1, c, 32, 32}, 1);
  const Tensor offsets = noise({1, 18, 32, 32}, 5, -2.0f, 2.0f);
  const ConvParams p = dense3(c, c);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, offsets, p));
}

void BM_forward(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.input_size = static_cast<int>(state.range(1));
  const Network net = build_network(cfg, 11);
  const Tensor image = noise({1, 3, cfg.input_size, cfg.input_size}, 6, -0.5f, 0.5f);
  const int previous = omp_get_max_threads();
  omp_set_num_threads(state.range(0) == 0 ? omp_get_num_procs() : 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(image));
  omp_set_num_threads(previous);
}

}  // namespace

BENCHMARK(BM_pointwise<reference::conv2d>)->Name("pointwise/serial")->Arg(240)->Arg(480);
BENCHMARK(BM_pointwise<conv2d>)->Name("pointwise/omp")->Arg(240)->Arg(480);
BENCHMARK(BM_depthwise<reference::depthwise_conv2d>)->Name("depthwise/serial")->Arg(240)->Arg(480);
BENCHMARK(BM_depthwise<depthwise_conv2d>)->Name("depthwise/omp")->Arg(240)->Arg(480);
BENCHMARK(BM_deformable<reference::deformable_conv2d>)->Name("deformable/serial")->Arg(30)->Arg(60);
BENCHMARK(BM_deformable<deformable_conv2d>)->Name("deformable/omp")->Arg(30)->Arg(60);
// range(0): 1 = single thread, 0 = every core.
BENCHMARK(BM_forward)->Name("forward")->Args({1, 256})->Args({0, 256})->Args({1, 512})->Args({0, 512})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
