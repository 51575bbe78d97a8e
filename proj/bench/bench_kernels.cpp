// Parallel kernels vs the serial reference.
//   spiketempo_bench --benchmark_filter=Conv
// Thread count follows OMP_NUM_THREADS / SPIKETEMPO_THREADS.

#include <benchmark/benchmark.h>

#include "spiketempo/delay_net.hpp"
#include "spiketempo/kernels.hpp"
#include "spiketempo/profiler.hpp"
#include "spiketempo/rng.hpp"

using namespace spiketempo;

namespace {

Tensor3 raster(std::size_t T, std::size_t B, std::size_t N, double p) {
  Tensor3 x(T, B, N);
  Rng rng(1);
  for (auto& v : x.values()) v = rng.uniform() < p ? 1.0 : 0.0;
  return x;
}

DelayLayer layer(std::size_t in, std::size_t out, std::size_t D) {
  DelayLayer l(in, out, D);
  Rng rng(2);
  for (auto& w : l.weights) w = rng.uniform(-0.5, 0.5);
  return l;
}

// args: units, density percent
template <Tensor3 (*Conv)(const Tensor3&, const DelayLayer&)>
void BM_Conv(benchmark::State& state) {
  const auto units = static_cast<std::size_t>(state.range(0));
  Tensor3 x = raster(100, 8, units, state.range(1) / 100.0);
  DelayLayer l = layer(units, units, 8);
  for (auto _ : state) benchmark::DoNotOptimize(Conv(x, l));
  state.SetItemsProcessed(state.iterations() * 8);
}

void BM_ConvKernel(benchmark::State& s) { BM_Conv<kernels::delay_conv_forward>(s); }
void BM_ConvReference(benchmark::State& s) { BM_Conv<reference::delay_conv_forward>(s); }

void BM_TrKernel(benchmark::State& state) {
  Tensor3 x = raster(100, 8, static_cast<std::size_t>(state.range(0)), 0.2);
  const TrConfig c{TrVariant::no_overlap, 2, 1};
  const GroupPlan plan = plan_groups(100, c);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::group_max(x, plan, c.reduction, nullptr));
}

void BM_TrReference(benchmark::State& state) {
  Tensor3 x = raster(100, 8, static_cast<std::size_t>(state.range(0)), 0.2);
  const TrConfig c{TrVariant::no_overlap, 2, 1};
  for (auto _ : state) benchmark::DoNotOptimize(reference::temporal_reconstruction(x, c));
}

void BM_NetworkForward(benchmark::State& state) {
  NetworkSpec s;
  s.n_inputs = 64;
  s.n_classes = 10;
  s.hidden.push_back(ModuleSpec{64, 8, 0.0, LifParams{}});
  s.hidden.push_back(ModuleSpec{64, 8, 0.0, LifParams{}});
  s.nar = {false, true};
  if (state.range(0)) s.tr.push_back(TrStage{TrConfig{TrVariant::no_overlap, 2, 1}, 0});
  Network net = build_network(s, 0);
  Tensor3 x = raster(100, 1, 64, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(network_forward(net, x));
  state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK(BM_ConvKernel)->ArgsProduct({{64, 256}, {5, 30}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvReference)->ArgsProduct({{64, 256}, {5, 30}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrKernel)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrReference)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NetworkForward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
