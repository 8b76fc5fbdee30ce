// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "cmps/processes.hpp"
#include "cmps/sampling.hpp"
#include "cmps/stats.hpp"
#include "cmps/training.hpp"

using namespace cmps;

namespace {

ModelParameters model(int D, Coupling coupling) {
  InitConfig ic;
  ic.bond_dim = D;
  ic.coupling = coupling;
  ic.dt = 1e-3;
  ic.omega_std = 300.0;
  return init_params(ic, 1);
}

SignalSet gp_batch(std::size_t n, std::size_t length) {
  MsmSpec spec;
  spec.dt = 1e-3;
  return gen_gp(spec, n, length, 2);
}

template <bool Parallel>
void BM_Gradient(benchmark::State& state) {
  const auto p = model(static_cast<int>(state.range(0)), Coupling::Direct);
  const auto batch = gp_batch(8, 128);
  LossConfig lc;
  lc.state = state.range(1) ? StateKind::Density : StateKind::Pure;
  for (auto _ : state) {
    auto g = Parallel ? gradient(p, batch, lc) : serial::gradient(p, batch, lc);
    benchmark::DoNotOptimize(g.data_loss);
  }
}

template <bool Parallel>
void BM_SampleSde(benchmark::State& state) {
  const auto p = model(static_cast<int>(state.range(0)), Coupling::Derivative);
  SampleConfig cfg;
  cfg.temperature = 0.5;
  cfg.n_steps = 256;
  cfg.n_samples = 64;
  for (auto _ : state) {
    auto s = Parallel ? sample_sde(p, cfg) : serial::sample_sde(p, cfg);
    benchmark::DoNotOptimize(s.data.data());
  }
}

template <bool Parallel>
void BM_GenGp(benchmark::State& state) {
  MsmSpec spec;
  spec.components = {{2.0, 50.0, 300.0}, {2.0, 50.0, 500.0}, {2.0, 50.0, 700.0}};
  spec.dt = 1e-3;
  for (auto _ : state) {
    auto s = Parallel ? gen_gp(spec, 10000, 51, 3) : serial::gen_gp(spec, 10000, 51, 3);
    benchmark::DoNotOptimize(s.data.data());
  }
}

template <bool Parallel>
void BM_GenFpp(benchmark::State& state) {
  FppSpec spec;
  for (auto _ : state) {
    auto s = Parallel ? gen_fpp(spec, 5000, 4) : serial::gen_fpp(spec, 5000, 4);
    benchmark::DoNotOptimize(s.data.data());
  }
}

template <bool Parallel>
void BM_Covariance(benchmark::State& state) {
  const auto s = gp_batch(10000, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto c = Parallel ? empirical_covariance(s) : serial::empirical_covariance(s);
    benchmark::DoNotOptimize(c.value.data());
  }
}

}  // namespace

BENCHMARK(BM_Gradient<false>)->Args({16, 0})->Args({50, 0})->Args({16, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gradient<true>)->Args({16, 0})->Args({50, 0})->Args({16, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleSde<false>)->Arg(16)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleSde<true>)->Arg(16)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenGp<false>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenGp<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenFpp<false>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenFpp<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Covariance<false>)->Arg(51)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Covariance<true>)->Arg(51)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
