#include <benchmark/benchmark.h>

#include <cmath>

#include "meanfield/diagnostics.hpp"
#include "meanfield/kernels.hpp"
#include "meanfield/particle_sim.hpp"
#include "meanfield/torus.hpp"

namespace {

mfl::KernelSpec make_log_kernel(int n) {
  return mfl::build_kernel(mfl::KernelFamily::PeriodicLog, {}, n);
}

void BM_DirectForceSum(benchmark::State& state) {
  auto N = static_cast<int>(state.range(0));
  auto kernel = make_log_kernel(256);
  mfl::SimConfig cfg;
  cfg.N = N;
  cfg.sigma = 0.5;
  cfg.dt = 1e-4;
  cfg.T = 1e-4;
  cfg.kernel = &kernel;
  cfg.init = mfl::InitLaw::Lattice;
  auto ens = mfl::init_ensemble(cfg);
  for (auto _ : state) {
    mfl::step(ens, cfg);
    benchmark::DoNotOptimize(ens.positions[0][0]);
  }
  state.SetComplexityN(N);
}
BENCHMARK(BM_DirectForceSum)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_Transform(benchmark::State& state) {
  auto n = static_cast<int>(state.range(0));
  mfl::GridField f(1, n);
  for (std::size_t j = 0; j < f.size(); ++j) f.values[j] = std::sin(2.0 * M_PI * f.point(j)[0]);
  for (auto _ : state) {
    auto c = mfl::forward_transform(f);
    benchmark::DoNotOptimize(c.modes[1]);
  }
}
BENCHMARK(BM_Transform)->RangeMultiplier(4)->Range(256, 4096);

void BM_ModulatedEnergy(benchmark::State& state) {
  auto N = static_cast<int>(state.range(0));
  auto kernel = make_log_kernel(256);
  mfl::GridField rhobar(1, 256, 1.0);
  auto ref = mfl::make_meanfield_ref(kernel, rhobar, 0.5);
  std::vector<mfl::TorusPoint> xs(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i)
    xs[static_cast<std::size_t>(i)] = {static_cast<double>(i) / N + 0.1 / N, 0.0};
  for (auto _ : state) {
    double k = mfl::modulated_energy_config(xs, ref);
    benchmark::DoNotOptimize(k);
  }
}
BENCHMARK(BM_ModulatedEnergy)->RangeMultiplier(2)->Range(16, 256);

}  // namespace

BENCHMARK_MAIN();
