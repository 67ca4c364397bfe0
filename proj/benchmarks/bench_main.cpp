#include <benchmark/benchmark.h>

#include "switchdiff/markov_chain.hpp"
#include "switchdiff/simulator.hpp"

namespace sd = switchdiff;

namespace {

sd::RateKernel birth_death(double up, double down) {
  return sd::RateKernel(
      [=](const sd::Vector&, sd::Regime i, sd::RateRow& out) {
        out.clear();
        if (i > 1) out.push_back({i - 1, down});
        out.push_back({i + 1, up});
      },
      up + down, {}, true);
}

sd::ModelSpec scalar_model() {
  sd::ModelSpec m;
  m.dim = 1;
  m.noise_dim = 1;
  m.drift = [](const sd::Vector& x, sd::Regime i, sd::Vector& out) {
    out = (i == 1 ? -1.0 : -0.5) * x;
  };
  m.diffusion = [](const sd::Vector& x, sd::Regime, sd::Matrix& out) {
    out.resize(1, 1);
    out(0, 0) = 0.3 * x(0);
  };
  m.rate_kernel = birth_death(1.0, 2.0);
  return m;
}

void BM_SimulateSteps(benchmark::State& state) {
  const auto m = scalar_model();
  sd::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  cfg.x0 = sd::Vector::Constant(1, 0.1);
  cfg.record_stride = 1000;
  cfg.scheme = static_cast<sd::SwitchScheme>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sd::simulate(m, cfg));
    ++cfg.path_index;
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SimulateSteps)->Arg(0)->Arg(1);

void BM_TransitionMatrix(benchmark::State& state) {
  const auto chain = sd::truncate(birth_death(1.0, 2.0), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sd::transition_matrix(chain, 5.0));
}
BENCHMARK(BM_TransitionMatrix)->Arg(10)->Arg(30)->Arg(100);

void BM_InvariantMeasure(benchmark::State& state) {
  const auto chain = sd::truncate(birth_death(1.0, 2.0), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sd::invariant_measure(chain));
}
BENCHMARK(BM_InvariantMeasure)->Arg(10)->Arg(30)->Arg(100)->Arg(300);

}  // namespace
BENCHMARK_MAIN();
