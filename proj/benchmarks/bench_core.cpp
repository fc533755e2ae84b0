#include "radnls/dynamics.hpp"
#include "radnls/groundstate.hpp"
#include "radnls/specfun.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace radnls;

static void BM_BesselJ(benchmark::State& st) {
  const BesselOrder nu(std::sqrt(0.25 + 1.0));
  double x = 0.1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(specfun::bessel_j(nu, x));
    x = x > 200.0 ? 0.1 : x * 1.37;
  }
}
BENCHMARK(BM_BesselJ);

static void BM_BesselZeros(benchmark::State& st) {
  const BesselOrder nu(0.25);
  for (auto _ : st)
    benchmark::DoNotOptimize(specfun::bessel_zeros(nu, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_BesselZeros)->Arg(256)->Arg(1024);

static void BM_BuildBasis(benchmark::State& st) {
  const Params p = Params::make(3, -3.0 / 16, 3.0);
  for (auto _ : st)
    benchmark::DoNotOptimize(build_basis(p, 64.0, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_BuildBasis)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_StrangStep(benchmark::State& st) {
  const Params p = Params::make(3, 0.0, 3.0);
  auto b = build_basis(p, 64.0, static_cast<int>(st.range(0)));
  SimState s = SimState::from_field(
      RadialField::from_function(b, [](double r) { return std::exp(-r * r / 2.0); }));
  for (auto _ : st)
    s = strang_step(s, 1e-3);
  st.SetItemsProcessed(st.iterations());
}
BENCHMARK(BM_StrangStep)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMicrosecond);

static void BM_GroundState(benchmark::State& st) {
  const Params p = Params::make(3, 0.0, 3.0);
  auto b = build_basis(p, 30.0, 256);
  for (auto _ : st)
    benchmark::DoNotOptimize(solve_ground_state(p, b));
}
BENCHMARK(BM_GroundState)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
