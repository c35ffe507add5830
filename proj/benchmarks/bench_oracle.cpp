#include <benchmark/benchmark.h>

#include "msr/oracle.hpp"

using namespace msr;

namespace {

const SystemParams kTwo = SystemParams::from_rho({0.2, 0.2}, {1.0, 1.0}, {1.0, 1.0});

void BM_BuildChain(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_chain(kTwo, SettingI{}, Slc{}, state.range(0)).num_states);
    }
}

void BM_SolveSparseLU(benchmark::State& state) {
    const auto chain = build_chain(kTwo, SettingI{}, Slc{}, state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_stationary(chain).residual);
}

void BM_SolvePower(benchmark::State& state) {
    const auto chain = build_chain(kTwo, SettingI{}, Slc{}, state.range(0));
    StationaryOptions o;
    o.method = StationaryMethod::Power;
    o.tol = 1e-10;
    for (auto _ : state) benchmark::DoNotOptimize(solve_stationary(chain, o).residual);
}

}  // namespace

BENCHMARK(BM_BuildChain)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveSparseLU)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolvePower)->Arg(10)->Unit(benchmark::kMillisecond);
