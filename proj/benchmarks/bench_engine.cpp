#include <benchmark/benchmark.h>

#include "msr/engine.hpp"

using namespace msr;

namespace {

SystemParams symmetric(std::size_t k, double rho) {
    return SystemParams::from_rho(std::vector<double>(k, rho), std::vector<double>(k, 1.0),
                                  std::vector<double>(k, 1.0));
}

void simulate_events(benchmark::State& state, DecisionSetting setting) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const auto p = symmetric(k, 0.3 / static_cast<double>(k));
    SimState x{std::vector<std::int64_t>(k, 0), std::vector<std::uint8_t>(k, 1), {}};
    SimOptions o;
    o.sampling = SampleMode::None;
    o.max_events = 100'000;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        const auto tr = simulate(p, setting, Slc{}, x, std::numeric_limits<double>::infinity(), ++seed, o);
        benchmark::DoNotOptimize(tr.final_state.q.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(o.max_events));
}

void BM_SimulateSettingI(benchmark::State& s) { simulate_events(s, SettingI{}); }
void BM_SimulateSettingII(benchmark::State& s) { simulate_events(s, SettingII{}); }
void BM_SimulateSettingIII(benchmark::State& s) { simulate_events(s, SettingIII{2.0}); }

void BM_DriftEstimate(benchmark::State& state) {
    DriftConfig cfg;
    cfg.scale_n = 2000;
    cfg.reps = 10;
    cfg.initial.shape = InitialShape::Balanced;
    for (auto _ : state) {
        benchmark::DoNotOptimize(drift_estimate(symmetric(2, 0.3), SettingI{}, Slc{}, cfg).slope);
    }
}

}  // namespace

BENCHMARK(BM_SimulateSettingI)->Arg(2)->Arg(8)->Arg(32);
BENCHMARK(BM_SimulateSettingII)->Arg(2)->Arg(8);
BENCHMARK(BM_SimulateSettingIII)->Arg(2)->Arg(8);
BENCHMARK(BM_DriftEstimate)->Unit(benchmark::kMillisecond);
