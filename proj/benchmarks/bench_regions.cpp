#include <benchmark/benchmark.h>

#include "msr/regions.hpp"
#include "msr/rng.hpp"

using namespace msr;

namespace {

SystemParams spread(std::size_t k) {
    SystemParams p;
    for (std::size_t i = 0; i < k; ++i) {
        p.lambda.push_back(0.0);
        p.mu.push_back(1.0);
        p.lambda_p.push_back(1.0 + static_cast<double>(i));
        p.mu_p.push_back(static_cast<double>(k - i));
    }
    return p;
}

void BM_Contains(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const auto region = region_msr_I(spread(k));
    const auto box = region.bounding_box();
    Engine rng = make_stream(1, 0);
    std::vector<double> x(k);
    std::int64_t hits = 0;
    for (auto _ : state) {
        for (std::size_t i = 0; i < k; ++i) x[i] = box[i] * uniform01(rng);
        hits += region.contains(x);
    }
    benchmark::DoNotOptimize(hits);
}

void BM_VolMc(benchmark::State& state) {
    const auto region = region_msr_I(spread(3));
    for (auto _ : state) {
        benchmark::DoNotOptimize(vol_mc(region, {}, 1'000'000, 1, 1).value);
    }
}

void BM_GammaOpt(benchmark::State& state) {
    GammaOptConfig cfg;
    cfg.samples = 50'000;
    for (auto _ : state) benchmark::DoNotOptimize(gamma_opt(spread(3), 0.01, cfg).gamma_star);
}

}  // namespace

BENCHMARK(BM_Contains)->Arg(2)->Arg(4)->Arg(8)->Arg(12);
BENCHMARK(BM_VolMc)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GammaOpt)->Unit(benchmark::kMillisecond);
