#include <benchmark/benchmark.h>

#include "dharm/generator.hpp"
#include "dharm/harmonic.hpp"
#include "dharm/oracle.hpp"

using namespace dharm;

namespace {

DiffusionSpec ou_line() { return ornstein_uhlenbeck(1.0, {-kInf, kInf}, 0.0); }
DiffusionSpec brownian_closed() { return brownian({0.0, 1.0, true, true}, 0.5); }

void BM_BoundaryReport(benchmark::State& state) {
    const auto spec = bessel(3.0, {0.0, kInf}, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(boundary_report(spec));
}
BENCHMARK(BM_BoundaryReport)->Unit(benchmark::kMillisecond);

void BM_PicardSeries(benchmark::State& state) {
    const auto spec = ou_line();
    GridSettings gs;
    gs.grid_points = static_cast<int>(state.range(0));
    const auto grid = build_grid(spec, boundary_report(spec), 2.0, gs);
    for (auto _ : state) benchmark::DoNotOptimize(picard_series(grid, 1.0));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PicardSeries)->RangeMultiplier(4)->Range(512, 8192)->Unit(benchmark::kMillisecond)->Complexity();

void BM_HarmonicSpace(benchmark::State& state) {
    const auto spec = brownian_closed();
    for (auto _ : state) benchmark::DoNotOptimize(harmonic_space(spec, 1.0));
}
BENCHMARK(BM_HarmonicSpace)->Unit(benchmark::kMillisecond);

void BM_HarmonicInDomain(benchmark::State& state) {
    const auto spec = brownian({0.0, 1.0, true, true}, 0.5, {{0.0, 0.5}});
    for (auto _ : state) benchmark::DoNotOptimize(harmonic_in_domain(spec, 1.0));
}
BENCHMARK(BM_HarmonicInDomain)->Unit(benchmark::kMillisecond);

void BM_FdExitFunctional(benchmark::State& state) {
    const auto spec = brownian({0.0, 1.0, false, true}, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(fd_exit_functional(spec, 0.5, Side::right, 0.3));
}
BENCHMARK(BM_FdExitFunctional)->Unit(benchmark::kMillisecond);

void BM_McExitFunctional(benchmark::State& state) {
    const auto spec = brownian({0.0, 1.0, false, true}, 0.5);
    McSettings ms;
    ms.threads = 1;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            mc_exit_functional(spec, 0.5, Side::right, 0.3, static_cast<std::size_t>(state.range(0)), 7, ms));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McExitFunctional)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
