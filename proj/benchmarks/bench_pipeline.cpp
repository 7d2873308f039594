#include <benchmark/benchmark.h>

#include "rpeq/equilibrium.hpp"

using namespace rpeq;

namespace {

void BM_SimulatePaths(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate_paths(MarketParams{}, TimeGrid{}, n, 42));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulatePaths)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_EntropicBsde(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PathEnsemble e = simulate_paths(MarketParams{}, TimeGrid{}, n, 42);
    const RegressionDesign design(e, RegressionBasis{});
    std::vector<double> term;
    for (double r : e.r_terminal()) term.push_back(-r);
    const DriverSpec d{[](std::size_t, double, double, double z1, double z2) { return entropic_driver(1.0, z1, z2); },
                       true, 0.0};
    for (auto _ : state) benchmark::DoNotOptimize(solve_bsde(design, d, term).y0);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EntropicBsde)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_Equilibrium(benchmark::State& state) {
    EquilibriumConfig c = default_config();
    c.numerics.n_paths = static_cast<std::size_t>(state.range(0));
    const PathEnsemble e = simulate_paths(c.market, c.grid, c.numerics.n_paths, c.numerics.seed);
    const RegressionDesign design(e, c.numerics.basis());
    for (auto _ : state) benchmark::DoNotOptimize(run_equilibrium(c, design).Yw0());
}
BENCHMARK(BM_Equilibrium)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
