#include <benchmark/benchmark.h>

#include "qbroad/kinetic.hpp"
#include "qbroad/theory.hpp"

using namespace qbroad;

static void BM_MemoryEvolveStep(benchmark::State& state) {
    const Grid grid(64);
    const double kp = 16.0, zeta = 0.75, epsilon = kp * kp / 24.0;
    const auto spec = normalize_spectrum(grid, zeta);
    const auto kernel = build_memory_kernel(grid, spec, epsilon,
                                            active_set_around(grid, spec, kp));
    std::vector<double> initial(kernel.active.size(), 0.0);
    initial[kernel.active.find(16, 0)] = 1.0;
    const double dt = kernel.suggested_dt();
    const int steps = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto series = memory_evolve(initial, kernel, dt, steps);
        benchmark::DoNotOptimize(series.back().data());
    }
    state.SetItemsProcessed(state.iterations() * steps * kernel.pair_a.size());
}
BENCHMARK(BM_MemoryEvolveStep)->Arg(8)->Arg(32);

static void BM_RingEvolve(benchmark::State& state) {
    const double zeta = 12.0, k = 1.0, epsilon = 1.0 / 32.0;
    const AngularCovariance cov = [&](double theta) {
        return zeta * zeta / (2.0 * 3.14159265358979324) *
               std::exp(-zeta * zeta * k * k * (1.0 - std::cos(theta)));
    };
    RingState ring{k, std::vector<double>(64, 0.0)};
    ring.density[0] = 64.0 / (2.0 * 3.14159265358979324);
    for (auto _ : state) {
        auto series = ring_evolve(ring, cov, epsilon, 100.0, 50);
        benchmark::DoNotOptimize(series.back().density.data());
    }
}
BENCHMARK(BM_RingEvolve);

static void BM_CmQuadrature(benchmark::State& state) {
    for (auto _ : state) {
        const double c0 = theory::cm_coefficient(0, 1.0, 12.0);
        benchmark::DoNotOptimize(c0);
    }
}
BENCHMARK(BM_CmQuadrature);

BENCHMARK_MAIN();
