#include <benchmark/benchmark.h>

#include "qbroad/propagator.hpp"

using namespace qbroad;

static void BM_StrangStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Grid grid(n);
    const int kp = n / 4;
    const auto spec = normalize_spectrum(grid, 12.0 / kp);
    const auto potential = sample_potential(grid, spec, 7);
    WaveField field = init_plane_wave(grid, {kp, 0});
    EvolveConfig cfg{kp * kp / 24.0, default_tau(kp), 1, 1};
    for (auto _ : state) {
        field = strang_step(grid, field, potential, cfg);
        benchmark::DoNotOptimize(field.amplitudes.data());
    }
}
BENCHMARK(BM_StrangStep)->Arg(64)->Arg(128)->Arg(192)->Arg(256);

static void BM_SamplePotential(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Grid grid(n);
    const auto spec = normalize_spectrum(grid, 12.0 / (n / 4.0));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        auto field = sample_potential(grid, spec, seed++);
        benchmark::DoNotOptimize(field.values.data());
    }
}
BENCHMARK(BM_SamplePotential)->Arg(128)->Arg(256);
