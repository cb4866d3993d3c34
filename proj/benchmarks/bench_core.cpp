#include <benchmark/benchmark.h>

#include "fdelab/evolution.hpp"
#include "fdelab/profiles.hpp"
#include "fdelab/random_fields.hpp"
#include "fdelab/rescaled.hpp"

using namespace fdelab;

namespace {

GridPtr grid_for(int64_t n, bool polar) {
    if (polar) return build_grid(GridDescriptor::polar2d(1.0, 1.5, static_cast<std::size_t>(n), 4 * n));
    return build_grid(GridDescriptor::interval(0.0, 1.0, static_cast<std::size_t>(n)));
}

Field sample(const GridPtr& g) {
    Rng rng = make_rng(1);
    return smooth_positive_field(g, rng);
}

void BM_Laplacian(benchmark::State& st) {
    const auto g = grid_for(st.range(0), st.range(1) != 0);
    const LaplaceOperator op(g);
    const Field w = sample(g);
    for (auto _ : st) benchmark::DoNotOptimize(op.apply(w));
    st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(g->size()));
}
BENCHMARK(BM_Laplacian)->Args({256, 0})->Args({4096, 0})->Args({16, 0})->Args({32, 1});

void BM_Poisson(benchmark::State& st) {
    const auto g = grid_for(st.range(0), st.range(1) != 0);
    const LaplaceOperator op(g);
    const Field f = sample(g);
    for (auto _ : st) benchmark::DoNotOptimize(op.solve_poisson(f));
    st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(g->size()));
}
BENCHMARK(BM_Poisson)->Args({256, 0})->Args({4096, 0})->Args({16, 1})->Args({32, 1});

void BM_FdeStep(benchmark::State& st) {
    const FdeParams p(3.0, st.range(1) != 0 ? 2 : 1);
    const auto g = grid_for(st.range(0), st.range(1) != 0);
    const Field u = sample(g);
    const auto cfg = EvolutionConfig::physical();
    for (auto _ : st) benchmark::DoNotOptimize(step_fde(u, 1e-3, p, cfg));
}
BENCHMARK(BM_FdeStep)->Args({256, 0})->Args({16, 1});

void BM_RescaledStep(benchmark::State& st) {
    const FdeParams p(3.0, st.range(1) != 0 ? 2 : 1);
    const auto g = grid_for(st.range(0), st.range(1) != 0);
    const Field v = sample(g);
    const auto cfg = EvolutionConfig::rescaled();
    for (auto _ : st) benchmark::DoNotOptimize(step_rescaled(v, 1e-2, p, cfg));
}
BENCHMARK(BM_RescaledStep)->Args({256, 0})->Args({16, 1});

void BM_Minimizer(benchmark::State& st) {
    const FdeParams p(3.0, 1);
    const auto g = grid_for(st.range(0), false);
    const Field init = default_initializer(g);
    for (auto _ : st) benchmark::DoNotOptimize(minimize_rayleigh(p, g, init));
}
BENCHMARK(BM_Minimizer)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
