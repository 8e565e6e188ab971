#include <benchmark/benchmark.h>

#include "airy_ldp/brownian_paths.hpp"
#include "airy_ldp/moment_estimator.hpp"
#include "airy_ldp/riccati_solver.hpp"
#include "airy_ldp/spectral_oracle.hpp"

using namespace airy_ldp;

namespace {

void BM_sample_path(benchmark::State& state) {
    const PathGrid grid = make_grid(1e-2, 60.0);
    std::uint64_t stream = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sample_path(grid, 1, stream++));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.n_points));
}
BENCHMARK(BM_sample_path);

void BM_count_sao(benchmark::State& state) {
    const double lambda = static_cast<double>(state.range(0));
    const BrownianPath path = sample_path(make_grid(1e-2, sao_required_length(lambda) + 1e-2), 1);
    for (auto _ : state) benchmark::DoNotOptimize(count_sao(path, 2.0, lambda));
}
BENCHMARK(BM_count_sao)->Arg(0)->Arg(10)->Arg(40);

void BM_sturm_count(benchmark::State& state) {
    const auto cells = static_cast<std::size_t>(state.range(0));
    const double h = 1.0 / static_cast<double>(cells);
    const BrownianPath path = sample_path(make_grid(h, 1.0), 2);
    const TridiagonalOperator op = discretize(path, 2.0, 0.0, 1.0, BoundaryCondition::dirichlet);
    for (auto _ : state) benchmark::DoNotOptimize(eigen_count(op, 500.0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(op.size()));
}
BENCHMARK(BM_sturm_count)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_lowest_eigenvalues(benchmark::State& state) {
    const auto bc = static_cast<BoundaryCondition>(state.range(0));
    const BrownianPath path = sample_path(make_grid(1e-3, 1.0), 3);
    const TridiagonalOperator op = discretize(path, 2.0, 0.0, 1.0, bc);
    for (auto _ : state) benchmark::DoNotOptimize(lowest_eigenvalues(op, 10));
}
BENCHMARK(BM_lowest_eigenvalues)
    ->Arg(static_cast<int>(BoundaryCondition::dirichlet))
    ->Arg(static_cast<int>(BoundaryCondition::periodic));

void BM_spectral_statistic(benchmark::State& state) {
    EstimatorConfig c;
    c.t = static_cast<double>(state.range(0));
    c.n_samples = 1;
    const PathGrid grid = make_grid(c.riccati_step, c.path_length());
    std::uint64_t stream = 0;
    for (auto _ : state) {
        state.PauseTiming();
        const BrownianPath path = sample_path(grid, 4, stream++);
        state.ResumeTiming();
        benchmark::DoNotOptimize(spectral_statistic(path, c));
    }
}
BENCHMARK(BM_spectral_statistic)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
