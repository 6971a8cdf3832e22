#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "fsrl/env.hpp"
#include "fsrl/kernels.hpp"
#include "fsrl/simulate.hpp"

using namespace fsrl;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const RowMatrix a = RowMatrix::Random(n, n), b = RowMatrix::Random(n, n);
    RowMatrix c(n, n);
    for (auto _ : state) {
        Kernel(a.data(), b.data(), c.data(), n, n, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void bm_matmul_eigen(benchmark::State& state) {
    const auto n = state.range(0);
    const RowMatrix a = RowMatrix::Random(n, n), b = RowMatrix::Random(n, n);
    RowMatrix c(n, n);
    for (auto _ : state) {
        c.noalias() = a * b;
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}

// Final states of random episodes, re-simulated from scratch.
std::vector<FlowsheetGraph> episode_graphs(int count) {
    FlowsheetEnv env;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<FlowsheetGraph> out;
    while (static_cast<int>(out.size()) < count) {
        FlowsheetGraph g = env.reset();
        while (true) {
            const auto open = g.open_streams();
            ActionTriple a;
            a.location = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
            if (u(rng) < 0.15) {
                a.unit = UnitKind::Product;
            } else {
                a.unit = kActionUnits[std::uniform_int_distribution<int>(0, 3)(rng)];
                a.design = u(rng);
            }
            const auto r = env.step(a);
            if (r.done) {
                out.push_back(r.state);
                break;
            }
            g = r.state;
        }
    }
    return out;
}

template <auto Batch>
void bm_simulate_batch(benchmark::State& state) {
    const FlowsheetSimulator sim;
    const auto graphs = episode_graphs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Batch(sim, graphs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(bm_matmul<kernels::matmul_serial>)->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<kernels::matmul_parallel>)->Arg(64)->Arg(256);
BENCHMARK(bm_matmul_eigen)->Arg(64)->Arg(256);
BENCHMARK(bm_simulate_batch<simulate_batch_serial>)->Arg(64);
BENCHMARK(bm_simulate_batch<simulate_batch_parallel>)->Arg(64);

BENCHMARK_MAIN();
