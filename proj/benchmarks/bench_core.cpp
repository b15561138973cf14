#include <benchmark/benchmark.h>

#include "permpoint/counting.hpp"
#include "permpoint/network.hpp"
#include "permpoint/numerics.hpp"
#include "permpoint/pathfinder.hpp"
#include "permpoint/symmetry.hpp"

using namespace permpoint;

namespace {

Dataset make_data(const NetworkParams& teacher, std::size_t count, Rng& rng) {
    Dataset data;
    data.inputs = DenseMatrix(count, teacher.input_dim());
    for (double& v : data.inputs.entries) v = rng.normal();
    data.targets = forward_all(teacher, data.inputs);
    return data;
}

void BM_LossAndGradient(benchmark::State& state) {
    Rng rng(1);
    NetworkParams net = make_network({2, 5, 1}, Activation::relu, rng);
    Dataset data = make_data(net, static_cast<std::size_t>(state.range(0)), rng);
    NetworkParams probe = make_network({2, 5, 1}, Activation::relu, rng);
    for (auto _ : state) {
        auto lg = loss_and_gradient(probe, data, LossKind::mse);
        benchmark::DoNotOptimize(lg.loss);
    }
}
BENCHMARK(BM_LossAndGradient)->Arg(100)->Arg(1000);

void BM_JacobiEigen(benchmark::State& state) {
    Rng rng(2);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    DenseMatrix a(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r; c < n; ++c) {
            double x = rng.normal();
            a.at(r, c) = x;
            a.at(c, r) = x;
        }
    for (auto _ : state) {
        auto ed = symmetric_eigen(a);
        benchmark::DoNotOptimize(ed.spectrum.n_zero);
    }
}
BENCHMARK(BM_JacobiEigen)->Arg(10)->Arg(30)->Arg(60);

void BM_SurjectionCount(benchmark::State& state) {
    const unsigned n = static_cast<unsigned>(state.range(0));
    for (auto _ : state) {
        BigCount c = surjection_count(n, n / 2);
        benchmark::DoNotOptimize(c.is_zero());
    }
}
BENCHMARK(BM_SurjectionCount)->Arg(10)->Arg(20)->Arg(30);

void BM_MergeStep(benchmark::State& state) {
    Rng rng(15);
    NetworkParams teacher = make_network({2, 4, 1}, Activation::softplus, rng);
    Dataset data = make_data(teacher, 200, rng);
    MergeSettings settings;
    settings.n_delta_steps = 4;
    settings.inner.loss_flat_window = 0;
    for (auto _ : state) {
        PathTrace trace =
            merge_descent(teacher, data, LossKind::mse, 0, 0, 1, settings);
        benchmark::DoNotOptimize(trace.max_loss());
    }
}
BENCHMARK(BM_MergeStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
