#include <benchmark/benchmark.h>

#include "flowalign/classify.hpp"
#include "flowalign/fmasolve.hpp"
#include "flowalign/fmatrain.hpp"
#include "flowalign/velocitynet.hpp"

using namespace flowalign;

namespace {

Matrix random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.normal();
    return m;
}

}  // namespace

static void BM_ForwardBatch(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const auto params = init_params(NetConfig{32, {256, 256}, 16}, 1);
    const Matrix xs = random_rows(batch, 32, 2);
    std::vector<double> ts(batch, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_batch(params, xs, ts));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_ForwardBatch)->Arg(1)->Arg(64)->Arg(512);

static void BM_Backward(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const auto params = init_params(NetConfig{32, {256, 256}, 16}, 1);
    Rng rng(3);
    std::vector<RegressionItem> items(batch);
    for (auto& it : items) {
        it.x = Vector(32);
        it.target = Vector(32);
        for (auto& v : it.x) v = rng.normal();
        for (auto& v : it.target) v = rng.normal();
        it.t = rng.uniform();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(params, items));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Backward)->Arg(8)->Arg(64);

static void BM_TrainEpoch(benchmark::State& state) {
    SynthConfig sc;
    sc.seed = 1;
    const auto data = generate_synthetic(sc);
    TrainConfig tc;
    tc.seed = 1;
    tc.epochs = 1;
    const auto init = init_params(NetConfig{32, {256, 256}, 16}, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_from(data.train, init, tc));
    }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

static void BM_StepCurves(benchmark::State& state) {
    SynthConfig sc;
    sc.seed = 1;
    const auto data = generate_synthetic(sc);
    const auto params = init_params(NetConfig{32, {256, 256}, 16}, 1);
    const auto workers = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(step_curves(data.test, params, 0.1, 10, workers));
    }
}
BENCHMARK(BM_StepCurves)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
