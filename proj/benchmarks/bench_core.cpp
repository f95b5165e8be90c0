#include <benchmark/benchmark.h>

#include <random>

#include "cg/attribution.hpp"
#include "cg/network.hpp"
#include "cg/svd.hpp"
#include "cg/synthetic.hpp"
#include "cg/train.hpp"

namespace {

cg::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1, 1);
    cg::Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

void BM_svd(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    const cg::Matrix a = random_matrix(n, n, 1);
    for (auto _ : state) {
        auto result = cg::svd(a);
        benchmark::DoNotOptimize(result);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_svd)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_pinv(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    const cg::Matrix a = random_matrix(2 * n, n, 2);
    for (auto _ : state) {
        auto result = cg::pinv(a);
        benchmark::DoNotOptimize(result);
    }
}
BENCHMARK(BM_pinv)->RangeMultiplier(2)->Range(8, 64);

void BM_jacobian(benchmark::State& state) {
    const cg::Network net =
        cg::make_mlp(std::size_t(state.range(0)), 64, 4, 16, cg::Activation::Tanh, 3);
    std::vector<double> x(std::size_t(state.range(0)), 0.3);
    for (auto _ : state) {
        auto jac = cg::jacobian_at_layer(net, x, cg::LayerId{0});
        benchmark::DoNotOptimize(jac);
    }
}
BENCHMARK(BM_jacobian)->Arg(16)->Arg(32)->Arg(64);

void BM_attribute_instance(benchmark::State& state) {
    const cg::Network f = cg::make_mlp(32, 64, 4, 6, cg::Activation::Tanh, 4);
    const cg::Network g = cg::clone_with_new_head(f, 16, cg::LayerId{0}, 5);
    std::vector<double> x(32, 0.1);
    cg::AttributionConfig cfg;
    for (auto _ : state) {
        auto r = cg::attribute_instance(f, g, x, cfg);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_attribute_instance);

void BM_train_epoch(benchmark::State& state) {
    cg::SineSpec spec;
    spec.n = 1000;
    const cg::Dataset data = cg::gen_sine_dataset(spec);
    const cg::Network net = cg::make_mlp(2, 64, 4, 1, cg::Activation::Tanh, 6);
    cg::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 128;
    for (auto _ : state) {
        auto result = cg::train(net, data, cfg);
        benchmark::DoNotOptimize(result);
    }
}
BENCHMARK(BM_train_epoch);

}  // namespace

BENCHMARK_MAIN();
