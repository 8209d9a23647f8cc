// Parallel kernels against the serial reference on desk-sized inputs.
//   dam_bench --benchmark_filter=Loss

#include <benchmark/benchmark.h>

#include <random>

#include "dam/datasets.hpp"
#include "dam/network.hpp"
#include "dam/reference.hpp"

using namespace dam;

namespace {

struct Fixture {
    MemoryBank bank;
    std::vector<Item> batch;
    NetParams params = NetParams::desk();
    std::vector<std::size_t> loss;
    double beta;

    Fixture(std::size_t memories, std::size_t items) {
        Rng rng(3);
        std::bernoulli_distribution coin(0.5);
        for (std::size_t b = 0; b < items; ++b) {
            std::vector<double> px(kImagePixels);
            for (double& v : px) v = coin(rng) ? 1.0 : -1.0;
            batch.push_back(encode_item(px, static_cast<int>(b % 10), 0, 5));
        }
        bank = MemoryBank::random_normal(batch[0].pattern.layout, memories, 0.1, rng);
        loss = bank.layout.class_neurons();
        beta = params.beta(1, bank.width());
    }
};

void BM_LossGrad_Parallel(benchmark::State& st) {
    Fixture fx(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    for (auto _ : st)
        benchmark::DoNotOptimize(batch_loss_and_grad(std::span<const Item>(fx.batch), fx.bank, fx.params, fx.beta, fx.loss));
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_LossGrad_Reference(benchmark::State& st) {
    Fixture fx(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    for (auto _ : st)
        benchmark::DoNotOptimize(reference::batch_loss_and_grad(fx.batch, fx.bank, fx.params, fx.beta, fx.loss));
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_Fields_Parallel(benchmark::State& st) {
    Fixture fx(static_cast<std::size_t>(st.range(0)), 1);
    const auto& xi = fx.batch[0].pattern;
    const auto all = xi.layout.all_neurons();
    const auto f = fx.params.interaction();
    for (auto _ : st) benchmark::DoNotOptimize(neuron_fields(xi, all, fx.bank, fx.beta, f));
}

void BM_Fields_Reference(benchmark::State& st) {
    Fixture fx(static_cast<std::size_t>(st.range(0)), 1);
    const auto& xi = fx.batch[0].pattern;
    const auto f = fx.params.interaction();
    for (auto _ : st)
        for (std::size_t i = 0; i < xi.size(); ++i) benchmark::DoNotOptimize(reference::neuron_field(xi, i, fx.bank, fx.beta, f));
}

}  // namespace

BENCHMARK(BM_LossGrad_Parallel)->Args({128, 100})->Args({512, 100})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGrad_Reference)->Args({128, 100})->Args({512, 100})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fields_Parallel)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fields_Reference)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
