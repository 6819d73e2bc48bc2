#include <benchmark/benchmark.h>

#include <vector>

#include "phvae/datagen.hpp"
#include "phvae/phdist.hpp"
#include "phvae/vae.hpp"

using namespace phvae;

namespace {

ph::CanonicalPH ten_phase(double first_rate) {
    std::vector<double> init(10, 0.1), rates(10);
    for (std::size_t i = 0; i < 10; ++i) rates[i] = first_rate + 0.5 * static_cast<double>(i);
    return ph::CanonicalPH(init, rates);
}

// x is passed as a percentage so the argument stays integral.
void BM_PhPdf(benchmark::State& state) {
    const auto d = ten_phase(0.2);
    const double x = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) benchmark::DoNotOptimize(ph::pdf(d, x));
}
BENCHMARK(BM_PhPdf)->Arg(10)->Arg(100)->Arg(1000)->Arg(10000);

void BM_PhLogpdfWithGrad(benchmark::State& state) {
    const auto d = ten_phase(0.2);
    const double x = static_cast<double>(state.range(0)) / 100.0;
    std::vector<double> di(10), dr(10);
    const ph::LogLikOptions opts;
    for (auto _ : state)
        benchmark::DoNotOptimize(ph::logpdf_with_grad(d.init_probs(), d.rates(), x, opts, di, dr));
}
BENCHMARK(BM_PhLogpdfWithGrad)->Arg(10)->Arg(100)->Arg(1000)->Arg(10000);

void BM_PhSample(benchmark::State& state) {
    const auto d = ten_phase(0.2);
    Rng rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(ph::sample(d, rng));
}
BENCHMARK(BM_PhSample);

// One Adam step on a 128-sample Pareto(2) batch with the paper-sized nets.
void BM_TrainStep(benchmark::State& state) {
    vae::VAEConfig cfg;
    cfg.kind = state.range(0) == 0 ? vae::DecoderKind::gaussian : vae::DecoderKind::ph;
    cfg.data_dim = static_cast<std::size_t>(state.range(1));
    vae::VAEModel model(cfg);
    model.init(Rng(2));
    Rng rng(3);
    ad::Tensor batch(128, cfg.data_dim);
    for (auto& v : batch.values()) v = data::pareto_transform(2.0, 1.0, rng.uniform());
    auto params = model.parameters();
    nn::Adam adam(params);
    for (auto _ : state) {
        ad::Tape tape;
        const auto terms = vae::elbo(model, tape, batch, rng);
        tape.backward(terms.loss);
        adam.step();
        adam.zero_grad();
    }
    state.SetLabel(vae::to_string(cfg.kind) + " d=" + std::to_string(cfg.data_dim));
}
BENCHMARK(BM_TrainStep)->Args({0, 1})->Args({1, 1})->Args({0, 10})->Args({1, 10})->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
