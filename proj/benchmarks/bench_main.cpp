#include <benchmark/benchmark.h>

#include "freetraj/attention_guidance.hpp"
#include "freetraj/denoiser.hpp"
#include "freetraj/fft.hpp"
#include "freetraj/noise_guidance.hpp"
#include "freetraj/pipeline.hpp"

using namespace freetraj;

namespace {

const Shape4 kDims{4, 16, 16, 24};

TrajectorySpec sweep() {
    return TrajectorySpec{16, {{0, BBox{0.05, 0.3, 0.4, 0.7}}, {15, BBox{0.6, 0.3, 0.95, 0.7}}}};
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    const CounterRng rng(Seed{seed});
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(static_cast<std::uint64_t>(i));
    return m;
}

void BM_ForwardSpectrum(benchmark::State& state) {
    const auto z = sample_gaussian(Shape4{4, static_cast<std::size_t>(state.range(0)), 16, 24}, Seed{1});
    for (auto _ : state) benchmark::DoNotOptimize(forward_spectrum(z));
}
BENCHMARK(BM_ForwardSpectrum)->Arg(16)->Arg(64);

void BM_ResampleHighFreq(benchmark::State& state) {
    const auto z = sample_gaussian(kDims, Seed{1});
    const auto eta = sample_gaussian(kDims, Seed{2});
    const auto lpf = build_lpf(16, 16, 24, 0.25);
    for (auto _ : state) benchmark::DoNotOptimize(resample_high_freq(z, eta, lpf));
}
BENCHMARK(BM_ResampleHighFreq);

void BM_GuidedNoise(benchmark::State& state) {
    const auto masks = plan_trajectory(sweep(), kDims).second;
    NoisePipelineConfig cfg;
    cfg.shape = kDims;
    for (auto _ : state) benchmark::DoNotOptimize(build_initial_noise(cfg, &masks, NoiseSeeds{}));
}
BENCHMARK(BM_GuidedNoise);

void BM_GuidedCrossAttention(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const auto q = random_matrix(n, 8, 1), k = random_matrix(6, 8, 2), v = random_matrix(6, 8, 3);
    std::vector<std::uint8_t> target(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = (i % 5) < 2;
    const auto masks = build_cross_masks(target, TokenSet{{0, 0, 1, 0, 0, 0}});
    const Vector g = Vector::Ones(n);
    for (auto _ : state) benchmark::DoNotOptimize(guided_cross_attention(q, k, v, masks, 1.8, g));
}
BENCHMARK(BM_GuidedCrossAttention)->Arg(96)->Arg(384);

void BM_GuidedSelfAttention(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const auto q = random_matrix(n, 8, 1), k = random_matrix(n, 8, 2), v = random_matrix(n, 8, 3);
    std::vector<std::uint8_t> target(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = (i % 5) < 2;
    const auto mask = build_spatial_self_mask(target);
    for (auto _ : state) benchmark::DoNotOptimize(guided_self_attention(q, k, v, mask, 0.01));
}
BENCHMARK(BM_GuidedSelfAttention)->Arg(96)->Arg(384);

void BM_DenoiserForward(benchmark::State& state) {
    const auto schedule = build_schedule(1000, 1e-4, 2e-2);
    const ToyDenoiser model(ModelConfig{}, schedule, Seed{3});
    const Matrix text = model.embed_prompt(6, Seed{4});
    const auto z = sample_gaussian(kDims, Seed{5});
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(z, 500, text));
}
BENCHMARK(BM_DenoiserForward)->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
    SamplerConfig cfg;
    cfg.steps = static_cast<std::size_t>(state.range(0));
    cfg.guidance.edit_steps = cfg.steps / 5;
    for (auto _ : state) benchmark::DoNotOptimize(generate(cfg, sweep(), Seed{6}));
}
BENCHMARK(BM_Generate)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
