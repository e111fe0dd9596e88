#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "ronchi/em.hpp"
#include "ronchi/optics.hpp"
#include "ronchi/preprocess.hpp"

using namespace ronchi;

static void BM_Kernel(benchmark::State& state) {
    Rng rng(1);
    const GPModel m = fixture::random_model(3, 3, rng);
    const Vec a = fixture::uniform_vec(3, -200, 200, rng), b = fixture::uniform_vec(3, -200, 200, rng);
    for (auto _ : state) benchmark::DoNotOptimize(kernel_eval(m.kernel, a, b));
}
BENCHMARK(BM_Kernel);

static void BM_LogLikelihood(benchmark::State& state) {
    Rng rng(2);
    const GPModel m = fixture::random_model(3, 3, rng);
    const LatentDataset d = fixture::random_data(3, 3, static_cast<int>(state.range(0)), rng);
    const Vec x0 = fixture::uniform_vec(3, -200, 200, rng);
    for (auto _ : state) benchmark::DoNotOptimize(log_marginal_likelihood(m, d, x0));
}
BENCHMARK(BM_LogLikelihood)->Arg(5)->Arg(10)->Arg(20);

static void BM_EStep(benchmark::State& state) {
    Rng rng(3);
    const GPModel m = fixture::random_model(3, 3, rng);
    const LatentDataset d = fixture::random_data(3, 3, 10, rng);
    const CandidateSet c = uniform_candidates(3, static_cast<int>(state.range(0)), 200.0, rng);
    for (auto _ : state) benchmark::DoNotOptimize(e_step(m, d, c));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EStep)->Arg(128)->Arg(512);

static void BM_SimulateAndPreprocess(benchmark::State& state) {
    SimConfig sim;
    const RealGrid g = expected_image({50.0, -20.0, 10.0}, sim);
    std::uint64_t k = 0;
    for (auto _ : state) benchmark::DoNotOptimize(preprocess(sample_ronchigram(g, derive_seed(7, k++))));
}
BENCHMARK(BM_SimulateAndPreprocess);

static void BM_WaveImage(benchmark::State& state) {
    SimConfig sim;
    for (auto _ : state) benchmark::DoNotOptimize(expected_image({50.0, -20.0, 10.0}, sim));
}
BENCHMARK(BM_WaveImage);

BENCHMARK_MAIN();
