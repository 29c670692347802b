#include <smart/encoding.hpp>
#include <smart/fitting.hpp>
#include <smart/parametric.hpp>
#include <smart/patching.hpp>
#include <smart/phantom.hpp>
#include <smart/tensor.hpp>

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace smart;

Tensor3 random_tensor(Dims3 dims, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Tensor3 t(dims);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = Complex(n(rng), n(rng));
    return t;
}

const Phantom& phantom() {
    static const Phantom ph = generate_phantom(PhantomSpec::standard());
    return ph;
}

void BM_HosvdDenoisePatchGroup(benchmark::State& state) {
    const Tensor3 t = random_tensor({81, 30, 5}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(hosvd_denoise(t, {0.2, 0.1, 0.1}));
}
BENCHMARK(BM_HosvdDenoisePatchGroup)->Unit(benchmark::kMicrosecond);

void BM_HosvdDenoiseHankelGroup(benchmark::State& state) {
    const Tensor3 t = random_tensor({state.range(0), 3, 3}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(hosvd_denoise(t, {0.05, 0.01, 0.01}));
}
BENCHMARK(BM_HosvdDenoiseHankelGroup)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_BlockMatch(benchmark::State& state) {
    const RealImage img = phantom().images.magnitude(0);
    PatchConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(block_match(img, cfg));
}
BENCHMARK(BM_BlockMatch)->Unit(benchmark::kMillisecond);

void BM_ForwardAdjoint(benchmark::State& state) {
    const auto& ph = phantom();
    const SamplingMask mask = make_mask_1d(ph.images.grid(), ph.images.n_tsl(), 4.0, -1, 3);
    for (auto _ : state) {
        const CMatrix y = apply_forward(ph.images.data(), ph.images.grid(), CoilSensitivities::identity(), mask);
        benchmark::DoNotOptimize(apply_adjoint(y, ph.images.grid(), CoilSensitivities::identity(), mask));
    }
}
BENCHMARK(BM_ForwardAdjoint)->Unit(benchmark::kMillisecond);

void BM_FitMap(benchmark::State& state) {
    const auto& ph = phantom();
    for (auto _ : state) benchmark::DoNotOptimize(fit_map(ph.images, ph.support));
}
BENCHMARK(BM_FitMap)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
