#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "hsnct/fbp.hpp"
#include "hsnct/mbir.hpp"
#include "hsnct/nmf.hpp"
#include "hsnct/projector.hpp"

namespace {

using namespace hsnct;

std::vector<double> uniform_angles(std::size_t n) {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    }
    return a;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(0.0, 0.05);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = dist(gen);
    }
    return v;
}

void BM_ForwardProject(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ParallelBeamProjector proj(SliceGeometry(n, uniform_angles(32)));
    const auto image = random_vector(n * n, 1);
    std::vector<double> sino(32 * n);
    for (auto _ : state) {
        proj.forward(image, sino);
        benchmark::DoNotOptimize(sino.data());
    }
}
BENCHMARK(BM_ForwardProject)->Arg(64)->Arg(128);

void BM_BackProject(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ParallelBeamProjector proj(SliceGeometry(n, uniform_angles(32)));
    const auto sino = random_vector(32 * n, 2);
    std::vector<double> image(n * n);
    for (auto _ : state) {
        proj.back(sino, image);
        benchmark::DoNotOptimize(image.data());
    }
}
BENCHMARK(BM_BackProject)->Arg(64)->Arg(128);

void BM_FbpSlice(benchmark::State& state) {
    const std::size_t n = 64;
    const SliceGeometry g(n, uniform_angles(32));
    const FbpReconstructor fbp(g, FbpFilter::Ramp);
    const auto sino = random_vector(g.sinogram_size(), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fbp.reconstruct(sino));
    }
}
BENCHMARK(BM_FbpSlice);

// One 64 x 64 slice of the desk benchmark geometry, fixed sweep count.
void BM_MbirSlice(benchmark::State& state) {
    const std::size_t n = 64;
    const SliceGeometry g(n, uniform_angles(32));
    const MbirReconstructor mbir(g);
    const auto sino = forward_project(random_vector(n * n, 4), g);
    MbirOptions o;
    o.beta = 2.0;
    o.max_iters = static_cast<std::size_t>(state.range(0));
    o.rel_tol = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mbir.reconstruct(sino, o).image);
    }
}
BENCHMARK(BM_MbirSlice)->Arg(10)->Unit(benchmark::kMillisecond);

// NMF sweeps on a desk-sized sinogram (32 views x 16 rows x 64 cols, 256 bins).
void BM_NmfIterations(benchmark::State& state) {
    const auto g = ScanGeometry::uniform(32, 16, 64, 16.0);
    const auto axis = SpectralAxis::uniform(256, 1e-3, 5e-3, ToFConverter(16.0));
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> values(g.num_measurements() * 256);
    for (auto& v : values) {
        v = dist(gen);
    }
    const HyperspectralSinogram p(g, axis, std::move(values));
    NmfOptions o;
    o.rank = 4;
    o.max_iters = static_cast<std::size_t>(state.range(0));
    o.rel_tol = 1e-300;
    for (auto _ : state) {
        benchmark::DoNotOptimize(nmf_factorize(p, o).report.residual_energy);
    }
}
BENCHMARK(BM_NmfIterations)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
