// OpenMP kernels against their serial references. Thread count follows
// QCREG_THREADS (default: all cores).

#include <benchmark/benchmark.h>

#include <cmath>

#include "qcreg/beltrami.hpp"
#include "qcreg/features.hpp"
#include "qcreg/fidelity.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/mesh.hpp"
#include "qcreg/parallel.hpp"
#include "qcreg/reference.hpp"
#include "qcreg/synthetic.hpp"

namespace {

using namespace qcreg;

struct Fixture {
    int n;
    TriMesh mesh;
    QCMap map;
    ImagePair pair;
    Image warped;

    explicit Fixture(int size) : n(size), mesh(build_grid_mesh(size, size)), map(identity_map(mesh)), pair(bent_bar(size)) {
        for (std::size_t v = 0; v < map.positions.size(); ++v) {
            if (mesh.boundary[v]) continue;
            const Vec2 p = mesh.positions[v];
            map.positions[v] += Vec2{0.3 * std::sin(0.1 * p.y), 0.3 * std::cos(0.07 * p.x)};
        }
        warped = warp_image(map, pair.fixed);
    }
};

const Fixture &fixture(int n) {
    static const Fixture f128(128), f256(256), f512(512);
    return n == 128 ? f128 : n == 256 ? f256 : f512;
}

template <bool Parallel>
void BM_compute_mu(benchmark::State &state) {
    const auto &f = fixture(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? compute_mu(f.map, f.mesh) : reference::compute_mu(f.map, f.mesh));
    }
}

template <bool Parallel>
void BM_warp_image(benchmark::State &state) {
    const auto &f = fixture(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? warp_image(f.map, f.pair.fixed) : reference::warp_image(f.map, f.pair.fixed));
    }
}

template <bool Parallel>
void BM_intensity_descent(benchmark::State &state) {
    const auto &f = fixture(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? intensity_descent(f.pair.moving, f.pair.fixed, f.map)
                                          : reference::intensity_descent(f.pair.moving, f.pair.fixed, f.map));
    }
}

template <bool Parallel>
void BM_demon_force(benchmark::State &state) {
    const auto &f = fixture(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? demon_force(f.pair.moving, f.warped, 2.5)
                                          : reference::demon_force(f.pair.moving, f.warped, 2.5));
    }
}

template <bool Parallel>
void BM_gaussian_blur_field(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    const auto &f = fixture(n);
    VectorField field(f.map.positions.size());
    for (std::size_t v = 0; v < field.size(); ++v) field[v] = f.map.positions[v] - f.mesh.positions[v];
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? gaussian_blur_field(field, n + 1, n + 1, 0.02 * n)
                                          : reference::gaussian_blur_field(field, n + 1, n + 1, 0.02 * n));
    }
}

template <bool Parallel>
void BM_correlation_raw(benchmark::State &state) {
    const auto &f = fixture(256);
    const PatchGrid grid = partition_patches(f.pair.moving, static_cast<int>(state.range(0)));
    const FeatureBank a = extract_features_builtin(f.pair.moving, grid, Descriptor::GradientHistogram);
    const FeatureBank b = extract_features_builtin(f.pair.fixed, grid, Descriptor::GradientHistogram);
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? correlation_raw(a, b) : reference::correlation_raw(a, b));
    }
}

#define QCREG_PAIR(fn, ...)                                                                                            \
    BENCHMARK(fn<false>)->Name(#fn "/serial")->Arg(__VA_ARGS__)->Unit(benchmark::kMicrosecond);                       \
    BENCHMARK(fn<true>)->Name(#fn "/omp")->Arg(__VA_ARGS__)->Unit(benchmark::kMicrosecond)

QCREG_PAIR(BM_compute_mu, 256);
QCREG_PAIR(BM_compute_mu, 512);
QCREG_PAIR(BM_warp_image, 256);
QCREG_PAIR(BM_warp_image, 512);
QCREG_PAIR(BM_intensity_descent, 256);
QCREG_PAIR(BM_intensity_descent, 512);
QCREG_PAIR(BM_demon_force, 256);
QCREG_PAIR(BM_demon_force, 512);
QCREG_PAIR(BM_gaussian_blur_field, 128);
QCREG_PAIR(BM_gaussian_blur_field, 256);
QCREG_PAIR(BM_correlation_raw, 16);
QCREG_PAIR(BM_correlation_raw, 32);

} // namespace

int main(int argc, char **argv) {
    qcreg::configure_threads_from_env();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
