#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "effectcast/backends.hpp"
#include "effectcast/imaging.hpp"
#include "effectcast/mask_strategy.hpp"
#include "effectcast/runner.hpp"

using namespace effectcast;

namespace {

Frame noise_frame(int w, int h, unsigned seed) {
    std::mt19937 gen(seed);
    Frame f(w, h);
    for (auto& b : f.bytes()) b = static_cast<std::uint8_t>(gen());
    return f;
}

void BM_RasterizeBox(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Box box{size / 8, size / 6, size - size / 5, size - size / 7};
    for (auto _ : state) benchmark::DoNotOptimize(rasterize_box(box, size, size));
}
BENCHMARK(BM_RasterizeBox)->Arg(64)->Arg(480);

void BM_RasterizePolygon(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Polygon p;
    for (int i = 0; i < 24; ++i) {
        const double a = i * 2 * 3.141592653589793 / 24;
        const double r = (i % 2 ? 0.45 : 0.3) * size;
        p.vertices.push_back({size / 2.0 + r * std::cos(a), size / 2.0 + r * std::sin(a)});
    }
    for (auto _ : state) benchmark::DoNotOptimize(rasterize_polygon(p, size, size));
}
BENCHMARK(BM_RasterizePolygon)->Arg(64)->Arg(480);

void BM_Dilate(benchmark::State& state) {
    Mask m(640, 480);
    m.set(320, 240, true);
    m.set(10, 10, true);
    const int radius = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(dilate(m, radius));
}
BENCHMARK(BM_Dilate)->Arg(1)->Arg(8);

void BM_DownsampleMask(benchmark::State& state) {
    const Mask m = fixed_mask(640, 480, 2.0 / 3.0);
    for (auto _ : state) benchmark::DoNotOptimize(downsample_mask(m, 64, 64));
}
BENCHMARK(BM_DownsampleMask);

void BM_ResizeFrame(benchmark::State& state) {
    const Frame f = noise_frame(640, 480, 1);
    for (auto _ : state) benchmark::DoNotOptimize(resize_frame(f, 64, 64));
}
BENCHMARK(BM_ResizeFrame);

void BM_MockInpaint(benchmark::State& state) {
    MockBackend mock;
    const InpaintRequest req{noise_frame(64, 64, 2), fixed_mask(64, 64, 2.0 / 3.0), "cut apple", 7};
    for (auto _ : state) benchmark::DoNotOptimize(mock.inpaint(req));
}
BENCHMARK(BM_MockInpaint);

void BM_CacheKey(benchmark::State& state) {
    const InpaintRequest req{noise_frame(64, 64, 3), fixed_mask(64, 64, 2.0 / 3.0),
                             "Apple is cut in half with a knife", 7};
    for (auto _ : state) benchmark::DoNotOptimize(cache_key(req, "mock"));
}
BENCHMARK(BM_CacheKey);

}  // namespace
BENCHMARK_MAIN();
