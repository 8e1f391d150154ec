// Serial reference vs OpenMP kernels, plus desk-scale inference latency.

#include <benchmark/benchmark.h>

#include <vector>

#include "lidarsim/lidar_image.hpp"
#include "lidarsim/nn/kernels.hpp"
#include "lidarsim/nn/rng.hpp"
#include "lidarsim/pix2pix.hpp"
#include "lidarsim/runtime.hpp"

using namespace lidarsim;
using nn::kernels::ConvDims;

namespace {

struct ConvFixture {
    ConvDims dims;
    std::vector<float> x, w, y;

    explicit ConvFixture(int size, int in_ch, int out_ch) {
        dims = ConvDims{1, in_ch, size, size, out_ch, 4, 2, 1};
        nn::Rng rng(7);
        x.resize(static_cast<std::size_t>(in_ch) * size * size);
        w.resize(static_cast<std::size_t>(out_ch) * in_ch * 16);
        y.resize(static_cast<std::size_t>(out_ch) * dims.out_h() * dims.out_w());
        for (auto& v : x) v = static_cast<float>(rng.normal());
        for (auto& v : w) v = static_cast<float>(rng.normal(0.0, 0.02));
    }
};

void bm_conv_forward_serial(benchmark::State& state) {
    ConvFixture f(static_cast<int>(state.range(0)), 16, 32);
    for (auto _ : state) {
        nn::kernels::conv_forward_serial(f.dims, f.x.data(), f.w.data(), f.y.data());
        benchmark::DoNotOptimize(f.y.data());
    }
}

void bm_conv_forward_parallel(benchmark::State& state) {
    ConvFixture f(static_cast<int>(state.range(0)), 16, 32);
    runtime::set_threads(0);
    for (auto _ : state) {
        nn::kernels::conv_forward_parallel(f.dims, f.x.data(), f.w.data(), f.y.data());
        benchmark::DoNotOptimize(f.y.data());
    }
    runtime::set_threads(1);
}

BinaryHitMask sparse_mask(int size) {
    BinaryHitMask mask(size, size);
    for (int y = 4; y < size - 4; y += 3)
        for (int x = 2; x < size - 2; x += 2) mask.at(x, y) = 1;
    return mask;
}

void bm_gaussian_blur_serial(benchmark::State& state) {
    const BinaryHitMask mask = sparse_mask(static_cast<int>(state.range(0)));
    const auto kernel = blur_detail::gaussian_kernel1d(8.0, 24);
    VisibilityMap out(mask.width, mask.height);
    for (auto _ : state) {
        blur_detail::gaussian_blur_serial(mask, kernel, 24, out);
        benchmark::DoNotOptimize(out.values.data());
    }
}

void bm_gaussian_blur_parallel(benchmark::State& state) {
    const BinaryHitMask mask = sparse_mask(static_cast<int>(state.range(0)));
    const auto kernel = blur_detail::gaussian_kernel1d(8.0, 24);
    VisibilityMap out(mask.width, mask.height);
    for (auto _ : state) {
        blur_detail::gaussian_blur_parallel(mask, kernel, 24, out);
        benchmark::DoNotOptimize(out.values.data());
    }
}

void bm_generator_inference(benchmark::State& state) {
    pix2pix::UNetConfig cfg = pix2pix::UNetConfig::desk();
    pix2pix::Pix2Pix<float> model(cfg, pix2pix::PatchGANConfig::desk(), 42);
    ImageF input(cfg.input_size, cfg.input_size, 3, 0.25f);
    for (auto _ : state) {
        const VisibilityMap map = model.infer(input);
        benchmark::DoNotOptimize(map.values.data());
    }
}

BENCHMARK(bm_conv_forward_serial)->Arg(64)->Arg(128);
BENCHMARK(bm_conv_forward_parallel)->Arg(64)->Arg(128);
BENCHMARK(bm_gaussian_blur_serial)->Arg(128)->Arg(256);
BENCHMARK(bm_gaussian_blur_parallel)->Arg(128)->Arg(256);
BENCHMARK(bm_generator_inference);

}  // namespace

BENCHMARK_MAIN();
