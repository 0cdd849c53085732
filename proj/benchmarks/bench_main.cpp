// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "upgan/augment.hpp"
#include "upgan/baselines.hpp"
#include "upgan/dataset.hpp"
#include "upgan/losses.hpp"
#include "upgan/model.hpp"
#include "upgan/rng.hpp"
#include "upgan/swap.hpp"

using namespace upgan;

namespace {

nn::Tensor random_tensor(const nn::Shape& shape, std::uint64_t seed, bool grad = false) {
    Rng rng(seed);
    std::vector<double> v(nn::numel(shape));
    for (double& x : v) x = rng.normal(0.0, 1.0);
    return nn::Tensor::from(shape, std::move(v), grad);
}

FaceRecord sample_face(int size, std::uint64_t seed = 7) {
    dataset::SynthCorpusSpec spec;
    spec.records = 1;
    spec.identities = 1;
    spec.size = size;
    spec.seed = seed;
    return dataset::make_synthetic_corpus(spec).front();
}

}  // namespace

// args: spatial size, channels
static void BM_Conv2dForward(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
    const auto x = random_tensor({8, c, s, s}, 1);
    const auto w = random_tensor({c, c, 3, 3}, 2);
    const auto b = random_tensor({c}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, b, 1, 1).data().data());
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 32})->Args({32, 32})->Args({32, 64})->Unit(benchmark::kMillisecond);

static void BM_Conv2dBackward(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
    const auto x = random_tensor({8, c, s, s}, 1, true);
    const auto w = random_tensor({c, c, 3, 3}, 2, true);
    const auto b = random_tensor({c}, 3, true);
    for (auto _ : state) {
        auto y = nn::conv2d(x, w, b, 1, 1);
        nn::backward(nn::sum_squared_error(y, nn::Tensor::zeros(y.shape())));
    }
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 32})->Args({32, 32})->Unit(benchmark::kMillisecond);

// arg: output scale
static void BM_GeneratorForward(benchmark::State& state) {
    const int scale = static_cast<int>(state.range(0));
    const model::Generator g(ModelConfig::for_scale(scale), 0);
    const auto cond = random_tensor({8, kConditionDim}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(g.forward(cond).image.data().data());
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_GeneratorForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// arg: image size
static void BM_PoissonBlend(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const FaceRecord target = sample_face(size);
    const FaceRecord source = sample_face(size, 8);
    const BinaryMask mask = swap::erode(*target.mask);
    for (auto _ : state) {
        auto r = swap::poisson_blend(source.image, target.image, mask);
        benchmark::DoNotOptimize(r.image.data.data());
        state.counters["iterations"] = r.iterations;
    }
}
BENCHMARK(BM_PoissonBlend)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

// arg: kernel size
static void BM_GaussianBlur(benchmark::State& state) {
    const FaceRecord face = sample_face(kModelImageSize);
    for (auto _ : state)
        benchmark::DoNotOptimize(baselines::gaussian_blur(face.image, static_cast<int>(state.range(0))).data.data());
}
BENCHMARK(BM_GaussianBlur)->Arg(5)->Arg(15)->Arg(25)->Unit(benchmark::kMicrosecond);

static void BM_ElasticDistortion(benchmark::State& state) {
    const FaceRecord face = sample_face(kModelImageSize);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(augment::elastic_distortion(face, 8.0, 6.0, ++seed).record.image.data.data());
}
BENCHMARK(BM_ElasticDistortion)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
