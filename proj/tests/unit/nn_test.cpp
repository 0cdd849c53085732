// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "upgan/error.hpp"
#include "upgan/nn/ops.hpp"
#include "upgan/nn/params.hpp"

using namespace upgan;
using nn::Tensor;

namespace {

Tensor random_tensor(const nn::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Fixed random projection so every op is checked through a non-trivial scalar.
Tensor project(const Tensor& x, std::uint64_t seed) {
    Tensor w = random_tensor(x.shape(), seed);
    return nn::sum_squared_error(x, w);
}

}  // namespace

TEST(Conv2d, MatchesDirectLoopOracle) {
    Tensor x = random_tensor({2, 3, 7, 6}, 1);
    Tensor w = random_tensor({4, 3, 3, 3}, 2);
    Tensor b = random_tensor({4}, 3);
    const int stride = 2, pad = 1;
    Tensor y = nn::conv2d(x, w, b, stride, pad);
    const int oh = (7 + 2 * pad - 3) / stride + 1, ow = (6 + 2 * pad - 3) / stride + 1;
    ASSERT_EQ(y.shape(), (nn::Shape{2, 4, oh, ow}));
    for (int n = 0; n < 2; ++n)
        for (int o = 0; o < 4; ++o)
            for (int r = 0; r < oh; ++r)
                for (int c = 0; c < ow; ++c) {
                    double acc = b.data()[o];
                    for (int i = 0; i < 3; ++i)
                        for (int kr = 0; kr < 3; ++kr)
                            for (int kc = 0; kc < 3; ++kc) {
                                const int yy = r * stride - pad + kr, xx = c * stride - pad + kc;
                                if (yy < 0 || yy >= 7 || xx < 0 || xx >= 6) continue;
                                acc += x.data()[((n * 3 + i) * 7 + yy) * 6 + xx] * w.data()[((o * 3 + i) * 3 + kr) * 3 + kc];
                            }
                    EXPECT_NEAR(y.data()[((n * 4 + o) * oh + r) * ow + c], acc, 1e-12);
                }
}

TEST(GradCheck, Conv2d) {
    Tensor x = random_tensor({2, 2, 5, 5}, 4), w = random_tensor({3, 2, 5, 5}, 5), b = random_tensor({3}, 6);
    auto r = test::grad_check({&x, &w, &b}, [&] { return project(nn::conv2d(x, w, b, 1, 2), 7); });
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
}

TEST(GradCheck, StridedConv2d) {
    Tensor x = random_tensor({1, 2, 8, 8}, 8), w = random_tensor({2, 2, 4, 4}, 9), b = random_tensor({2}, 10);
    auto r = test::grad_check({&x, &w, &b}, [&] { return project(nn::conv2d(x, w, b, 2, 1), 11); });
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
}

TEST(GradCheck, LinearAndActivations) {
    Tensor x = random_tensor({3, 5}, 12), w = random_tensor({4, 5}, 13), b = random_tensor({4}, 14);
    auto r = test::grad_check({&x, &w, &b}, [&] {
        return project(nn::sigmoid(nn::leaky_relu(nn::linear(x, w, b), 0.2)), 15);
    });
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
}

TEST(GradCheck, UpsampleAndPool) {
    Tensor x = random_tensor({1, 2, 3, 3}, 16);
    auto r = test::grad_check({&x}, [&] { return project(nn::max_pool2d(nn::upsample2x(x), 3, 1, 1), 17); });
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
}

TEST(GradCheck, SoftmaxAndBce) {
    Tensor x = random_tensor({2, 2, 3, 3}, 18, -2, 2);
    std::vector<double> targets(18);
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<double>(i % 3 == 0);
    auto r = test::grad_check({&x}, [&] {
        return nn::binary_cross_entropy(nn::select_channel(nn::softmax_channels(x), 1), targets, 1e-7);
    });
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
}

TEST(GradCheck, LogTermsAndCrossEntropy) {
    Tensor p = random_tensor({4, 1}, 19, 0.1, 0.9);
    auto r = test::grad_check({&p}, [&] {
        return nn::weighted_sum({{nn::mean_log(p, 1e-7), -1.0}, {nn::mean_log1m(p, 1e-7), -0.5}});
    });
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
    Tensor logits = random_tensor({3, 4}, 20);
    auto r2 = test::grad_check({&logits}, [&] { return nn::cross_entropy(logits, {0, 3, 1}); });
    EXPECT_LE(r2.max_rel_error, 1e-3) << r2.worst;
}

TEST(Autograd, SharedSubgraphAccumulates) {
    Tensor x = Tensor::from({1}, {3.0}, true);
    Tensor y = nn::weighted_sum({{nn::sum_squared_error(x, Tensor::zeros({1})), 1.0}, {x, 2.0}});
    nn::backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 3.0 + 2.0);
}

TEST(Autograd, DetachCutsGradient) {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor y = nn::sum_squared_error(nn::scale(x, 2.0).detach(), Tensor::zeros({2}));
    nn::backward(y);
    for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Ops, SoftmaxNormalizesChannels) {
    Tensor x = random_tensor({2, 2, 4, 4}, 21, -30, 30);
    Tensor s = nn::softmax_channels(x);
    for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 16; ++i) EXPECT_NEAR(s.data()[n * 32 + i] + s.data()[n * 32 + 16 + i], 1.0, 1e-12);
}

TEST(Ops, ShapeMismatchThrows) {
    EXPECT_THROW(nn::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1}), 1, 1),
                 ShapeError);
    EXPECT_THROW(nn::sum_squared_error(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    nn::ParamSet ps;
    ps.add_zeros("w", {3});
    ps.at("w").data()[0] = 1.0;
    nn::Adam opt(ps, {0.1, 0.9, 0.999, 1e-8});
    auto& g = ps.at("w").grad_storage();
    g = {0.5, -2.0, 0.0};
    opt.step();
    // Bias-corrected first step is lr·sign(g).
    EXPECT_NEAR(ps.at("w").data()[0], 1.0 - 0.1, 1e-6);
    EXPECT_NEAR(ps.at("w").data()[1], 0.1, 1e-6);
    EXPECT_EQ(ps.at("w").data()[2], 0.0);
}

TEST(ParamSet, ExportImportRoundTrip) {
    nn::ParamSet a, b;
    a.add_weight("w", {4, 3}, 3, 9);
    b.add_weight("w", {4, 3}, 3, 10);
    nn::BlobMap blobs;
    a.export_to(blobs, "m/");
    b.import_from(blobs, "m/");
    EXPECT_EQ(a.flatten(), b.flatten());
    nn::ParamSet c;
    c.add_zeros("w", {5});
    EXPECT_THROW(c.import_from(blobs, "m/"), CheckpointError);
}
