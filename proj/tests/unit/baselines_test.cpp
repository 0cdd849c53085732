// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "upgan/baselines.hpp"
#include "upgan/error.hpp"
#include "upgan/log.hpp"

using namespace upgan;

namespace {

// Direct 2-D convolution with an explicit outer-product kernel and
// symmetric reflection computed by mirroring until in range.
ImageTensor blur_oracle(const ImageTensor& img, int ksize) {
    const double sigma = 0.3 * ((ksize - 1) / 2.0 - 1.0) + 0.8;
    const int r = ksize / 2;
    std::vector<std::vector<double>> k(static_cast<std::size_t>(ksize), std::vector<double>(static_cast<std::size_t>(ksize)));
    double total = 0.0;
    for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) total += k[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
    auto mirror = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
        return i;
    };
    ImageTensor out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    for (int j = -r; j <= r; ++j)
                        acc += k[i + r][j + r] / total * img.at(mirror(y + i, img.height), mirror(x + j, img.width), c);
                out.at(y, x, c) = acc;
            }
    return out;
}

double total(const ImageTensor& img) { return std::accumulate(img.data.begin(), img.data.end(), 0.0); }

}  // namespace

TEST(GaussianBlur, MatchesDoubleLoopOracle) {
    const auto img = test::random_image(8, 8, 3, 1);
    for (int k : {3, 5, 7}) {
        const auto got = baselines::gaussian_blur(img, k), want = blur_oracle(img, k);
        for (std::size_t i = 0; i < got.data.size(); ++i) ASSERT_NEAR(got.data[i], want.data[i], 1e-6) << "k=" << k;
    }
}

TEST(GaussianBlur, SigmaConvention) {
    EXPECT_NEAR(baselines::gaussian_sigma(5), 1.1, 1e-12);
    EXPECT_NEAR(baselines::gaussian_sigma(15), 2.6, 1e-12);
    EXPECT_NEAR(baselines::gaussian_sigma(25), 4.1, 1e-12);
    const auto k = baselines::gaussian_kernel(7);
    EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-15);
}

TEST(GaussianBlur, ConstantAndMass) {
    const ImageTensor flat(16, 12, 3, 0.37);
    for (double v : baselines::gaussian_blur(flat, 5).data) EXPECT_NEAR(v, 0.37, 1e-6);
    const auto img = test::random_image(40, 40, 3, 2);
    for (int k : {5, 15, 25}) EXPECT_NEAR(total(baselines::gaussian_blur(img, k)), total(img), 1e-4);
}

TEST(GaussianBlur, BadKernelThrows) {
    const ImageTensor img(8, 8);
    EXPECT_THROW(baselines::gaussian_blur(img, 4), ArgumentError);
    EXPECT_THROW(baselines::gaussian_blur(img, 1), ArgumentError);
}

TEST(Pixelate, HandComputedTileMeans) {
    ImageTensor img(4, 4, 1);
    const double v[16] = {0.1, 0.3, 0.9, 0.7, 0.5, 0.7, 0.1, 0.3, 0.0, 0.0, 0.2, 0.2, 1.0, 0.6, 0.4, 0.8};
    std::copy(v, v + 16, img.data.begin());
    const auto out = baselines::pixelate(img, 2);
    const double means[2][2] = {{0.4, 0.5}, {0.4, 0.4}};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_NEAR(out.at(y, x, 0), means[y / 2][x / 2], 1e-12);
}

TEST(Pixelate, RaggedEdgesAndSingleTile) {
    const auto img = test::random_image(5, 5, 1, 3);
    const auto out = baselines::pixelate(img, 3);
    // Right column tile covers columns 3-4 of rows 0-2.
    double m = 0.0;
    for (int y = 0; y < 3; ++y)
        for (int x = 3; x < 5; ++x) m += img.at(y, x, 0);
    EXPECT_NEAR(out.at(1, 4, 0), m / 6, 1e-12);

    const double global = total(img) / 25;
    for (double v : baselines::pixelate(img, 5).data) EXPECT_NEAR(v, global, 1e-12);
    log::reset_warning_count();
    for (double v : baselines::pixelate(img, 9).data) EXPECT_NEAR(v, global, 1e-12);
    EXPECT_EQ(log::warning_count(), 1);
    const ImageTensor flat(6, 6, 3, 0.25);
    EXPECT_EQ(baselines::pixelate(flat, 4), flat);
    EXPECT_THROW(baselines::pixelate(img, 1), ArgumentError);
}

TEST(Baselines, CommuteWithHorizontalFlip) {
    const auto img = test::random_image(16, 16, 3, 4);
    for (int k : {3, 5, 9}) {
        const auto a = baselines::gaussian_blur(flip_horizontal(img), k), b = flip_horizontal(baselines::gaussian_blur(img, k));
        for (std::size_t i = 0; i < a.data.size(); ++i) ASSERT_NEAR(a.data[i], b.data[i], 1e-6);
    }
    for (int block : {2, 4, 8}) {
        const auto a = baselines::pixelate(flip_horizontal(img), block), b = flip_horizontal(baselines::pixelate(img, block));
        for (std::size_t i = 0; i < a.data.size(); ++i) ASSERT_NEAR(a.data[i], b.data[i], 1e-6);
    }
}

TEST(Baselines, OutputsStayInUnitRange) {
    const auto img = test::random_image(32, 32, 3, 5);
    EXPECT_TRUE(baselines::gaussian_blur(img, 25).in_unit_range());
    EXPECT_TRUE(baselines::pixelate(img, 8).in_unit_range());
}

TEST(KSame, TwoPointMeanAndIdenticalCluster) {
    std::vector<std::vector<double>> f{{0.0}, {1.0}};
    std::vector<ImageTensor> imgs{ImageTensor(3, 3, 3, 0.0), ImageTensor(3, 3, 3, 1.0)};
    const auto r = baselines::k_same(f, imgs, {2});
    ASSERT_EQ(r.surrogates.size(), 1u);
    for (double v : r.surrogates[0].data) EXPECT_EQ(v, 0.5);

    const auto face = test::random_image(4, 4, 3, 6);
    std::vector<ImageTensor> same(3, face);
    std::vector<std::vector<double>> g(3, {0.2});
    const auto s = baselines::k_same(g, same, {3});
    for (std::size_t i = 0; i < face.data.size(); ++i) EXPECT_NEAR(s.surrogates[0].data[i], face.data[i], 1e-15);
}

TEST(KSame, PartitionOnSyntheticCorpus) {
    dataset::SynthCorpusSpec spec;
    spec.records = 100;
    spec.identities = 100;
    spec.size = 32;
    spec.seed = 8;
    const auto corpus = dataset::make_synthetic_corpus(spec);
    const auto r = baselines::k_same(corpus, {10});
    std::vector<int> seen(100, 0);
    for (const auto& c : r.clusters) {
        EXPECT_GE(c.size(), 10u);
        for (int i : c) ++seen[static_cast<std::size_t>(i)];
        for (int i : c) EXPECT_EQ(r.surrogate_for(i), r.surrogate_for(c.front()));
    }
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(KSame, RemainderJoinsLastCluster) {
    std::vector<std::vector<double>> f;
    std::vector<ImageTensor> imgs;
    for (int i = 0; i < 7; ++i) {
        f.push_back({static_cast<double>(i)});
        imgs.emplace_back(2, 2, 3, i / 10.0);
    }
    const auto r = baselines::k_same(f, imgs, {3});
    ASSERT_EQ(r.clusters.size(), 2u);
    EXPECT_EQ(r.clusters[0], (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(r.clusters[1].size(), 4u);
    EXPECT_THROW(baselines::k_same(std::span(f).first(2), std::span(imgs).first(2), {3}), ConfigError);
    EXPECT_THROW(baselines::k_same(f, imgs, {1}), ConfigError);
}
