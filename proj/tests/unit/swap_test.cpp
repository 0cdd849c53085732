// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "upgan/error.hpp"
#include "upgan/swap.hpp"

using namespace upgan;

namespace {

BinaryMask disk(int size, double cx, double cy, double r) {
    BinaryMask m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) m.at(y, x) = (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy) <= r * r;
    return m;
}

// Dense Laplacian system over every pixel: identity rows outside the mask,
// the 5-point stencil inside. Solved by full-pivot LU.
ImageTensor dense_oracle(const ImageTensor& src, const ImageTensor& dst, const BinaryMask& mask) {
    const int h = dst.height, w = dst.width, n = h * w;
    ImageTensor out = dst;
    for (int c = 0; c < dst.channels; ++c) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd b(n);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int i = y * w + x;
                if (!mask.at(y, x)) {
                    a(i, i) = 1.0;
                    b(i) = dst.at(y, x, c);
                    continue;
                }
                a(i, i) = 4.0;
                b(i) = 4.0 * src.at(y, x, c);
                const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
                for (const auto& q : nb) {
                    a(i, q[0] * w + q[1]) = -1.0;
                    b(i) -= src.at(q[0], q[1], c);
                }
            }
        const Eigen::VectorXd u = a.fullPivLu().solve(b);
        for (int i = 0; i < n; ++i) out.at(i / w, i % w, c) = u(i);
    }
    return out;
}

double laplacian(const ImageTensor& img, int y, int x, int c) {
    return 4 * img.at(y, x, c) - img.at(y - 1, x, c) - img.at(y + 1, x, c) - img.at(y, x - 1, c) - img.at(y, x + 1, c);
}

BlendOptions unclipped() {
    BlendOptions o;
    o.clip = false;
    return o;
}

}  // namespace

TEST(PoissonBlend, MatchesDenseDirectSolve16) {
    const auto src = test::random_image(16, 16, 3, 1), dst = test::random_image(16, 16, 3, 2);
    const auto mask = disk(16, 8.0, 7.5, 5.5);
    const auto got = swap::poisson_blend(src, dst, mask, unclipped());
    EXPECT_TRUE(got.converged);
    const auto want = dense_oracle(src, dst, mask);
    for (std::size_t i = 0; i < want.data.size(); ++i) ASSERT_NEAR(got.image.data[i], want.data[i], 1e-4);
}

TEST(PoissonBlend, ExactOutsideMaskAndLaplacianInside) {
    const auto src = test::random_image(24, 24, 3, 3, 0.3, 0.7), dst = test::random_image(24, 24, 3, 4, 0.3, 0.7);
    const auto mask = disk(24, 12, 12, 7);
    const auto out = swap::poisson_blend(src, dst, mask, unclipped()).image;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            for (int c = 0; c < 3; ++c) {
                if (!mask.at(y, x))
                    ASSERT_EQ(out.at(y, x, c), dst.at(y, x, c));
                else
                    ASSERT_NEAR(laplacian(out, y, x, c), laplacian(src, y, x, c), 1e-4);
            }
}

TEST(PoissonBlend, SourceEqualsTargetAndConstantOffset) {
    const auto dst = test::random_image(20, 20, 3, 5, 0.2, 0.6);
    const auto mask = disk(20, 10, 10, 6);
    const auto same = swap::poisson_blend(dst, dst, mask).image;
    for (std::size_t i = 0; i < dst.data.size(); ++i) ASSERT_NEAR(same.data[i], dst.data[i], 1e-4);
    auto shifted = dst;
    for (double& v : shifted.data) v += 0.3;
    const auto out = swap::poisson_blend(shifted, dst, mask).image;
    for (std::size_t i = 0; i < dst.data.size(); ++i) ASSERT_NEAR(out.data[i], dst.data[i], 1e-4);
}

TEST(PoissonBlend, Idempotent) {
    const auto src = test::random_image(20, 20, 3, 6), dst = test::random_image(20, 20, 3, 7);
    const auto mask = disk(20, 10, 10, 6);
    const auto once = swap::poisson_blend(src, dst, mask).image;
    const auto twice = swap::poisson_blend(src, once, mask).image;
    for (std::size_t i = 0; i < once.data.size(); ++i) ASSERT_NEAR(twice.data[i], once.data[i], 1e-4);
}

TEST(PoissonBlend, ClippedToUnitRange) {
    ImageTensor src(16, 16, 3, 0.0), dst(16, 16, 3, 0.9);
    src.at(8, 8, 0) = 1.0;  // sharp peak pushes the solution above 1
    const auto out = swap::poisson_blend(src, dst, disk(16, 8, 8, 5)).image;
    EXPECT_TRUE(out.in_unit_range());
}

TEST(PoissonBlend, BorderMaskThrows) {
    const auto img = test::random_image(8, 8, 3, 8);
    BinaryMask mask(8, 8);
    mask.at(0, 3) = 1;
    EXPECT_THROW(swap::poisson_blend(img, img, mask), BoundaryError);
}

TEST(PoissonBlend, IterationCapReportsNonConvergence) {
    const auto src = test::random_image(32, 32, 3, 9), dst = test::random_image(32, 32, 3, 10);
    BlendOptions o;
    o.max_iterations = 2;
    const auto r = swap::poisson_blend(src, dst, disk(32, 16, 16, 12), o);
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.max_residual, 1e-4);
}

TEST(SwapFace, ErodesAndRejectsEmptyMasks) {
    FaceRecord rec;
    rec.id = "r";
    rec.image = test::random_image(16, 16, 3, 11);
    MaskProbabilities probs(16, 16);
    const auto m = disk(16, 8, 8, 5);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * 16 + x) * 2;
            probs.data[i + 1] = m.at(y, x) ? 0.9 : 0.1;
            probs.data[i] = 1 - probs.data[i + 1];
        }
    const auto gen = test::random_image(16, 16, 3, 12);
    const auto out = swap::swap_face(rec, gen, probs).image;
    const auto eroded = swap::erode(m);
    EXPECT_LT(eroded.area(), m.area());
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (!eroded.at(y, x)) ASSERT_EQ(out.at(y, x, 0), rec.image.at(y, x, 0));

    MaskProbabilities thin(16, 16);
    for (std::size_t i = 0; i < thin.data.size(); i += 2) thin.data[i] = 0.9, thin.data[i + 1] = 0.1;
    thin.data[(8 * 16 + 8) * 2 + 1] = 0.9;  // single pixel vanishes under erosion
    EXPECT_THROW(swap::swap_face(rec, gen, thin), SwapError);
}

TEST(SwapFace, ResizesLowResolutionGeneratorOutput) {
    FaceRecord rec;
    rec.image = test::random_image(32, 32, 3, 13);
    MaskProbabilities probs(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const bool in = y >= 2 && y < 6 && x >= 2 && x < 6;
            probs.data[(y * 8 + x) * 2 + 1] = in ? 1.0 : 0.0;
            probs.data[(y * 8 + x) * 2] = in ? 0.0 : 1.0;
        }
    const auto out = swap::swap_face(rec, test::random_image(8, 8, 3, 14), probs);
    EXPECT_EQ(out.image.height, 32);
    EXPECT_TRUE(out.converged);
}
