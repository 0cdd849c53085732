// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/swap.hpp"

#include <algorithm>
#include <cmath>

#include "upgan/error.hpp"
#include "upgan/log.hpp"

namespace upgan::swap {

namespace {

constexpr int kDy[4] = {-1, 1, 0, 0};
constexpr int kDx[4] = {0, 0, -1, 1};

struct Unknowns {
    std::vector<int> index;  // pixel -> unknown or -1
    std::vector<int> pixel;  // unknown -> pixel
};

Unknowns enumerate(const BinaryMask& mask) {
    Unknowns u;
    u.index.assign(mask.labels.size(), -1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            if (y == 0 || x == 0 || y == mask.height - 1 || x == mask.width - 1)
                throw BoundaryError("blend mask touches the image border at (" + std::to_string(y) + ", " +
                                    std::to_string(x) + ")");
            const int p = y * mask.width + x;
            u.index[static_cast<std::size_t>(p)] = static_cast<int>(u.pixel.size());
            u.pixel.push_back(p);
        }
    return u;
}

}  // namespace

BlendResult poisson_blend(const ImageTensor& source, const ImageTensor& target, const BinaryMask& mask,
                          const BlendOptions& options) {
    if (!source.same_shape(target)) throw ShapeError("poisson_blend: source and target shapes differ");
    if (mask.height != target.height || mask.width != target.width) throw ShapeError("poisson_blend: mask size differs");
    const Unknowns u = enumerate(mask);
    BlendResult res{target, 0, 0.0, true};
    const std::size_t n = u.pixel.size();
    if (n == 0) return res;
    const int w = target.width, ch = target.channels;

    // A = 4I - (interior adjacency), symmetric positive definite.
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            const int p = u.pixel[i];
            double acc = 4.0 * v[i];
            for (int d = 0; d < 4; ++d) {
                const int q = u.index[static_cast<std::size_t>(p + kDy[d] * w + kDx[d])];
                if (q >= 0) acc -= v[static_cast<std::size_t>(q)];
            }
            out[i] = acc;
        }
    };
    auto max_abs = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };

    std::vector<double> b(n), x(n), r(n), p(n), ap(n);
    for (int c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const int pix = u.pixel[i], py = pix / w, px = pix % w;
            double rhs = 4.0 * source.at(py, px, c);
            for (int d = 0; d < 4; ++d) {
                const int qy = py + kDy[d], qx = px + kDx[d];
                rhs -= source.at(qy, qx, c);
                if (u.index[static_cast<std::size_t>(qy * w + qx)] < 0) rhs += target.at(qy, qx, c);
            }
            b[i] = rhs;
            x[i] = target.at(py, px, c);
        }
        apply(x, ap);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
        p = r;
        double rr = 0.0;
        for (double v : r) rr += v * v;
        int it = 0;
        double resid = max_abs(r);
        while (resid > options.tolerance && it < options.max_iterations) {
            apply(p, ap);
            double pap = 0.0;
            for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
            const double alpha = rr / pap;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            double rr_next = 0.0;
            for (double v : r) rr_next += v * v;
            const double beta = rr_next / rr;
            rr = rr_next;
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
            ++it;
            // Recompute the true residual now and then to avoid drift.
            if (it % 50 == 0) {
                apply(x, ap);
                for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
            }
            resid = max_abs(r);
        }
        apply(x, ap);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
        resid = max_abs(r);
        res.iterations = std::max(res.iterations, it);
        res.max_residual = std::max(res.max_residual, resid);
        if (resid > options.tolerance) res.converged = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int pix = u.pixel[i];
            const double v = options.clip ? std::clamp(x[i], 0.0, 1.0) : x[i];
            res.image.at(pix / w, pix % w, c) = v;
        }
    }
    if (!res.converged)
        log::warn("poisson blend stopped at residual " + std::to_string(res.max_residual) + " after " +
                  std::to_string(res.iterations) + " iterations");
    return res;
}

BinaryMask erode(const BinaryMask& mask) {
    BinaryMask out(mask.height, mask.width);
    for (int y = 1; y + 1 < mask.height; ++y)
        for (int x = 1; x + 1 < mask.width; ++x) {
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy)
                for (int dx = -1; dx <= 1 && keep; ++dx) keep = mask.at(y + dy, x + dx) != 0;
            out.at(y, x) = keep;
        }
    return out;
}

BlendResult swap_face(const FaceRecord& record, const ImageTensor& generated, const MaskProbabilities& gen_mask,
                      const BlendOptions& options) {
    const int h = record.image.height, w = record.image.width;
    BinaryMask mask = gen_mask.binarize(0.5);
    ImageTensor source = generated;
    if (generated.height != h || generated.width != w) {
        source = resize_bilinear(generated, h, w);
        if (h != w) throw ShapeError("swap_face: resizing needs a square record image");
        mask = resize_mask_to(mask, h);
    }
    if (mask.height != h || mask.width != w) throw ShapeError("swap_face: mask size differs from the record");
    mask = erode(mask);
    if (mask.area() == 0) throw SwapError("generated mask for '" + record.id + "' is empty after erosion");
    return poisson_blend(source, record.image, mask, options);
}

}  // namespace upgan::swap
