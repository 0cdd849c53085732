// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "upgan/error.hpp"
#include "upgan/log.hpp"

namespace upgan {

void KSameConfig::validate() const {
    if (k < 2) throw ConfigError("k-same needs k >= 2");
}

namespace baselines {

namespace {

// Half-sample symmetric reflection: ... b a | a b c ... c | c b ...
int reflect(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

double gaussian_sigma(int kernel_size) { return 0.3 * ((kernel_size - 1) / 2.0 - 1.0) + 0.8; }

std::vector<double> gaussian_kernel(int kernel_size) {
    if (kernel_size < 3 || kernel_size % 2 == 0)
        throw ArgumentError("gaussian kernel size must be odd and >= 3, got " + std::to_string(kernel_size));
    const double sigma = gaussian_sigma(kernel_size);
    const int r = kernel_size / 2;
    std::vector<double> k(static_cast<std::size_t>(kernel_size));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= sum;
    return k;
}

ImageTensor gaussian_blur(const ImageTensor& image, int kernel_size) {
    const auto k = gaussian_kernel(kernel_size);
    const int r = kernel_size / 2, h = image.height, w = image.width, ch = image.channels;
    ImageTensor tmp(h, w, ch), out(h, w, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * image.at(y, reflect(x + i, w), c);
                tmp.at(y, x, c) = acc;
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp.at(reflect(y + i, h), x, c);
                out.at(y, x, c) = std::clamp(acc, 0.0, 1.0);
            }
    return out;
}

ImageTensor pixelate(const ImageTensor& image, int block_size) {
    if (block_size < 2) throw ArgumentError("pixelation block size must be >= 2, got " + std::to_string(block_size));
    const int h = image.height, w = image.width, ch = image.channels;
    if (block_size > std::min(h, w)) {
        log::warn("pixelation block " + std::to_string(block_size) + " exceeds the image; using the global mean");
        block_size = std::max(h, w);
    }
    ImageTensor out(h, w, ch);
    std::vector<double> mean(static_cast<std::size_t>(ch));
    for (int by = 0; by < h; by += block_size)
        for (int bx = 0; bx < w; bx += block_size) {
            const int ey = std::min(h, by + block_size), ex = std::min(w, bx + block_size);
            std::fill(mean.begin(), mean.end(), 0.0);
            for (int y = by; y < ey; ++y)
                for (int x = bx; x < ex; ++x)
                    for (int c = 0; c < ch; ++c) mean[static_cast<std::size_t>(c)] += image.at(y, x, c);
            const double n = static_cast<double>((ey - by) * (ex - bx));
            for (int y = by; y < ey; ++y)
                for (int x = bx; x < ex; ++x)
                    for (int c = 0; c < ch; ++c) out.at(y, x, c) = mean[static_cast<std::size_t>(c)] / n;
        }
    return out;
}

KSameResult k_same(std::span<const FaceRecord> corpus, const KSameConfig& cfg) {
    std::vector<std::vector<double>> features;
    std::vector<ImageTensor> images;
    for (const auto& r : corpus) {
        const auto v = condition_vector(r.attributes, r.landmarks);
        features.emplace_back(v.begin(), v.end());
        images.push_back(r.image);
    }
    return k_same(features, images, cfg);
}

KSameResult k_same(std::span<const std::vector<double>> features, std::span<const ImageTensor> images,
                   const KSameConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(features.size());
    if (static_cast<int>(images.size()) != n) throw ShapeError("k_same: feature and image counts differ");
    if (n < cfg.k)
        throw ConfigError("k-same needs at least k=" + std::to_string(cfg.k) + " records, got " + std::to_string(n));
    for (const auto& img : images)
        if (!img.same_shape(images[0])) throw ShapeError("k_same: images must share one shape");

    KSameResult res;
    res.cluster_of.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> unassigned(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) unassigned[static_cast<std::size_t>(i)] = i;

    auto dist2 = [&](int a, int b) {
        double d = 0.0;
        for (std::size_t j = 0; j < features[static_cast<std::size_t>(a)].size(); ++j) {
            const double t = features[static_cast<std::size_t>(a)][j] - features[static_cast<std::size_t>(b)][j];
            d += t * t;
        }
        return d;
    };

    while (!unassigned.empty()) {
        if (static_cast<int>(unassigned.size()) < cfg.k) {
            auto& last = res.clusters.back();
            last.insert(last.end(), unassigned.begin(), unassigned.end());
            break;
        }
        const int seed = unassigned.front();
        std::vector<int> rest(unassigned.begin() + 1, unassigned.end());
        std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) { return dist2(seed, a) < dist2(seed, b); });
        std::vector<int> cluster{seed};
        cluster.insert(cluster.end(), rest.begin(), rest.begin() + (cfg.k - 1));
        res.clusters.push_back(cluster);
        std::sort(cluster.begin(), cluster.end());
        std::vector<int> left;
        std::set_difference(unassigned.begin(), unassigned.end(), cluster.begin(), cluster.end(), std::back_inserter(left));
        unassigned = std::move(left);
    }

    for (std::size_t c = 0; c < res.clusters.size(); ++c) {
        ImageTensor mean(images[0].height, images[0].width, images[0].channels);
        for (int i : res.clusters[c]) {
            res.cluster_of[static_cast<std::size_t>(i)] = static_cast<int>(c);
            const auto& img = images[static_cast<std::size_t>(i)];
            for (std::size_t p = 0; p < mean.data.size(); ++p) mean.data[p] += img.data[p];
        }
        for (double& v : mean.data) v /= static_cast<double>(res.clusters[c].size());
        res.surrogates.push_back(std::move(mean));
    }
    return res;
}

}  // namespace baselines
}  // namespace upgan
