// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "upgan/dataset.hpp"
#include "upgan/image.hpp"

namespace upgan {

struct KSameConfig {
    int k = 10;
    void validate() const;
};

struct KSameResult {
    std::vector<std::vector<int>> clusters;  // record indices per cluster
    std::vector<int> cluster_of;             // record index -> cluster
    std::vector<ImageTensor> surrogates;     // one average face per cluster

    const ImageTensor& surrogate_for(int record) const {
        return surrogates[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(record)])];
    }
};

namespace baselines {

/// Standard deviation used for a given odd kernel size.
double gaussian_sigma(int kernel_size);

/// Normalized 1-D kernel; the 2-D kernel is its outer product.
std::vector<double> gaussian_kernel(int kernel_size);

/// Separable Gaussian blur with symmetric (edge-repeating) reflection.
/// Throws ArgumentError unless kernel_size is odd and >= 3.
ImageTensor gaussian_blur(const ImageTensor& image, int kernel_size);

/// Replaces each block_size tile (ragged at the right and bottom edges) by
/// its mean color. Blocks larger than the image collapse to the global mean.
ImageTensor pixelate(const ImageTensor& image, int block_size);

/// Greedy k-same: the first unassigned record plus its k-1 nearest
/// unassigned neighbors in condition-vector space form a cluster; a
/// remainder smaller than k joins the last cluster.
KSameResult k_same(std::span<const FaceRecord> corpus, const KSameConfig& cfg);

/// Clustering on explicit features with explicit images.
KSameResult k_same(std::span<const std::vector<double>> features, std::span<const ImageTensor> images,
                   const KSameConfig& cfg);

}  // namespace baselines
}  // namespace upgan
