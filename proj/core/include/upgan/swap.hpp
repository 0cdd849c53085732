// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "upgan/dataset.hpp"
#include "upgan/image.hpp"

namespace upgan {

struct BlendOptions {
    double tolerance = 1e-4;   // max-norm residual
    int max_iterations = 10000;
    bool clip = true;
};

struct BlendResult {
    ImageTensor image;
    int iterations = 0;        // worst channel
    double max_residual = 0.0; // worst channel
    bool converged = true;
};

namespace swap {

/// Seamless cloning: inside the mask the output's discrete Laplacian equals
/// the source's, outside it equals the target. Solved per channel with
/// conjugate gradients. Throws BoundaryError if the mask touches the border.
BlendResult poisson_blend(const ImageTensor& source, const ImageTensor& target, const BinaryMask& mask,
                          const BlendOptions& options = {});

/// 3x3 erosion; pixels on the image border are always cleared.
BinaryMask erode(const BinaryMask& mask);

/// Binarizes and erodes the generated mask, then blends the generated face
/// into the record image. Generated outputs at another resolution are
/// resized to the record first. Throws SwapError on an empty mask.
BlendResult swap_face(const FaceRecord& record, const ImageTensor& generated, const MaskProbabilities& gen_mask,
                      const BlendOptions& options = {});

}  // namespace swap
}  // namespace upgan
