// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace upgan {

/// Interleaved H×W×C image with values nominally in [0,1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(int h, int w, int c = 3, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const ImageTensor& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool in_unit_range() const;

    bool operator==(const ImageTensor&) const = default;
};

/// Ground-truth face mask, one label in {0,1} per pixel.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }

    std::size_t pixel_count() const { return labels.size(); }
    std::size_t area() const;
    bool is_binary() const;

    bool operator==(const BinaryMask&) const = default;
};

/// Per-pixel two-way probabilities, interleaved H×W×2
/// (channel 0 = background, channel 1 = face).
struct MaskProbabilities {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    MaskProbabilities() = default;
    MaskProbabilities(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 2, 0.5) {}

    double face(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
    double background(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

    /// Largest |p0 + p1 - 1| over all pixels.
    double max_normalization_error() const;

    /// Face-channel probability > threshold.
    BinaryMask binarize(double threshold = 0.5) const;
};

ImageTensor flip_horizontal(const ImageTensor& image);
BinaryMask flip_horizontal(const BinaryMask& mask);

/// Box-filter downsampling by an integer factor; height and width must be
/// divisible by it.
ImageTensor downsample_area(const ImageTensor& image, int factor);

/// Downsamples by area coverage then thresholds at one half.
BinaryMask downsample_mask(const BinaryMask& mask, int factor);

/// Bilinear resampling to an arbitrary size (pixel-center aligned).
ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);

/// Resize to a square working resolution, picking area averaging when the
/// size divides evenly and bilinear sampling otherwise.
ImageTensor resize_to(const ImageTensor& image, int size);

/// Square mask resize: area downsampling when the size divides evenly,
/// nearest-neighbor sampling otherwise.
BinaryMask resize_mask_to(const BinaryMask& mask, int size);

double mean_abs_difference(const ImageTensor& a, const ImageTensor& b);

// PNG input/output, 8 bits per channel. Grayscale and RGBA inputs are
// converted to RGB; values map to [0,1] on load.
ImageTensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageTensor& image);
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace upgan
