// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "upgan/error.hpp"

namespace upgan {

bool ImageTensor::in_unit_range() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::size_t BinaryMask::area() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

bool BinaryMask::is_binary() const {
    return std::all_of(labels.begin(), labels.end(), [](std::uint8_t v) { return v <= 1; });
}

double MaskProbabilities::max_normalization_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < data.size(); i += 2)
        worst = std::max(worst, std::abs(data[i] + data[i + 1] - 1.0));
    return worst;
}

BinaryMask MaskProbabilities::binarize(double threshold) const {
    BinaryMask out(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out.at(y, x) = face(y, x) > threshold ? 1 : 0;
    return out;
}

ImageTensor flip_horizontal(const ImageTensor& image) {
    ImageTensor out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
    return out;
}

BinaryMask flip_horizontal(const BinaryMask& mask) {
    BinaryMask out(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(y, mask.width - 1 - x);
    return out;
}

ImageTensor downsample_area(const ImageTensor& image, int factor) {
    if (factor < 1 || image.height % factor != 0 || image.width % factor != 0)
        throw ShapeError("downsample factor " + std::to_string(factor) + " does not divide " +
                         std::to_string(image.height) + "x" + std::to_string(image.width));
    if (factor == 1) return image;
    ImageTensor out(image.height / factor, image.width / factor, image.channels);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < image.channels; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) acc += image.at(y * factor + dy, x * factor + dx, c);
                out.at(y, x, c) = acc * norm;
            }
    return out;
}

BinaryMask downsample_mask(const BinaryMask& mask, int factor) {
    if (factor < 1 || mask.height % factor != 0 || mask.width % factor != 0)
        throw ShapeError("mask downsample factor does not divide mask size");
    if (factor == 1) return mask;
    BinaryMask out(mask.height / factor, mask.width / factor);
    const int half = factor * factor;
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            int count = 0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) count += mask.at(y * factor + dy, x * factor + dx);
            out.at(y, x) = 2 * count >= half ? 1 : 0;
        }
    return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width) {
    ImageTensor out(height, width, image.channels);
    const double sy = static_cast<double>(image.height) / height;
    const double sx = static_cast<double>(image.width) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
                const double bottom = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1 - wy) + bottom * wy;
            }
        }
    }
    return out;
}

ImageTensor resize_to(const ImageTensor& image, int size) {
    if (image.height == size && image.width == size) return image;
    if (image.height == image.width && image.height > size && image.height % size == 0)
        return downsample_area(image, image.height / size);
    return resize_bilinear(image, size, size);
}

BinaryMask resize_mask_to(const BinaryMask& mask, int size) {
    if (mask.height == size && mask.width == size) return mask;
    if (mask.height == mask.width && mask.height > size && mask.height % size == 0)
        return downsample_mask(mask, mask.height / size);
    BinaryMask out(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / size));
            const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / size));
            out.at(y, x) = mask.at(sy, sx);
        }
    return out;
}

double mean_abs_difference(const ImageTensor& a, const ImageTensor& b) {
    if (!a.same_shape(b)) throw ShapeError("mean_abs_difference: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(a.data[i] - b.data[i]);
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

namespace {

std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path, png_uint_32 format, int& h, int& w) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str()))
        throw IoError("cannot read PNG '" + path.string() + "': " + img.message);
    img.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode PNG '" + path.string() + "': " + img.message);
    }
    h = static_cast<int>(img.height);
    w = static_cast<int>(img.width);
    return buffer;
}

void write_png_bytes(const std::filesystem::path& path, png_uint_32 format, int h, int w,
                     const std::vector<std::uint8_t>& buffer) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buffer.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path.string() + "': " + img.message);
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageTensor read_png(const std::filesystem::path& path) {
    int h = 0, w = 0;
    const auto bytes = read_png_bytes(path, PNG_FORMAT_RGB, h, w);
    ImageTensor out(h, w, 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.data[i] = bytes[i] / 255.0;
    return out;
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
    if (image.channels != 3 && image.channels != 1)
        throw ShapeError("write_png: expected 1 or 3 channels, got " + std::to_string(image.channels));
    std::vector<std::uint8_t> bytes(image.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(image.data[i]);
    write_png_bytes(path, image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY, image.height, image.width, bytes);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
    int h = 0, w = 0;
    const auto bytes = read_png_bytes(path, PNG_FORMAT_GRAY, h, w);
    BinaryMask out(h, w);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.labels[i] = bytes[i] >= 128 ? 1 : 0;
    return out;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> bytes(mask.labels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.labels[i] ? 255 : 0;
    write_png_bytes(path, PNG_FORMAT_GRAY, mask.height, mask.width, bytes);
}

}  // namespace upgan
