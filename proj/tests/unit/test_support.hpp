// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "upgan/dataset.hpp"
#include "upgan/image.hpp"
#include "upgan/rng.hpp"

namespace upgan::test {

inline ImageTensor random_image(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    ImageTensor img(h, w, c);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

inline LandmarkVector default_landmarks() {
    LandmarkVector l;
    const double pts[14] = {0.36, 0.40, 0.64, 0.40, 0.50, 0.55, 0.39, 0.69, 0.50, 0.665, 0.61, 0.69, 0.50, 0.74};
    for (int i = 0; i < 14; ++i) l.values[i] = pts[i];
    return l;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("upgan_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace upgan::test
