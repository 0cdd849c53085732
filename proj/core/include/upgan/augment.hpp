// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "upgan/dataset.hpp"

namespace upgan {

struct AugmentConfig {
    double elastic_alpha = 8.0;  // peak displacement, pixels
    double elastic_sigma = 6.0;  // smoothing std, pixels
    double rotation_min = -30.0;
    double rotation_max = 30.0;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static AugmentConfig from_json(const nlohmann::json& j);
    bool operator==(const AugmentConfig&) const = default;
};

struct AugmentResult {
    FaceRecord record;
    int clamped_landmarks = 0;  // points pushed back inside the image
};

namespace augment {

/// Per-pixel displacement field, HxW pairs (dx, dy) in pixels.
struct DisplacementField {
    int height = 0;
    int width = 0;
    std::vector<double> dx;
    std::vector<double> dy;

    /// Bilinear lookup at a continuous pixel coordinate (edge clamped).
    Point at(Point p) const;
    double max_magnitude() const;
};

/// Gaussian-smoothed uniform noise rescaled so its peak magnitude is alpha.
DisplacementField elastic_field(int height, int width, double alpha, double sigma, std::uint64_t seed);

/// Resamples the image (bilinear), mask (nearest) and moves landmarks by
/// the field. Output pixel p reads input at p + d(p); a landmark at q moves
/// to q - d(q).
AugmentResult apply_field(const FaceRecord& record, const DisplacementField& field);

AugmentResult elastic_distortion(const FaceRecord& record, double alpha, double sigma, std::uint64_t seed);

/// Rotation of p by theta degrees about center, in image coordinates.
Point rotate_point(Point p, Point center, double degrees);

/// Rotation by a fixed angle about the image center with zero padding.
AugmentResult rotate(const FaceRecord& record, double degrees);

/// Angle drawn uniformly from [lo, hi].
AugmentResult random_rotation(const FaceRecord& record, double lo, double hi, std::uint64_t seed);

/// Elastic distortion followed by a random rotation, both seeded from `seed`.
AugmentResult augment_record(const FaceRecord& record, const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace augment
}  // namespace upgan
