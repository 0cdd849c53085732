// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upgan/image.hpp"

namespace upgan {

inline constexpr int kAttributeDim = 3;
inline constexpr int kReducedPoints = 7;
inline constexpr int kLandmarkDim = 2 * kReducedPoints;
inline constexpr int kFullLandmarkPoints = 68;
inline constexpr int kConditionDim = kAttributeDim + kLandmarkDim;

inline constexpr double kAgeDivisor = 116.0;
inline constexpr int kSkinToneCategories = 5;

/// Image size the generator and the synthetic corpus work at.
inline constexpr int kModelImageSize = 128;

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

/// Static utility: normalized age, binary gender and normalized skin tone.
struct AttributeVector {
    double age = 0.0;
    double gender = 0.0;
    double skin_tone = 0.0;

    std::array<double, kAttributeDim> values() const { return {age, gender, skin_tone}; }
    static AttributeVector from_values(std::span<const double> v);

    /// Throws ValidationError unless every component lies in [0,1] and
    /// gender is exactly 0 or 1.
    void validate() const;

    bool operator==(const AttributeVector&) const = default;
};

/// Dynamic utility: seven normalized points, flattened as x0,y0,x1,y1,...
/// in the order left-eye, right-eye, nose, mouth-left, mouth-top,
/// mouth-right, mouth-bottom.
struct LandmarkVector {
    enum Index : int { left_eye, right_eye, nose, mouth_left, mouth_top, mouth_right, mouth_bottom };

    std::array<double, kLandmarkDim> values{};

    Point point(int i) const { return {values[2 * i], values[2 * i + 1]}; }
    void set_point(int i, Point p) {
        values[2 * i] = p.x;
        values[2 * i + 1] = p.y;
    }
    static LandmarkVector from_values(std::span<const double> v);
    void validate() const;

    bool operator==(const LandmarkVector&) const = default;
};

/// iBUG-ordered 68-point annotation in pixel coordinates.
using Landmarks68 = std::array<Point, kFullLandmarkPoints>;

struct FaceRecord {
    std::string id;
    ImageTensor image;
    AttributeVector attributes;
    std::optional<Landmarks68> landmarks68;
    LandmarkVector landmarks;
    std::optional<BinaryMask> mask;
    std::optional<std::string> identity;
};

/// Generator input: attributes followed by landmarks (17 values).
std::array<double, kConditionDim> condition_vector(const AttributeVector& a, const LandmarkVector& l);

namespace dataset {

/// Parses `<age>_<gender>_<race>_*.<ext>` (UTKFace) into a normalized
/// attribute vector. Age is divided by 116, race by (categories - 1).
AttributeVector parse_attributes(std::string_view filename);

/// Reads a landmark sidecar: one "x y" line per point. Throws
/// AnnotationError unless exactly 68 points are present.
Landmarks68 read_landmarks68(const std::filesystem::path& landmark_file);
void write_landmarks68(const std::filesystem::path& landmark_file, const Landmarks68& points);

/// Attributes and raw 68-point landmarks of one annotated image. The image,
/// reduced landmarks and mask are filled in by `complete_record`.
FaceRecord parse_annotation(std::string_view filename, const std::filesystem::path& landmark_file);

/// Attaches the image, then derives reduced landmarks and the mask.
void complete_record(FaceRecord& record, ImageTensor image);

struct LandmarkReduction {
    LandmarkVector landmarks;
    bool clamped = false;
};

/// 68 -> 7 reduction: eye centers are means of points 36-41 and 42-47,
/// the nose is point 30, mouth points are 48 (left), 51 (top), 54 (right)
/// and 57 (bottom). Coordinates are divided by the image size; anything
/// outside [0,1] is clamped and reported.
LandmarkReduction reduce_landmarks(const Landmarks68& points, int width, int height);

/// Filled convex hull of the landmarks rasterized at pixel centers
/// (pixel (r,c) is sampled at (c+0.5, r+0.5)). A degenerate hull yields
/// the rasterized bounding segment dilated by one pixel.
BinaryMask derive_mask(std::span<const Point> points, int height, int width);

/// Convex hull in counter-clockwise order (monotone chain), collinear
/// points dropped.
std::vector<Point> convex_hull(std::span<const Point> points);
double polygon_area(std::span<const Point> polygon);

/// Shading table of the procedural faces. Index 0 is the lightest tone.
std::array<double, 3> skin_color(double skin_tone);

/// 68-point layout consistent with a reduced landmark vector: reducing it
/// gives back the seven anchors exactly.
Landmarks68 landmark_template(const LandmarkVector& landmarks, int size);

/// Procedural face: deterministic in its inputs, with an identity-seeded
/// texture inside the face region. The record carries the 68-point template
/// and the convex-hull mask.
FaceRecord synth_face(const AttributeVector& attributes, const LandmarkVector& landmarks,
                      std::uint64_t identity_seed, int size = kModelImageSize);

/// Entry of a synthetic manifest; enough to regenerate one record.
struct SynthEntry {
    std::string id;
    std::string identity;
    std::uint64_t identity_seed = 0;
    std::uint64_t pose_seed = 0;
    AttributeVector attributes;
    LandmarkVector landmarks;
    int size = kModelImageSize;
};

struct SynthCorpusSpec {
    int records = 200;
    int identities = 10;
    std::uint64_t seed = 7;
    int size = kModelImageSize;
};

/// Record j belongs to identity j mod identities. Identities come in pairs
/// sharing the same attribute vector; landmarks are a shared template with
/// per-image pose and expression jitter, so they carry no identity.
std::vector<SynthEntry> plan_synthetic_corpus(const SynthCorpusSpec& spec);
FaceRecord render_entry(const SynthEntry& entry, int size = kModelImageSize);
std::vector<FaceRecord> make_synthetic_corpus(const SynthCorpusSpec& spec);

/// Writes manifest.jsonl plus UTKFace-style images, landmark sidecars and
/// mask PNGs under `dir`.
void write_synthetic_corpus(const std::filesystem::path& dir, const SynthCorpusSpec& spec);

enum class CorpusFormat { utkface, synthetic_manifest };
CorpusFormat parse_corpus_format(std::string_view name);

/// Lazy, filename-ordered corpus stream. Unreadable entries are skipped and
/// counted. An empty listing raises CorpusError at open.
class CorpusReader {
public:
    CorpusReader(const std::filesystem::path& path, CorpusFormat format);

    std::optional<FaceRecord> next();

    std::size_t entry_count() const { return entries_.size(); }
    std::size_t skipped() const { return skipped_; }

private:
    CorpusFormat format_;
    std::vector<std::filesystem::path> entries_;
    std::vector<SynthEntry> synth_;
    std::size_t cursor_ = 0;
    std::size_t skipped_ = 0;
};

/// Drains a reader; throws CorpusError when nothing could be read.
std::vector<FaceRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format);

}  // namespace dataset
}  // namespace upgan
