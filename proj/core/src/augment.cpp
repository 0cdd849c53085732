// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "upgan/error.hpp"
#include "upgan/rng.hpp"

namespace upgan {

void AugmentConfig::validate() const {
    if (!(elastic_alpha >= 0)) throw ConfigError("elastic_alpha must be >= 0");
    if (!(elastic_sigma > 0)) throw ConfigError("elastic_sigma must be > 0");
    if (!(rotation_min <= rotation_max) || rotation_min < -180 || rotation_max > 180)
        throw ConfigError("rotation range must be an ordered subrange of [-180, 180]");
}

nlohmann::json AugmentConfig::to_json() const {
    return {{"elastic_alpha", elastic_alpha},
            {"elastic_sigma", elastic_sigma},
            {"rotation_min", rotation_min},
            {"rotation_max", rotation_max},
            {"augment_seed", seed}};
}

AugmentConfig AugmentConfig::from_json(const nlohmann::json& j) {
    AugmentConfig c;
    c.elastic_alpha = j.value("elastic_alpha", c.elastic_alpha);
    c.elastic_sigma = j.value("elastic_sigma", c.elastic_sigma);
    c.rotation_min = j.value("rotation_min", c.rotation_min);
    c.rotation_max = j.value("rotation_max", c.rotation_max);
    c.seed = j.value("augment_seed", c.seed);
    c.validate();
    return c;
}

namespace augment {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (double& v : k) v /= sum;
    return k;
}

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

// Separable smoothing with reflected borders.
void smooth(std::vector<double>& v, int h, int w, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    std::vector<double> tmp(v.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * v[static_cast<std::size_t>(y) * w + reflect(x + i, w)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(reflect(y + i, h)) * w + x];
            v[static_cast<std::size_t>(y) * w + x] = acc;
        }
}

// Bilinear sample at continuous coordinates; pixel centers sit at +0.5.
// Out-of-range reads clamp to the edge or return zero.
double sample_bilinear(const ImageTensor& img, double x, double y, int c, bool zero_pad) {
    const double fx = x - 0.5, fy = y - 0.5;
    const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0, ay = fy - y0;
    auto px = [&](int yy, int xx) -> double {
        if (zero_pad && (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height)) return 0.0;
        return img.at(std::clamp(yy, 0, img.height - 1), std::clamp(xx, 0, img.width - 1), c);
    };
    return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) + ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

std::uint8_t sample_nearest(const BinaryMask& m, double x, double y, bool zero_pad) {
    int xi = static_cast<int>(std::floor(x)), yi = static_cast<int>(std::floor(y));
    if (xi < 0 || yi < 0 || xi >= m.width || yi >= m.height) {
        if (zero_pad) return 0;
        xi = std::clamp(xi, 0, m.width - 1);
        yi = std::clamp(yi, 0, m.height - 1);
    }
    return m.at(yi, xi);
}

bool clamp_point(Point& p, int width, int height) {
    const Point orig = p;
    p.x = std::clamp(p.x, 0.0, static_cast<double>(width));
    p.y = std::clamp(p.y, 0.0, static_cast<double>(height));
    return !(p == orig);
}

// Moves every landmark through `move` in pixel space, clamping to the image.
template <typename Move>
int transform_landmarks(FaceRecord& r, Move move) {
    const int w = r.image.width, h = r.image.height;
    int clamped = 0;
    if (r.landmarks68) {
        for (auto& p : *r.landmarks68) {
            p = move(p);
            clamped += clamp_point(p, w, h);
        }
        r.landmarks = dataset::reduce_landmarks(*r.landmarks68, w, h).landmarks;
    } else {
        for (int i = 0; i < kReducedPoints; ++i) {
            const Point q = r.landmarks.point(i);
            Point p = move(Point{q.x * w, q.y * h});
            clamped += clamp_point(p, w, h);
            r.landmarks.set_point(i, {p.x / w, p.y / h});
        }
    }
    return clamped;
}

}  // namespace

Point DisplacementField::at(Point p) const {
    const double fx = std::clamp(p.x - 0.5, 0.0, static_cast<double>(width - 1));
    const double fy = std::clamp(p.y - 0.5, 0.0, static_cast<double>(height - 1));
    const int x0 = std::min(static_cast<int>(fx), width - 1), y0 = std::min(static_cast<int>(fy), height - 1);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double ax = fx - x0, ay = fy - y0;
    auto lerp = [&](const std::vector<double>& f) {
        auto v = [&](int y, int x) { return f[static_cast<std::size_t>(y) * width + x]; };
        return (1 - ay) * ((1 - ax) * v(y0, x0) + ax * v(y0, x1)) + ay * ((1 - ax) * v(y1, x0) + ax * v(y1, x1));
    };
    return {lerp(dx), lerp(dy)};
}

double DisplacementField::max_magnitude() const {
    double m = 0.0;
    for (std::size_t i = 0; i < dx.size(); ++i) m = std::max(m, std::hypot(dx[i], dy[i]));
    return m;
}

DisplacementField elastic_field(int height, int width, double alpha, double sigma, std::uint64_t seed) {
    if (!(alpha >= 0) || !(sigma > 0)) throw ConfigError("elastic field needs alpha >= 0 and sigma > 0");
    DisplacementField f{height, width, std::vector<double>(static_cast<std::size_t>(height) * width, 0.0),
                        std::vector<double>(static_cast<std::size_t>(height) * width, 0.0)};
    if (alpha == 0.0) return f;
    Rng rng(seed);
    for (double& v : f.dx) v = rng.uniform(-1.0, 1.0);
    for (double& v : f.dy) v = rng.uniform(-1.0, 1.0);
    smooth(f.dx, height, width, sigma);
    smooth(f.dy, height, width, sigma);
    const double peak = f.max_magnitude();
    if (peak > 0) {
        for (double& v : f.dx) v *= alpha / peak;
        for (double& v : f.dy) v *= alpha / peak;
    }
    return f;
}

AugmentResult apply_field(const FaceRecord& record, const DisplacementField& field) {
    const int h = record.image.height, w = record.image.width;
    if (field.height != h || field.width != w) throw ShapeError("displacement field does not match the image");
    AugmentResult out{record, 0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double sx = x + 0.5 + field.dx[i], sy = y + 0.5 + field.dy[i];
            for (int c = 0; c < record.image.channels; ++c)
                out.record.image.at(y, x, c) = sample_bilinear(record.image, sx, sy, c, false);
            if (record.mask) out.record.mask->at(y, x) = sample_nearest(*record.mask, sx, sy, false);
        }
    out.clamped_landmarks = transform_landmarks(out.record, [&](Point q) {
        const Point d = field.at(q);
        return Point{q.x - d.x, q.y - d.y};
    });
    return out;
}

AugmentResult elastic_distortion(const FaceRecord& record, double alpha, double sigma, std::uint64_t seed) {
    if (alpha == 0.0) return {record, 0};
    return apply_field(record, elastic_field(record.image.height, record.image.width, alpha, sigma, seed));
}

Point rotate_point(Point p, Point center, double degrees) {
    const double t = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    const double x = p.x - center.x, y = p.y - center.y;
    return {center.x + c * x - s * y, center.y + s * x + c * y};
}

AugmentResult rotate(const FaceRecord& record, double degrees) {
    if (degrees == 0.0) return {record, 0};
    const int h = record.image.height, w = record.image.width;
    const Point center{w / 2.0, h / 2.0};
    AugmentResult out{record, 0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Point src = rotate_point({x + 0.5, y + 0.5}, center, -degrees);
            for (int c = 0; c < record.image.channels; ++c)
                out.record.image.at(y, x, c) = sample_bilinear(record.image, src.x, src.y, c, true);
            if (record.mask) out.record.mask->at(y, x) = sample_nearest(*record.mask, src.x, src.y, true);
        }
    out.clamped_landmarks = transform_landmarks(out.record, [&](Point q) { return rotate_point(q, center, degrees); });
    return out;
}

AugmentResult random_rotation(const FaceRecord& record, double lo, double hi, std::uint64_t seed) {
    if (lo > hi) throw ConfigError("rotation range is reversed");
    Rng rng(seed);
    const double angle = lo == hi ? lo : rng.uniform(lo, hi);
    return rotate(record, angle);
}

AugmentResult augment_record(const FaceRecord& record, const AugmentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto elastic = elastic_distortion(record, cfg.elastic_alpha, cfg.elastic_sigma, derive_seed(seed, {1}));
    auto rotated = random_rotation(elastic.record, cfg.rotation_min, cfg.rotation_max, derive_seed(seed, {2}));
    rotated.clamped_landmarks += elastic.clamped_landmarks;
    return rotated;
}

}  // namespace augment
}  // namespace upgan
