// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "upgan/error.hpp"
#include "upgan/log.hpp"
#include "upgan/rng.hpp"

namespace upgan {

AttributeVector AttributeVector::from_values(std::span<const double> v) {
    if (v.size() != kAttributeDim)
        throw ShapeError("attribute vector must have 3 components, got " + std::to_string(v.size()));
    return {v[0], v[1], v[2]};
}

void AttributeVector::validate() const {
    for (double c : values())
        if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("attribute component outside [0,1]");
    if (gender != 0.0 && gender != 1.0) throw ValidationError("gender must be 0 or 1");
}

LandmarkVector LandmarkVector::from_values(std::span<const double> v) {
    if (v.size() != kLandmarkDim)
        throw ShapeError("landmark vector must have 14 components, got " + std::to_string(v.size()));
    LandmarkVector out;
    std::copy(v.begin(), v.end(), out.values.begin());
    return out;
}

void LandmarkVector::validate() const {
    for (double c : values)
        if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("landmark coordinate outside [0,1]");
}

std::array<double, kConditionDim> condition_vector(const AttributeVector& a, const LandmarkVector& l) {
    std::array<double, kConditionDim> out{};
    const auto av = a.values();
    std::copy(av.begin(), av.end(), out.begin());
    std::copy(l.values.begin(), l.values.end(), out.begin() + kAttributeDim);
    return out;
}

namespace dataset {
namespace {

int parse_int_token(std::string_view token, std::string_view what, std::string_view filename) {
    int value = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc{} || ptr != end)
        throw ParseError("malformed " + std::string(what) + " token '" + std::string(token) + "' in '" +
                         std::string(filename) + "'");
    return value;
}

Point mean_of(const Landmarks68& p, int first, int count) {
    Point m;
    for (int i = first; i < first + count; ++i) {
        m.x += p[i].x;
        m.y += p[i].y;
    }
    return {m.x / count, m.y / count};
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

Point add(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point scale(Point a, double s) { return {a.x * s, a.y * s}; }
Point sub(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point lerp(Point a, Point b, double t) { return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t}; }
double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double norm(Point a) { return std::sqrt(dot(a, a)); }

bool inside_polygon(std::span<const Point> poly, Point p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        if ((poly[i].y > p.y) != (poly[j].y > p.y) &&
            p.x < (poly[j].x - poly[i].x) * (p.y - poly[i].y) / (poly[j].y - poly[i].y) + poly[i].x)
            in = !in;
    }
    return in;
}

void dilate(BinaryMask& mask) {
    BinaryMask src = mask;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (src.at(y, x)) continue;
            for (int dy = -1; dy <= 1 && !mask.at(y, x); ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < mask.height && xx >= 0 && xx < mask.width && src.at(yy, xx)) {
                        mask.at(y, x) = 1;
                        break;
                    }
                }
        }
}

void mark_pixel(BinaryMask& mask, Point p) {
    const int x = static_cast<int>(std::floor(p.x));
    const int y = static_cast<int>(std::floor(p.y));
    if (x >= 0 && x < mask.width && y >= 0 && y < mask.height) mask.at(y, x) = 1;
}

// Face frame spanned by the eyes: origin at the eye midpoint, unit x along
// the inter-ocular axis, unit y pointing down the face, d = eye distance.
struct FaceFrame {
    Point origin;
    Point ux;
    Point uy;
    double d = 1.0;

    Point to_pixel(double u, double v) const { return add(origin, add(scale(ux, u * d), scale(uy, v * d))); }
    Point to_local(Point p) const {
        const Point r = sub(p, origin);
        return {dot(r, ux) / d, dot(r, uy) / d};
    }
};

FaceFrame face_frame(const LandmarkVector& l, int size) {
    const Point le = scale(l.point(LandmarkVector::left_eye), size);
    const Point re = scale(l.point(LandmarkVector::right_eye), size);
    FaceFrame f;
    f.origin = lerp(le, re, 0.5);
    const Point axis = sub(re, le);
    f.d = std::max(norm(axis), 1e-6);
    f.ux = scale(axis, 1.0 / f.d);
    f.uy = {-f.ux.y, f.ux.x};
    return f;
}

}  // namespace

AttributeVector parse_attributes(std::string_view filename) {
    const auto slash = filename.find_last_of("/\\");
    if (slash != std::string_view::npos) filename.remove_prefix(slash + 1);
    std::string_view stem = filename;
    const auto dot_pos = stem.find_last_of('.');
    if (dot_pos == std::string_view::npos)
        throw ParseError("filename '" + std::string(filename) + "' has no extension");
    stem = stem.substr(0, dot_pos);

    std::array<std::string_view, 3> tokens;
    std::string_view rest = stem;
    for (int i = 0; i < 3; ++i) {
        const auto us = rest.find('_');
        if (us == std::string_view::npos && i < 2)
            throw ParseError("filename '" + std::string(filename) + "' is missing the " +
                             (i == 0 ? "gender" : "race") + " token");
        tokens[i] = rest.substr(0, us);
        rest = us == std::string_view::npos ? std::string_view{} : rest.substr(us + 1);
    }
    const int age = parse_int_token(tokens[0], "age", filename);
    const int gender = parse_int_token(tokens[1], "gender", filename);
    const int race = parse_int_token(tokens[2], "race", filename);
    if (age < 0 || age > static_cast<int>(kAgeDivisor))
        throw ParseError("age token '" + std::string(tokens[0]) + "' outside [0,116] in '" + std::string(filename) + "'");
    if (gender != 0 && gender != 1)
        throw ParseError("gender token '" + std::string(tokens[1]) + "' is not 0 or 1 in '" + std::string(filename) + "'");
    if (race < 0 || race >= kSkinToneCategories)
        throw ParseError("race token '" + std::string(tokens[2]) + "' outside [0,4] in '" + std::string(filename) + "'");
    return {age / kAgeDivisor, static_cast<double>(gender), race / static_cast<double>(kSkinToneCategories - 1)};
}

Landmarks68 read_landmarks68(const std::filesystem::path& landmark_file) {
    std::ifstream in(landmark_file);
    if (!in) throw AnnotationError("cannot open landmark file '" + landmark_file.string() + "'");
    std::vector<Point> points;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        Point p;
        if (!(ls >> p.x >> p.y))
            throw AnnotationError("malformed landmark line '" + line + "' in '" + landmark_file.string() + "'");
        points.push_back(p);
    }
    if (points.size() != kFullLandmarkPoints)
        throw AnnotationError("expected 68 landmark points in '" + landmark_file.string() + "', found " +
                              std::to_string(points.size()));
    Landmarks68 out;
    std::copy(points.begin(), points.end(), out.begin());
    return out;
}

void write_landmarks68(const std::filesystem::path& landmark_file, const Landmarks68& points) {
    std::ofstream out(landmark_file);
    if (!out) throw IoError("cannot write landmark file '" + landmark_file.string() + "'");
    out.precision(17);
    for (const Point& p : points) out << p.x << ' ' << p.y << '\n';
}

FaceRecord parse_annotation(std::string_view filename, const std::filesystem::path& landmark_file) {
    FaceRecord record;
    record.attributes = parse_attributes(filename);
    record.landmarks68 = read_landmarks68(landmark_file);
    record.id = std::filesystem::path(std::string(filename)).stem().string();
    return record;
}

void complete_record(FaceRecord& record, ImageTensor image) {
    record.image = std::move(image);
    if (record.landmarks68) {
        const auto reduced = reduce_landmarks(*record.landmarks68, record.image.width, record.image.height);
        if (reduced.clamped) log::warn("record '" + record.id + "': landmarks outside the image were clamped");
        record.landmarks = reduced.landmarks;
        record.mask = derive_mask(*record.landmarks68, record.image.height, record.image.width);
    }
}

LandmarkReduction reduce_landmarks(const Landmarks68& p, int width, int height) {
    if (width <= 0 || height <= 0) throw ShapeError("reduce_landmarks: non-positive image size");
    const std::array<Point, kReducedPoints> pixel = {
        mean_of(p, 36, 6), mean_of(p, 42, 6), p[30], p[48], p[51], p[54], p[57],
    };
    LandmarkReduction out;
    for (int i = 0; i < kReducedPoints; ++i) {
        Point n{pixel[i].x / width, pixel[i].y / height};
        const Point c{std::clamp(n.x, 0.0, 1.0), std::clamp(n.y, 0.0, 1.0)};
        if (c.x != n.x || c.y != n.y) out.clamped = true;
        out.landmarks.set_point(i, c);
    }
    return out;
}

std::vector<Point> convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(std::span<const Point> poly) {
    double a = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        a += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    return poly.size() < 3 ? 0.0 : 0.5 * a;
}

BinaryMask derive_mask(std::span<const Point> points, int height, int width) {
    if (points.empty()) throw ValidationError("derive_mask: no landmark points");
    BinaryMask mask(height, width);
    const auto hull = convex_hull(points);
    const double area = polygon_area(hull);
    constexpr double kEdgeTolerance = 1e-9;

    if (hull.size() >= 3 && area > 1e-9) {
        double min_y = hull[0].y, max_y = hull[0].y;
        for (const Point& h : hull) {
            min_y = std::min(min_y, h.y);
            max_y = std::max(max_y, h.y);
        }
        const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = 0; x < width; ++x) {
                const Point c{x + 0.5, y + 0.5};
                bool inside = true;
                for (std::size_t i = 0; i < hull.size() && inside; ++i) {
                    const Point& a = hull[i];
                    const Point& b = hull[(i + 1) % hull.size()];
                    const double len = norm(sub(b, a));
                    inside = cross(a, b, c) >= -kEdgeTolerance * len;
                }
                if (inside) mask.at(y, x) = 1;
            }
        return mask;
    }

    // Degenerate hull: rasterize the segment between the extreme points.
    Point a = hull.front(), b = hull.back();
    double best = -1.0;
    for (const Point& p : points)
        for (const Point& q : points) {
            const double d = norm(sub(p, q));
            if (d > best) {
                best = d;
                a = p;
                b = q;
            }
        }
    const int samples = std::max(1, static_cast<int>(std::ceil(best * 4.0)));
    for (int i = 0; i <= samples; ++i) mark_pixel(mask, lerp(a, b, static_cast<double>(i) / samples));
    dilate(mask);
    return mask;
}

std::array<double, 3> skin_color(double skin_tone) {
    static constexpr std::array<std::array<double, 3>, kSkinToneCategories> table = {{
        {0.95, 0.84, 0.74},
        {0.84, 0.68, 0.55},
        {0.70, 0.52, 0.39},
        {0.54, 0.38, 0.27},
        {0.38, 0.26, 0.18},
    }};
    const double t = std::clamp(skin_tone, 0.0, 1.0) * (kSkinToneCategories - 1);
    const int lo = std::min(static_cast<int>(std::floor(t)), kSkinToneCategories - 2);
    const double w = t - lo;
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) out[c] = table[lo][c] * (1 - w) + table[lo + 1][c] * w;
    return out;
}

Landmarks68 landmark_template(const LandmarkVector& l, int size) {
    const FaceFrame f = face_frame(l, size);
    auto px = [&](int i) { return scale(l.point(i), size); };
    const Point le = px(LandmarkVector::left_eye), re = px(LandmarkVector::right_eye);
    const Point nose = px(LandmarkVector::nose);
    const Point ml = px(LandmarkVector::mouth_left), mt = px(LandmarkVector::mouth_top);
    const Point mr = px(LandmarkVector::mouth_right), mb = px(LandmarkVector::mouth_bottom);

    Landmarks68 p{};
    const Point chin_local = f.to_local(mb);
    const double jaw_depth = std::max(chin_local.y + 0.55, 0.9);
    const double jaw_half_width = 1.05;
    const Point jaw_center = f.to_pixel(0.0, -0.05);
    for (int t = 0; t <= 16; ++t) {
        const double theta = std::numbers::pi * t / 16.0;
        const double u = -std::cos(theta) * jaw_half_width;
        const double v = std::sin(theta) * jaw_depth;
        p[t] = add(jaw_center, add(scale(f.ux, u * f.d), scale(f.uy, v * f.d)));
    }
    for (int side = 0; side < 2; ++side) {
        const Point eye = side == 0 ? le : re;
        const Point eye_local = f.to_local(eye);
        for (int k = 0; k < 5; ++k) {
            const double s = (k - 2) / 2.0;
            p[17 + side * 5 + k] = f.to_pixel(eye_local.x + 0.32 * s, eye_local.y - 0.38 + 0.08 * s * s);
        }
    }
    for (int k = 0; k < 4; ++k) p[27 + k] = lerp(lerp(f.origin, nose, 0.15), nose, k / 3.0);
    p[30] = nose;
    const Point nose_local = f.to_local(nose);
    for (int k = 0; k < 5; ++k) p[31 + k] = f.to_pixel(nose_local.x + 0.1 * (k - 2), nose_local.y + 0.1);
    for (int side = 0; side < 2; ++side) {
        const Point eye_local = f.to_local(side == 0 ? le : re);
        for (int k = 0; k < 6; ++k) {
            const double theta = std::numbers::pi * (1.0 + k / 3.0);
            p[36 + side * 6 + k] = f.to_pixel(eye_local.x + 0.2 * std::cos(theta), eye_local.y + 0.09 * std::sin(theta));
        }
        const Point target = side == 0 ? le : re;
        const Point mean = mean_of(p, 36 + side * 6, 6);
        for (int k = 0; k < 6; ++k) p[36 + side * 6 + k] = add(p[36 + side * 6 + k], sub(target, mean));
    }
    p[48] = ml;
    p[49] = lerp(ml, mt, 1.0 / 3.0);
    p[50] = lerp(ml, mt, 2.0 / 3.0);
    p[51] = mt;
    p[52] = lerp(mt, mr, 1.0 / 3.0);
    p[53] = lerp(mt, mr, 2.0 / 3.0);
    p[54] = mr;
    p[55] = lerp(mr, mb, 1.0 / 3.0);
    p[56] = lerp(mr, mb, 2.0 / 3.0);
    p[57] = mb;
    p[58] = lerp(mb, ml, 1.0 / 3.0);
    p[59] = lerp(mb, ml, 2.0 / 3.0);
    const Point mouth_center = scale(add(add(ml, mr), add(mt, mb)), 0.25);
    static constexpr std::array<int, 8> inner = {48, 50, 51, 52, 54, 56, 57, 58};
    for (int k = 0; k < 8; ++k) p[60 + k] = lerp(mouth_center, p[inner[k]], 0.5);
    return p;
}

FaceRecord synth_face(const AttributeVector& attributes, const LandmarkVector& landmarks, std::uint64_t identity_seed,
                      int size) {
    attributes.validate();
    landmarks.validate();
    const Landmarks68 points = landmark_template(landmarks, size);
    BinaryMask mask = derive_mask(points, size, size);
    const FaceFrame f = face_frame(landmarks, size);

    // Identity texture: three oriented gratings and three dark blotches,
    // all defined in face-frame units so they follow the pose.
    struct Grating {
        double fu, fv, phase, amplitude;
    };
    struct Blotch {
        double u, v, radius, depth;
    };
    Rng rng(derive_seed(identity_seed, {0x7e47u}));
    std::array<Grating, 3> gratings{};
    for (auto& g : gratings) {
        const double freq = rng.uniform(0.5, 1.4);
        const double angle = rng.uniform(0.0, std::numbers::pi);
        g = {freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2 * std::numbers::pi),
             rng.uniform(0.05, 0.09)};
    }
    std::array<Blotch, 3> blotches{};
    for (auto& b : blotches) b = {rng.uniform(-0.9, 0.9), rng.uniform(-0.2, 1.3), rng.uniform(0.12, 0.25), rng.uniform(0.12, 0.22)};
    const double tint_r = rng.uniform(-0.04, 0.04);
    const double tint_b = rng.uniform(-0.04, 0.04);

    const auto skin = skin_color(attributes.skin_tone);
    const double desaturate = 0.35 * attributes.age;
    const double brow_dark = attributes.gender > 0.5 ? 0.18 : 0.35;
    const std::array<double, 3> lip =
        attributes.gender > 0.5 ? std::array<double, 3>{0.55, 0.30, 0.30} : std::array<double, 3>{0.72, 0.22, 0.30};

    const Point nose = scale(landmarks.point(LandmarkVector::nose), size);
    const Point nose_local = f.to_local(nose);
    std::vector<Point> mouth_poly(points.begin() + 48, points.begin() + 60);
    const std::array<Point, 2> eyes = {f.to_local(scale(landmarks.point(LandmarkVector::left_eye), size)),
                                       f.to_local(scale(landmarks.point(LandmarkVector::right_eye), size))};

    FaceRecord record;
    record.image = ImageTensor(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const Point pix{x + 0.5, y + 0.5};
            std::array<double, 3> rgb{};
            const double bg = 0.58 - 0.12 * (pix.y / size);
            rgb = {bg, bg * 0.98, bg * 1.02};
            if (mask.at(y, x)) {
                const Point q = f.to_local(pix);
                double tex = 0.0;
                for (const auto& g : gratings)
                    tex += g.amplitude * std::sin(2 * std::numbers::pi * (g.fu * q.x + g.fv * q.y) + g.phase);
                for (const auto& b : blotches) {
                    const double du = q.x - b.u, dv = q.y - b.v;
                    tex -= b.depth * std::exp(-(du * du + dv * dv) / (2 * b.radius * b.radius));
                }
                const double r2 = (q.x * q.x) / 1.1 + ((q.y - 0.45) * (q.y - 0.45)) / 1.4;
                const double shade = 1.0 - 0.18 * std::min(r2, 1.5);
                for (int c = 0; c < 3; ++c) {
                    double v = skin[c] * shade;
                    const double gray = (skin[0] + skin[1] + skin[2]) / 3.0 * shade;
                    v = v * (1 - desaturate) + gray * desaturate;
                    rgb[c] = v + tex;
                }
                rgb[0] += tint_r;
                rgb[2] += tint_b;
                if (attributes.gender > 0.5 && q.y > nose_local.y + 0.2) {
                    for (double& c : rgb) c *= 0.9;
                }
                for (const Point& e : eyes) {
                    const double du = (q.x - e.x) / 0.2, dv = (q.y - e.y) / 0.1;
                    const double er = du * du + dv * dv;
                    if (er <= 1.0) rgb = {0.93, 0.93, 0.90};
                    const double iu = (q.x - e.x) / 0.08, iv = (q.y - e.y) / 0.08;
                    if (iu * iu + iv * iv <= 1.0) rgb = {0.12, 0.1, 0.08};
                    const double bu = (q.x - e.x) / 0.3, bv = (q.y - (e.y - 0.33 + 0.08 * bu * bu)) / 0.05;
                    if (std::abs(bu) <= 1.0 && std::abs(bv) <= 1.0) {
                        for (double& c : rgb) c *= brow_dark;
                    }
                }
                const double nu = (q.x - nose_local.x) / 0.12, nv = (q.y - nose_local.y) / 0.07;
                if (nu * nu + nv * nv <= 1.0) {
                    for (double& c : rgb) c *= 0.78;
                }
                if (inside_polygon(mouth_poly, pix)) rgb = {lip[0] * (0.6 + 0.4 * skin[0]), lip[1], lip[2]};
            }
            for (int c = 0; c < 3; ++c) record.image.at(y, x, c) = std::clamp(rgb[c], 0.0, 1.0);
        }
    }
    record.attributes = attributes;
    record.landmarks68 = points;
    record.landmarks = reduce_landmarks(points, size, size).landmarks;
    record.mask = std::move(mask);
    return record;
}

std::vector<SynthEntry> plan_synthetic_corpus(const SynthCorpusSpec& spec) {
    if (spec.records <= 0 || spec.identities <= 0)
        throw ConfigError("synthetic corpus needs positive record and identity counts");
    const int groups = std::max(1, (spec.identities + 1) / 2);
    std::vector<AttributeVector> group_attributes(groups);
    for (int g = 0; g < groups; ++g) {
        Rng rng(derive_seed(spec.seed, {0xa77ULL, static_cast<std::uint64_t>(g)}));
        const int age_years = 18 + static_cast<int>(rng.below(55));
        group_attributes[g] = {age_years / kAgeDivisor, static_cast<double>(g % 2),
                               static_cast<double>((g / 2 + g) % kSkinToneCategories) / (kSkinToneCategories - 1)};
    }

    static constexpr std::array<Point, kReducedPoints> base = {{
        {0.36, 0.40}, {0.64, 0.40}, {0.50, 0.55}, {0.39, 0.69}, {0.50, 0.665}, {0.61, 0.69}, {0.50, 0.74},
    }};
    std::vector<SynthEntry> entries;
    entries.reserve(spec.records);
    for (int j = 0; j < spec.records; ++j) {
        const int identity = j % spec.identities;
        SynthEntry e;
        e.size = spec.size;
        char buf[64];
        std::snprintf(buf, sizeof buf, "id%03d_%05d", identity, j);
        e.id = buf;
        std::snprintf(buf, sizeof buf, "id%03d", identity);
        e.identity = buf;
        e.identity_seed = derive_seed(spec.seed, {0x1dULL, static_cast<std::uint64_t>(identity)});
        e.pose_seed = derive_seed(spec.seed, {0x905eULL, static_cast<std::uint64_t>(j)});
        e.attributes = group_attributes[identity % groups];

        Rng rng(e.pose_seed);
        const double angle = rng.uniform(-12.0, 12.0) * std::numbers::pi / 180.0;
        const double zoom = rng.uniform(0.92, 1.08);
        const double tx = rng.uniform(-0.035, 0.035), ty = rng.uniform(-0.035, 0.035);
        const double open = rng.uniform(0.0, 0.035), smile = rng.uniform(-0.015, 0.015);
        std::array<Point, kReducedPoints> pts = base;
        pts[LandmarkVector::mouth_bottom].y += open;
        pts[LandmarkVector::mouth_left].y -= smile;
        pts[LandmarkVector::mouth_right].y -= smile;
        const double c = std::cos(angle), s = std::sin(angle);
        for (int i = 0; i < kReducedPoints; ++i) {
            const double dx = (pts[i].x - 0.5) * zoom, dy = (pts[i].y - 0.52) * zoom;
            e.landmarks.set_point(i, {std::clamp(0.5 + c * dx - s * dy + tx, 0.0, 1.0),
                                      std::clamp(0.52 + s * dx + c * dy + ty, 0.0, 1.0)});
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

FaceRecord render_entry(const SynthEntry& entry, int size) {
    FaceRecord r = synth_face(entry.attributes, entry.landmarks, entry.identity_seed, size);
    r.id = entry.id;
    r.identity = entry.identity;
    return r;
}

std::vector<FaceRecord> make_synthetic_corpus(const SynthCorpusSpec& spec) {
    std::vector<FaceRecord> out;
    for (const auto& e : plan_synthetic_corpus(spec)) out.push_back(render_entry(e, spec.size));
    return out;
}

namespace {

std::string utkface_name(const SynthEntry& e) {
    const int age = static_cast<int>(std::lround(e.attributes.age * kAgeDivisor));
    const int race = static_cast<int>(std::lround(e.attributes.skin_tone * (kSkinToneCategories - 1)));
    return std::to_string(age) + "_" + std::to_string(static_cast<int>(e.attributes.gender)) + "_" +
           std::to_string(race) + "_" + e.id;
}

nlohmann::json entry_to_json(const SynthEntry& e, int size) {
    const auto a = e.attributes.values();
    return {{"id", e.id},
            {"identity", e.identity},
            {"identity_seed", e.identity_seed},
            {"landmark_template", e.pose_seed},
            {"attributes", std::vector<double>(a.begin(), a.end())},
            {"landmarks", std::vector<double>(e.landmarks.values.begin(), e.landmarks.values.end())},
            {"image", "images/" + utkface_name(e) + ".png"},
            {"size", size}};
}

SynthEntry entry_from_json(const nlohmann::json& j) {
    SynthEntry e;
    e.id = j.at("id").get<std::string>();
    e.identity = j.at("identity").get<std::string>();
    e.identity_seed = j.at("identity_seed").get<std::uint64_t>();
    e.pose_seed = j.at("landmark_template").get<std::uint64_t>();
    e.attributes = AttributeVector::from_values(j.at("attributes").get<std::vector<double>>());
    e.landmarks = LandmarkVector::from_values(j.at("landmarks").get<std::vector<double>>());
    e.size = j.value("size", kModelImageSize);
    return e;
}

}  // namespace

void write_synthetic_corpus(const std::filesystem::path& dir, const SynthCorpusSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    std::ofstream manifest(dir / "manifest.jsonl");
    if (!manifest) throw IoError("cannot write manifest in '" + dir.string() + "'");
    for (const auto& e : plan_synthetic_corpus(spec)) {
        const FaceRecord r = render_entry(e, spec.size);
        const std::string name = utkface_name(e);
        write_png(dir / "images" / (name + ".png"), r.image);
        write_landmarks68(dir / "images" / (name + ".txt"), *r.landmarks68);
        write_mask_png(dir / "masks" / (e.id + ".png"), *r.mask);
        manifest << entry_to_json(e, spec.size).dump() << '\n';
    }
}

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "utkface") return CorpusFormat::utkface;
    if (name == "synthetic-manifest" || name == "synthetic") return CorpusFormat::synthetic_manifest;
    throw ArgumentError("unknown corpus format '" + std::string(name) + "'");
}

CorpusReader::CorpusReader(const std::filesystem::path& path, CorpusFormat format) : format_(format) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw CorpusError("corpus path '" + path.string() + "' does not exist");
    if (format == CorpusFormat::utkface) {
        const fs::path dir = fs::is_directory(path / "images") ? path / "images" : path;
        for (const auto& de : fs::directory_iterator(dir)) {
            if (!de.is_regular_file()) continue;
            const auto ext = de.path().extension().string();
            if (ext == ".txt" || ext == ".json" || ext == ".jsonl") continue;
            entries_.push_back(de.path());
        }
        std::sort(entries_.begin(), entries_.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    } else {
        const fs::path file = fs::is_directory(path) ? path / "manifest.jsonl" : path;
        std::ifstream in(file);
        if (!in) throw CorpusError("cannot open manifest '" + file.string() + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                synth_.push_back(entry_from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& ex) {
                ++skipped_;
                log::warn("skipping manifest line: " + std::string(ex.what()));
            }
        }
        std::sort(synth_.begin(), synth_.end(), [](const SynthEntry& a, const SynthEntry& b) { return a.id < b.id; });
    }
    if (entries_.empty() && synth_.empty()) throw CorpusError("corpus '" + path.string() + "' is empty");
}

std::optional<FaceRecord> CorpusReader::next() {
    if (format_ == CorpusFormat::synthetic_manifest) {
        if (cursor_ >= synth_.size()) return std::nullopt;
        const SynthEntry& e = synth_[cursor_++];
        return render_entry(e, e.size);
    }
    while (cursor_ < entries_.size()) {
        const auto& image_path = entries_[cursor_++];
        try {
            auto sidecar = image_path;
            sidecar.replace_extension(".txt");
            FaceRecord r = parse_annotation(image_path.filename().string(), sidecar);
            complete_record(r, read_png(image_path));
            return r;
        } catch (const Error& ex) {
            ++skipped_;
            log::warn("skipping '" + image_path.filename().string() + "': " + ex.what());
        }
    }
    return std::nullopt;
}

std::vector<FaceRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    CorpusReader reader(path, format);
    std::vector<FaceRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    if (reader.skipped() > 0)
        log::warn("corpus '" + path.string() + "': skipped " + std::to_string(reader.skipped()) + " unreadable entries");
    if (out.empty()) throw CorpusError("no readable records in '" + path.string() + "'");
    return out;
}

}  // namespace dataset
}  // namespace upgan
