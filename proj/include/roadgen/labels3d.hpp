// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "roadgen/camgeom.hpp"
#include "roadgen/errors.hpp"

namespace roadgen {

enum class Category { car, van, truck, bus, vehicle, big_vehicle, pedestrian, cyclist, motorcyclist, tricyclist };

inline constexpr std::array<std::string_view, 10> kCategoryNames = {
    "car", "van", "truck", "bus", "vehicle", "big_vehicle", "pedestrian", "cyclist", "motorcyclist", "tricyclist"};

inline std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

inline std::optional<Category> parse_category(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == name)
            return static_cast<Category>(i);
    return std::nullopt;
}

/// Wraps an angle into (-pi, pi]. Values already in range are returned unchanged.
inline double normalize_yaw(double a) {
    if (a > -std::numbers::pi && a <= std::numbers::pi)
        return a;
    double r = std::remainder(a, 2.0 * std::numbers::pi);
    if (r <= -std::numbers::pi)
        r += 2.0 * std::numbers::pi;
    if (r > std::numbers::pi)
        r -= 2.0 * std::numbers::pi;
    return r;
}

/// 3D cuboid in the ego frame. (x, y, z) is the geometric center; `l` runs along
/// the heading `yaw` (measured from +x about +z), `w` across it, `h` vertically.
struct Box3D {
    double x = 0.0, y = 0.0, z = 0.0;
    double h = 1.0, w = 1.0, l = 1.0;
    double yaw = 0.0;
    double conf = 1.0;
    Category category = Category::car;

    void validate() const {
        if (!(h > 0.0) || !(w > 0.0) || !(l > 0.0))
            throw InvalidArgument("box: dimensions must be positive");
        if (!(conf >= 0.0 && conf <= 1.0))
            throw InvalidArgument("box: confidence must lie in [0, 1]");
        if (!(yaw > -std::numbers::pi && yaw <= std::numbers::pi))
            throw InvalidArgument("box: yaw must be normalized to (-pi, pi]");
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw InvalidArgument("box: non-finite center");
    }

    Vec3 center() const { return {x, y, z}; }

    /// Ground footprint, counter-clockwise.
    std::array<Vec2, 4> footprint() const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const Vec2 along(c * l / 2.0, s * l / 2.0);
        const Vec2 across(-s * w / 2.0, c * w / 2.0);
        const Vec2 ctr(x, y);
        return {ctr + along + across, ctr - along + across, ctr - along - across, ctr + along - across};
    }

    /// Footprint corners at z - h/2 followed by the same corners at z + h/2.
    std::array<Vec3, 8> corners() const {
        const auto fp = footprint();
        std::array<Vec3, 8> out;
        for (std::size_t i = 0; i < 4; ++i) {
            out[i] = Vec3(fp[i].x(), fp[i].y(), z - h / 2.0);
            out[i + 4] = Vec3(fp[i].x(), fp[i].y(), z + h / 2.0);
        }
        return out;
    }

    bool operator==(const Box3D&) const = default;
};

enum class Provenance { manual, pseudo, synthetic };

struct LabelSet {
    std::string frame_id;
    std::vector<Box3D> boxes;
    Provenance provenance = Provenance::manual;

    void validate() const {
        if (frame_id.empty())
            throw InvalidArgument("label set: empty frame id");
        for (const auto& b : boxes) b.validate();
    }

    std::size_t size() const noexcept { return boxes.size(); }
    bool empty() const noexcept { return boxes.empty(); }
    bool operator==(const LabelSet&) const = default;
};

/// Keeps boxes with conf strictly above `t_conf`.
inline LabelSet filter_by_conf(const LabelSet& labels, double t_conf) {
    LabelSet out{labels.frame_id, {}, Provenance::pseudo};
    for (const auto& b : labels.boxes)
        if (b.conf > t_conf)
            out.boxes.push_back(b);
    return out;
}

// --- rotated-rectangle IoU ----------------------------------------------------

namespace detail {

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
    return 0.5 * std::abs(a);
}

// Sutherland-Hodgman: clip `subject` by the convex, counter-clockwise `clip`.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::array<Vec2, 4>& clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2& a = clip[e];
        const Vec2 edge = clip[(e + 1) % clip.size()] - a;
        const auto side = [&](const Vec2& p) { return cross(edge, p - a); };
        std::vector<Vec2> out;
        out.reserve(subject.size() + 2);
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Vec2& cur = subject[i];
            const Vec2& nxt = subject[(i + 1) % subject.size()];
            const double sc = side(cur), sn = side(nxt);
            if (sc >= 0.0)
                out.push_back(cur);
            if ((sc >= 0.0) != (sn >= 0.0)) {
                const double t = sc / (sc - sn);
                out.push_back(cur + t * (nxt - cur));
            }
        }
        subject = std::move(out);
    }
    return subject;
}

}  // namespace detail

/// Intersection-over-union of the two ground footprints.
inline double bev_iou(const Box3D& a, const Box3D& b) {
    const auto fa = a.footprint();
    const auto fb = b.footprint();
    if (fa == fb)
        return 1.0;
    const double ra = std::hypot(a.l, a.w) / 2.0, rb = std::hypot(b.l, b.w) / 2.0;
    if (std::hypot(a.x - b.x, a.y - b.y) >= ra + rb)
        return 0.0;
    const double inter = detail::polygon_area(detail::clip_convex({fa.begin(), fa.end()}, fb));
    const double uni = a.l * a.w + b.l * b.w - inter;
    if (!(uni > 0.0))
        return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

/// Keeps boxes whose footprint IoU with every other box is below `t_iou`.
inline LabelSet filter_by_iou(const LabelSet& labels, double t_iou) {
    const std::size_t n = labels.boxes.size();
    std::vector<bool> keep(n, true);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (bev_iou(labels.boxes[i], labels.boxes[j]) >= t_iou)
                keep[i] = keep[j] = false;
    LabelSet out{labels.frame_id, {}, labels.provenance};
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i])
            out.boxes.push_back(labels.boxes[i]);
    return out;
}

// --- image-plane projection ---------------------------------------------------

struct Box2D {
    double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;

    double width() const { return u_max - u_min; }
    double height() const { return v_max - v_min; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    Vec2 center() const { return {(u_min + u_max) / 2.0, (v_min + v_max) / 2.0}; }
    bool operator==(const Box2D&) const = default;
};

/// Axis-aligned hull of the cuboid corners in front of the camera, clipped to the
/// image. Empty when nothing is in front or the clipped hull has zero area.
inline std::optional<Box2D> project_box_2d(const Box3D& box, const CameraRig& rig) {
    bool any = false;
    Box2D hull{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Vec3& c : box.corners()) {
        const Vec3 pc = rig.extrinsics().apply(c);
        if (!(pc.z() > kMinDepth))
            continue;
        const Vec2 px = project(rig, c).pixel;
        hull.u_min = std::min(hull.u_min, px.x());
        hull.v_min = std::min(hull.v_min, px.y());
        hull.u_max = std::max(hull.u_max, px.x());
        hull.v_max = std::max(hull.v_max, px.y());
        any = true;
    }
    if (!any)
        return std::nullopt;
    hull.u_min = std::clamp(hull.u_min, 0.0, static_cast<double>(rig.width()));
    hull.u_max = std::clamp(hull.u_max, 0.0, static_cast<double>(rig.width()));
    hull.v_min = std::clamp(hull.v_min, 0.0, static_cast<double>(rig.height()));
    hull.v_max = std::clamp(hull.v_max, 0.0, static_cast<double>(rig.height()));
    if (!(hull.width() > 0.0) || !(hull.height() > 0.0))
        return std::nullopt;
    return hull;
}

/// True when the box projects to a non-empty 2D box and its 3D center lands inside the image.
inline bool is_in_image(const Box3D& box, const CameraRig& rig) {
    if (!project_box_2d(box, rig))
        return false;
    const Vec3 pc = rig.extrinsics().apply(box.center());
    if (!(pc.z() > kMinDepth))
        return false;
    return rig.contains(project(rig, box.center()).pixel);
}

inline LabelSet in_image_filter(const LabelSet& labels, const CameraRig& rig) {
    LabelSet out{labels.frame_id, {}, labels.provenance};
    for (const auto& b : labels.boxes)
        if (is_in_image(b, rig))
            out.boxes.push_back(b);
    return out;
}

// --- KITTI-style label text ---------------------------------------------------
//
// One box per line:
//   type truncation occlusion alpha x1 y1 x2 y2 h w l x y z rotation_y score
// Image-space columns are not tracked and are written as -1 (alpha as -10).
// The score column is optional on read (defaults to 1).

namespace detail {

inline std::string format_real(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

inline std::string format_labels(const LabelSet& labels) {
    std::string out;
    for (const auto& b : labels.boxes) {
        out += to_string(b.category);
        out += " 0 0 -10 -1 -1 -1 -1";
        for (double v : {b.h, b.w, b.l, b.x, b.y, b.z, b.yaw, b.conf}) {
            out += ' ';
            out += detail::format_real(v);
        }
        out += '\n';
    }
    return out;
}

inline LabelSet parse_labels(std::string_view text, std::string frame_id, Provenance provenance = Provenance::manual) {
    LabelSet labels{std::move(frame_id), {}, provenance};
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);

        struct Token {
            std::string_view text;
            std::size_t column;
        };
        std::vector<Token> tokens;
        for (std::size_t i = 0; i < line.size();) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            if (i >= line.size())
                break;
            const std::size_t start = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
            tokens.push_back({line.substr(start, i - start), start + 1});
        }
        if (tokens.empty())
            continue;
        if (tokens.size() != 15 && tokens.size() != 16)
            throw ParseError("expected 15 or 16 fields, found " + std::to_string(tokens.size()), line_no,
                             tokens.back().column);

        const auto category = parse_category(tokens[0].text);
        if (!category)
            throw ParseError("unknown category '" + std::string(tokens[0].text) + "'", line_no, tokens[0].column);

        std::array<double, 16> v{};
        v[15] = 1.0;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const auto& tok = tokens[i];
            auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v[i]);
            if (ec != std::errc() || ptr != tok.text.data() + tok.text.size() || !std::isfinite(v[i]))
                throw ParseError("malformed number '" + std::string(tok.text) + "'", line_no, tok.column);
        }
        Box3D b{v[11], v[12], v[13], v[8], v[9], v[10], normalize_yaw(v[14]), v[15], *category};
        try {
            b.validate();
        } catch (const InvalidArgument& e) {
            throw ParseError(e.what(), line_no, tokens[1].column);
        }
        labels.boxes.push_back(b);
    }
    return labels;
}

inline LabelSet read_labels(const std::filesystem::path& path, Provenance provenance = Provenance::manual) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open label file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_labels(ss.str(), path.stem().string(), provenance);
}

inline void write_labels(const std::filesystem::path& path, const LabelSet& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write label file " + path.string());
    out << format_labels(labels);
}

}  // namespace roadgen
