// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadgen/camgeom.hpp"
#include "roadgen/composite.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"
#include "roadgen/pipeline.hpp"

// Synthetic roadside scenes for tests, demos and the desk-scale pipeline run:
// a textured ground plane seen by differently mounted cameras, with cuboid
// objects rendered as filled silhouettes.

namespace roadgen::fixture {

namespace fs = std::filesystem;

using Rgb = std::array<std::uint8_t, 3>;

struct Scene {
    std::string id;
    CameraRig rig;
    Rgb ground_a;
    Rgb ground_b;
};

/// Three cameras with distinct heights, tilts, headings and focal lengths.
inline std::vector<Scene> desk_scenes(int width = 384, int height = 216) {
    const double s = width / 384.0;
    const auto k = [&](double f) { return Intrinsics{f * s, f * s, width / 2.0, height / 2.0, 0.0}; };
    return {
        {"s0", make_rig(k(260.0), 0.0, deg_to_rad(10.0), 0.0, {0.0, 0.0, 5.0}, width, height), {90, 90, 96}, {120, 118, 110}},
        {"s1", make_rig(k(300.0), deg_to_rad(6.0), deg_to_rad(13.0), deg_to_rad(1.0), {0.0, 0.0, 6.2}, width, height),
         {70, 96, 70}, {104, 128, 96}},
        {"s2", make_rig(k(230.0), deg_to_rad(-5.0), deg_to_rad(8.0), 0.0, {0.0, 0.0, 7.0}, width, height),
         {110, 84, 70}, {140, 120, 100}},
    };
}

namespace detail {

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    if (pts.size() < 3)
        return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace detail

/// Pixels covered by the cuboid's silhouette (convex hull of its projected corners).
/// Empty when any corner is behind the camera.
inline Mask silhouette(const Box3D& box, const CameraRig& rig) {
    Mask m(rig.width(), rig.height());
    std::vector<Vec2> pts;
    for (const Vec3& c : box.corners()) {
        if (!(rig.extrinsics().apply(c).z() > kMinDepth))
            return m;
        pts.push_back(project(rig, c).pixel);
    }
    const auto hull = detail::convex_hull(pts);
    double u0 = rig.width(), v0 = rig.height(), u1 = -1.0, v1 = -1.0;
    for (const auto& p : hull) {
        u0 = std::min(u0, p.x());
        v0 = std::min(v0, p.y());
        u1 = std::max(u1, p.x());
        v1 = std::max(v1, p.y());
    }
    const int x0 = std::max(0, static_cast<int>(std::ceil(u0))), x1 = std::min(rig.width() - 1, static_cast<int>(std::floor(u1)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(v0))), y1 = std::min(rig.height() - 1, static_cast<int>(std::floor(v1)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const Vec2 p(x, y);
            bool inside = true;
            for (std::size_t i = 0; i < hull.size() && inside; ++i)
                inside = detail::cross(hull[i], hull[(i + 1) % hull.size()], p) >= 0.0;
            if (inside)
                m.at(x, y) = 1;
        }
    return m;
}

inline Image render_ground(const Scene& scene) {
    const CameraRig& rig = scene.rig;
    Image img(rig.width(), rig.height(), 3);
    const Rgb sky{150, 180, 215};
    for (int y = 0; y < rig.height(); ++y)
        for (int x = 0; x < rig.width(); ++x) {
            Rgb color = sky;
            try {
                const Vec3 g = ray_ground_intersect(rig, {x, y}, 0.0);
                if (g.y() < 400.0) {
                    const bool lane = std::abs(std::fmod(std::abs(g.x()), 3.5) - 1.75) < 0.08;
                    const bool checker = (static_cast<long>(std::floor(g.x() / 2.0)) + static_cast<long>(std::floor(g.y() / 2.0))) % 2 == 0;
                    color = lane ? Rgb{230, 230, 230} : (checker ? scene.ground_a : scene.ground_b);
                }
            } catch (const NoIntersection&) {
            }
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[static_cast<std::size_t>(c)];
        }
    return img;
}

inline Rgb instance_color(const Box3D& box, std::size_t index) {
    const std::uint8_t shade = static_cast<std::uint8_t>(40 + (index * 37) % 120);
    switch (box.category) {
        case Category::pedestrian: return {220, shade, 40};
        case Category::cyclist: return {shade, 40, 220};
        default: return {200, 30, static_cast<std::uint8_t>(shade / 2)};
    }
}

/// Paints boxes far-to-near over `img`.
inline void render_boxes(Image& img, const CameraRig& rig, std::span<const Box3D> boxes) {
    std::vector<std::size_t> order(boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const Vec3 eye = rig.camera_center();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (boxes[a].center() - eye).norm() > (boxes[b].center() - eye).norm();
    });
    for (std::size_t i : order) {
        const Mask m = silhouette(boxes[i], rig);
        const Rgb color = instance_color(boxes[i], i);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (m.at(x, y))
                    for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[static_cast<std::size_t>(c)];
    }
}

/// Single-channel map holding (index + 1) of the visible box per pixel, 0 elsewhere.
inline Image render_instance_ids(const CameraRig& rig, std::span<const Box3D> boxes) {
    Image ids(rig.width(), rig.height(), 1);
    std::vector<std::size_t> order(boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const Vec3 eye = rig.camera_center();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (boxes[a].center() - eye).norm() > (boxes[b].center() - eye).norm();
    });
    for (std::size_t i : order) {
        const Mask m = silhouette(boxes[i], rig);
        for (std::size_t p = 0; p < m.bits.size(); ++p)
            if (m.bits[p])
                ids.data[p] = static_cast<std::uint8_t>(i + 1);
    }
    return ids;
}

inline Image render_frame(const Scene& scene, std::span<const Box3D> boxes) {
    Image img = render_ground(scene);
    render_boxes(img, scene.rig, boxes);
    return img;
}

/// Non-overlapping road users in front of the camera, at least `min_gap` apart.
inline std::vector<Box3D> random_boxes(std::mt19937_64& rng, std::size_t count, double y_min = 12.0,
                                       double y_max = 40.0, double x_extent = 8.0, double min_gap = 1.0) {
    const auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) / 9007199254740992.0;
    };
    std::vector<Box3D> boxes;
    for (std::size_t attempt = 0; boxes.size() < count && attempt < 200 * count; ++attempt) {
        const double r = uniform(0.0, 1.0);
        Box3D b;
        if (r < 0.6) {
            b = {0, 0, 0, 1.5, 1.8, 4.5, 0, 1.0, Category::car};
        } else if (r < 0.8) {
            b = {0, 0, 0, 1.7, 0.6, 0.6, 0, 1.0, Category::pedestrian};
        } else {
            b = {0, 0, 0, 1.7, 0.6, 1.8, 0, 1.0, Category::cyclist};
        }
        b.x = uniform(-x_extent, x_extent);
        b.y = uniform(y_min, y_max);
        b.z = b.h / 2.0;
        b.yaw = normalize_yaw(uniform(-std::numbers::pi, std::numbers::pi));
        const double radius = std::hypot(b.l, b.w) / 2.0;
        const bool clear = std::none_of(boxes.begin(), boxes.end(), [&](const Box3D& o) {
            return std::hypot(o.x - b.x, o.y - b.y) < radius + std::hypot(o.l, o.w) / 2.0 + min_gap;
        });
        if (clear)
            boxes.push_back(b);
    }
    return boxes;
}

struct DeskOptions {
    int width = 384;
    int height = 216;
    int labeled_per_scene = 6;
    int unlabeled_per_scene = 10;
    int validation_per_scene = 3;
    std::size_t background_stack = kRecommendedBackgroundStack;
    std::size_t objects_per_frame = 5;
    std::uint64_t seed = 7;
};

struct DeskFixture {
    fs::path root;
    fs::path manifest;
    fs::path ground_truth_dir;
    std::vector<Scene> scenes;
};

/// Writes a small roadside dataset: per scene labeled, unlabeled and validation
/// frames, plus one empty background extracted from a stack with transient objects.
/// Ground truth for every frame goes to `ground_truth/<frame_id>.txt`.
inline DeskFixture write_desk_fixture(const fs::path& root, const DeskOptions& opts = {}) {
    DeskFixture fx{root, root / "manifest.jsonl", root / "ground_truth", desk_scenes(opts.width, opts.height)};
    for (const char* sub : {"images", "calib", "ground_truth"}) fs::create_directories(root / sub);
    std::mt19937_64 rng(opts.seed);
    DatasetManifest manifest;
    for (const Scene& scene : fx.scenes) {
        const std::string calib = "calib/" + scene.id + ".json";
        save_calibration(root / calib, scene.rig);

        const auto add_frame = [&](const std::string& id, Split split) {
            const auto boxes = random_boxes(rng, opts.objects_per_frame);
            const LabelSet truth = in_image_filter(LabelSet{id, boxes, Provenance::manual}, scene.rig);
            write_image(root / ("images/" + id + ".ppm"), render_frame(scene, boxes));
            write_labels(root / ("ground_truth/" + id + ".txt"), truth);
            ManifestEntry e{id, "images/" + id + ".ppm", calib, std::nullopt, split, scene.id, 0};
            if (split == Split::labeled)
                e.label = "ground_truth/" + id + ".txt";
            manifest.entries.push_back(std::move(e));
        };
        for (int i = 0; i < opts.labeled_per_scene; ++i) add_frame(scene.id + "_lab" + std::to_string(i), Split::labeled);
        for (int i = 0; i < opts.unlabeled_per_scene; ++i)
            add_frame(scene.id + "_unl" + std::to_string(i), Split::unlabeled);
        for (int i = 0; i < opts.validation_per_scene; ++i)
            add_frame(scene.id + "_val" + std::to_string(i), Split::validation);

        // Transients: each stack frame carries one object at a fresh random spot.
        std::vector<Image> stack;
        for (std::size_t i = 0; i < opts.background_stack; ++i) {
            const auto boxes = random_boxes(rng, 1);
            stack.push_back(render_frame(scene, boxes));
        }
        const std::string bg_id = scene.id + "_bg";
        write_image(root / ("images/" + bg_id + ".ppm"), extract_background(stack));
        manifest.entries.push_back({bg_id, "images/" + bg_id + ".ppm", calib, std::nullopt, Split::background, scene.id, 0});
    }
    write_manifest(fx.manifest, manifest);
    return fx;
}

}  // namespace roadgen::fixture
