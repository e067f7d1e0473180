// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "roadgen/bsmbev.hpp"
#include "roadgen/camgeom.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"

namespace roadgen {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kGreen{0, 170, 0};
inline constexpr Rgb kRed{220, 0, 0};
inline constexpr Rgb kGridGray{225, 225, 225};
inline constexpr Rgb kAxisGray{110, 110, 110};
inline constexpr Rgb kCameraBlue{30, 60, 220};

inline constexpr double kMatchIou = 0.5;

struct PlotOptions {
    GridConfig extent;
    double pixels_per_meter = 5.0;
    double grid_spacing = 10.0;
    double match_iou = kMatchIou;
};

inline void put_pixel(Image& img, int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height)
        return;
    for (int k = 0; k < img.channels; ++k) img.at(x, y, k) = c[static_cast<std::size_t>(k)];
}

// Bresenham, clipped per pixel.
inline void draw_line(Image& img, int x0, int y0, int x1, int y1, const Rgb& c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        put_pixel(img, x0, y0, c);
        if (x0 == x1 && y0 == y1)
            break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

inline void draw_line(Image& img, const Vec2& a, const Vec2& b, const Rgb& c) {
    constexpr double kLimit = 1e6;
    if (!a.allFinite() || !b.allFinite() || a.cwiseAbs().maxCoeff() > kLimit || b.cwiseAbs().maxCoeff() > kLimit)
        return;
    draw_line(img, static_cast<int>(std::lround(a.x())), static_cast<int>(std::lround(a.y())),
              static_cast<int>(std::lround(b.x())), static_cast<int>(std::lround(b.y())), c);
}

/// Maps ego (x, y) to plot pixels; y forward points up the page.
struct PlotFrame {
    PlotOptions opts;

    int width() const { return static_cast<int>(std::lround((opts.extent.x_max - opts.extent.x_min) * opts.pixels_per_meter)); }
    int height() const { return static_cast<int>(std::lround((opts.extent.y_max - opts.extent.y_min) * opts.pixels_per_meter)); }
    Vec2 to_pixel(double x, double y) const {
        return {(x - opts.extent.x_min) * opts.pixels_per_meter, (opts.extent.y_max - y) * opts.pixels_per_meter};
    }
};

/// Per-prediction match flags: greedy by descending confidence, one ground-truth box each.
inline std::vector<bool> match_predictions(const LabelSet& pred, const LabelSet& gt, double min_iou) {
    std::vector<std::size_t> order(pred.boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pred.boxes[a].conf > pred.boxes[b].conf; });
    std::vector<bool> matched(pred.boxes.size(), false), used(gt.boxes.size(), false);
    for (std::size_t i : order) {
        double best = min_iou;
        std::optional<std::size_t> pick;
        for (std::size_t g = 0; g < gt.boxes.size(); ++g) {
            if (used[g])
                continue;
            const double iou = bev_iou(pred.boxes[i], gt.boxes[g]);
            if (iou >= best) {
                best = iou;
                pick = g;
            }
        }
        if (pick) {
            used[*pick] = true;
            matched[i] = true;
        }
    }
    return matched;
}

inline void draw_footprint(Image& img, const PlotFrame& frame, const Box3D& box, const Rgb& c) {
    const auto fp = box.footprint();
    std::array<Vec2, 4> px;
    for (std::size_t k = 0; k < 4; ++k) px[k] = frame.to_pixel(fp[k].x(), fp[k].y());
    for (std::size_t k = 0; k < 4; ++k) draw_line(img, px[k], px[(k + 1) % 4], c);
    // heading tick from center to the front edge
    const Vec2 front = 0.5 * (fp[0] + fp[3]);
    draw_line(img, frame.to_pixel(box.x, box.y), frame.to_pixel(front.x(), front.y()), c);
}

/// Top-down plot: grid, axes, camera marker, then boxes. Without ground truth every
/// prediction is green; with it, ground truth is black and predictions are green when
/// matched, red otherwise.
inline Image plot_bev(const LabelSet& predictions, const CameraRig& rig, const std::optional<LabelSet>& ground_truth,
                      const PlotOptions& opts = {}) {
    (void)opts.extent.nx();
    (void)opts.extent.ny();
    if (!(opts.pixels_per_meter > 0.0) || !(opts.grid_spacing > 0.0))
        throw InvalidArgument("plot: scale and grid spacing must be positive");
    const PlotFrame frame{opts};
    Image img(frame.width(), frame.height(), 3, 255);
    const auto& e = opts.extent;

    const auto first_line = [&](double lo) { return std::ceil(lo / opts.grid_spacing - 1e-9) * opts.grid_spacing; };
    for (double x = first_line(e.x_min); x <= e.x_max + 1e-9; x += opts.grid_spacing)
        draw_line(img, frame.to_pixel(x, e.y_min), frame.to_pixel(x, e.y_max), kGridGray);
    for (double y = first_line(e.y_min); y <= e.y_max + 1e-9; y += opts.grid_spacing)
        draw_line(img, frame.to_pixel(e.x_min, y), frame.to_pixel(e.x_max, y), kGridGray);
    if (e.x_min <= 0.0 && e.x_max >= 0.0)
        draw_line(img, frame.to_pixel(0.0, e.y_min), frame.to_pixel(0.0, e.y_max), kAxisGray);
    if (e.y_min <= 0.0 && e.y_max >= 0.0)
        draw_line(img, frame.to_pixel(e.x_min, 0.0), frame.to_pixel(e.x_max, 0.0), kAxisGray);
    draw_line(img, Vec2(0.0, img.height - 1.0), Vec2(img.width - 1.0, img.height - 1.0), kAxisGray);
    draw_line(img, Vec2(0.0, 0.0), Vec2(0.0, img.height - 1.0), kAxisGray);

    const Vec3 c = rig.camera_center();
    const Vec2 cam = frame.to_pixel(c.x(), c.y());
    for (int d = -3; d <= 3; ++d) {
        draw_line(img, cam + Vec2(-3.0, d), cam + Vec2(3.0, d), kCameraBlue);
    }
    const Vec3 fwd = rig.extrinsics().rotation().row(2).transpose();
    const Vec2 dir(fwd.x(), fwd.y());
    if (dir.norm() > 1e-9) {
        const Vec2 tip = frame.to_pixel(c.x() + 5.0 * dir.normalized().x(), c.y() + 5.0 * dir.normalized().y());
        draw_line(img, cam, tip, kCameraBlue);
    }

    if (ground_truth) {
        for (const auto& b : ground_truth->boxes) draw_footprint(img, frame, b, kBlack);
        const auto matched = match_predictions(predictions, *ground_truth, opts.match_iou);
        for (std::size_t i = 0; i < predictions.boxes.size(); ++i)
            draw_footprint(img, frame, predictions.boxes[i], matched[i] ? kGreen : kRed);
    } else {
        for (const auto& b : predictions.boxes) draw_footprint(img, frame, b, kGreen);
    }
    return img;
}

/// Draws the 12 cuboid edges of each box onto a copy of the image. Boxes with any
/// corner behind the camera are skipped.
inline Image overlay_boxes(const Image& image, const CameraRig& rig, const LabelSet& labels, const Rgb& color) {
    if (image.width != rig.width() || image.height != rig.height())
        throw ShapeMismatch("overlay: image size differs from the rig");
    Image out = image;
    if (out.channels == 1) {
        Image rgb(out.width, out.height, 3);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int k = 0; k < 3; ++k) rgb.at(x, y, k) = out.at(x, y);
        out = std::move(rgb);
    }
    constexpr std::array<std::array<int, 2>, 12> kEdges{{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                                          {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};
    for (const auto& b : labels.boxes) {
        const auto corners = b.corners();
        std::array<Vec2, 8> px;
        bool visible = true;
        for (std::size_t k = 0; k < 8 && visible; ++k) {
            try {
                px[k] = project(rig, corners[k]).pixel;
            } catch (const BehindCamera&) {
                visible = false;
            }
        }
        if (!visible)
            continue;
        for (const auto& [a, z] : kEdges)
            draw_line(out, px[static_cast<std::size_t>(a)], px[static_cast<std::size_t>(z)], color);
    }
    return out;
}

}  // namespace roadgen
