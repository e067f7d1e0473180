// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations for the tests. Each one is written from scratch with plain
// loops and arrays, without calling the library routine it checks.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "roadgen/roadgen.hpp"

namespace oracle {

using Mat34 = std::array<std::array<double, 4>, 3>;

/// P = K [R | t] built element by element.
inline Mat34 projection_matrix(const roadgen::CameraRig& rig) {
    const auto& k = rig.intrinsics();
    const double kk[3][3] = {{k.fx, k.skew, k.cx}, {0.0, k.fy, k.cy}, {0.0, 0.0, 1.0}};
    const auto& r = rig.extrinsics().rotation();
    const auto& t = rig.extrinsics().translation();
    Mat34 p{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int m = 0; m < 3; ++m) s += kk[i][m] * (j < 3 ? r(m, j) : t(m));
            p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
        }
    return p;
}

struct Pixel {
    double u, v, w;
};

inline Pixel project(const roadgen::CameraRig& rig, double x, double y, double z) {
    const Mat34 p = projection_matrix(rig);
    double h[3];
    for (std::size_t i = 0; i < 3; ++i) h[i] = p[i][0] * x + p[i][1] * y + p[i][2] * z + p[i][3];
    return {h[0] / h[2], h[1] / h[2], h[2]};
}

/// Ground point (X, Y, height) seen at (u, v): two linear equations in X and Y from
/// (P_row0 - u P_row2) . X = 0 and (P_row1 - v P_row2) . X = 0, solved by Cramer's rule.
inline std::optional<std::array<double, 3>> ray_plane(const roadgen::CameraRig& rig, double u, double v, double height) {
    const Mat34 p = projection_matrix(rig);
    double a[2][3];
    for (int c = 0; c < 4; ++c) {
        const double r0 = p[0][static_cast<std::size_t>(c)] - u * p[2][static_cast<std::size_t>(c)];
        const double r1 = p[1][static_cast<std::size_t>(c)] - v * p[2][static_cast<std::size_t>(c)];
        if (c < 2) {
            a[0][c] = r0;
            a[1][c] = r1;
        } else if (c == 2) {
            a[0][2] = -r0 * height;
            a[1][2] = -r1 * height;
        } else {
            a[0][2] -= r0;
            a[1][2] -= r1;
        }
    }
    const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if (std::abs(det) < 1e-15)
        return std::nullopt;
    const double x = (a[0][2] * a[1][1] - a[0][1] * a[1][2]) / det;
    const double y = (a[0][0] * a[1][2] - a[0][2] * a[1][0]) / det;
    // the point must be in front of the camera
    if (!(project(rig, x, y, height).w > 0.0))
        return std::nullopt;
    return std::array<double, 3>{x, y, height};
}

/// Footprint IoU by sampling a 1 mm (default) lattice.
inline double raster_iou(const roadgen::Box3D& a, const roadgen::Box3D& b, double step = 1e-3) {
    const auto inside = [](const roadgen::Box3D& bx, double px, double py) {
        const double dx = px - bx.x, dy = py - bx.y;
        const double c = std::cos(bx.yaw), s = std::sin(bx.yaw);
        return std::abs(dx * c + dy * s) <= bx.l / 2.0 && std::abs(-dx * s + dy * c) <= bx.w / 2.0;
    };
    const double ra = std::hypot(a.l, a.w) / 2.0, rb = std::hypot(b.l, b.w) / 2.0;
    const double x0 = std::min(a.x - ra, b.x - rb), x1 = std::max(a.x + ra, b.x + rb);
    const double y0 = std::min(a.y - ra, b.y - rb), y1 = std::max(a.y + ra, b.y + rb);
    long inter = 0, uni = 0;
    for (double y = y0 + step / 2; y < y1; y += step)
        for (double x = x0 + step / 2; x < x1; x += step) {
            const bool ia = inside(a, x, y), ib = inside(b, x, y);
            inter += ia && ib;
            uni += ia || ib;
        }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Eight corners from the box parameters; bottom face first.
inline std::array<std::array<double, 3>, 8> corners(const roadgen::Box3D& b) {
    std::array<std::array<double, 3>, 8> out{};
    const double sl[4] = {1, -1, -1, 1}, sw[4] = {1, 1, -1, -1};
    for (int k = 0; k < 8; ++k) {
        const double lx = sl[k % 4] * b.l / 2.0, wy = sw[k % 4] * b.w / 2.0;
        out[static_cast<std::size_t>(k)] = {b.x + lx * std::cos(b.yaw) - wy * std::sin(b.yaw),
                                            b.y + lx * std::sin(b.yaw) + wy * std::cos(b.yaw),
                                            b.z + (k < 4 ? -b.h / 2.0 : b.h / 2.0)};
    }
    return out;
}

struct Rect {
    double u0, v0, u1, v1;
};

/// Hull of the projected corners in front of the camera, clipped to the image.
inline std::optional<Rect> box_2d(const roadgen::Box3D& b, const roadgen::CameraRig& rig) {
    Rect r{1e300, 1e300, -1e300, -1e300};
    for (const auto& c : corners(b)) {
        const Pixel p = project(rig, c[0], c[1], c[2]);
        if (!(p.w > 1e-9))
            continue;
        r.u0 = std::min(r.u0, p.u);
        r.v0 = std::min(r.v0, p.v);
        r.u1 = std::max(r.u1, p.u);
        r.v1 = std::max(r.v1, p.v);
    }
    r.u0 = std::clamp(r.u0, 0.0, double(rig.width()));
    r.u1 = std::clamp(r.u1, 0.0, double(rig.width()));
    r.v0 = std::clamp(r.v0, 0.0, double(rig.height()));
    r.v1 = std::clamp(r.v1, 0.0, double(rig.height()));
    if (!(r.u1 > r.u0 && r.v1 > r.v0))
        return std::nullopt;
    return r;
}

inline bool visible(const roadgen::Box3D& b, const roadgen::CameraRig& rig) {
    if (!box_2d(b, rig))
        return false;
    const Pixel c = project(rig, b.x, b.y, b.z);
    return c.w > 0.0 && c.u >= 0.0 && c.u < rig.width() && c.v >= 0.0 && c.v < rig.height();
}

inline double rect_iou(const Rect& a, const Rect& b) {
    const double iw = std::max(0.0, std::min(a.u1, b.u1) - std::max(a.u0, b.u0));
    const double ih = std::max(0.0, std::min(a.v1, b.v1) - std::max(a.v0, b.v0));
    const double inter = iw * ih;
    const double uni = (a.u1 - a.u0) * (a.v1 - a.v0) + (b.u1 - b.u0) * (b.v1 - b.v0) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Brute-force survivors of the strict confidence filter, as indices.
inline std::vector<std::size_t> conf_survivors(const std::vector<double>& confs, double t) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < confs.size(); ++i)
        if (confs[i] > t)
            out.push_back(i);
    return out;
}

/// Pairwise check: index i survives iff no other box reaches t against it.
inline std::vector<std::size_t> iou_survivors(const std::vector<roadgen::Box3D>& boxes, double t,
                                              double (*iou)(const roadgen::Box3D&, const roadgen::Box3D&)) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < boxes.size(); ++j)
            if (i != j && iou(boxes[i], boxes[j]) >= t)
                ok = false;
        if (ok)
            out.push_back(i);
    }
    return out;
}

/// Lower median per sample via a full sort.
inline roadgen::Image median(const std::vector<roadgen::Image>& frames) {
    roadgen::Image out = frames.front();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        std::vector<int> v;
        for (const auto& f : frames) v.push_back(f.data[i]);
        std::sort(v.begin(), v.end());
        out.data[i] = static_cast<std::uint8_t>(v[(v.size() - 1) / 2]);
    }
    return out;
}

/// 3x3 zero-padded convolution over [seg, ctx] with explicit padded buffers.
inline std::vector<double> conv3x3(const roadgen::Tensor3& seg, const roadgen::Tensor3& ctx,
                                   const roadgen::AttentionParams& p) {
    const int rows = ctx.rows, cols = ctx.cols, cin = seg.channels + ctx.channels, cout = p.out_channels();
    std::vector<double> padded(static_cast<std::size_t>(cin) * (rows + 2) * (cols + 2), 0.0);
    const auto pidx = [&](int c, int i, int j) { return (static_cast<std::size_t>(c) * (rows + 2) + i) * (cols + 2) + j; };
    for (int c = 0; c < cin; ++c)
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                padded[pidx(c, i + 1, j + 1)] = c < seg.channels ? seg.at(c, i, j) : ctx.at(c - seg.channels, i, j);
    std::vector<double> out(static_cast<std::size_t>(cout) * rows * cols);
    for (int o = 0; o < cout; ++o)
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                double acc = p.conv_bias[static_cast<std::size_t>(o)];
                for (int c = 0; c < cin; ++c)
                    for (int dy = 0; dy < 3; ++dy)
                        for (int dx = 0; dx < 3; ++dx)
                            acc += p.conv_weights[((static_cast<std::size_t>(o) * cin + c) * 3 + dy) * 3 + dx] *
                                   padded[pidx(c, i + dy, j + dx)];
                out[(static_cast<std::size_t>(o) * rows + i) * cols + j] = acc;
            }
    return out;
}

/// mean per channel, matrix-vector product, logistic, scale; flat c-major input.
inline std::vector<double> attention(const std::vector<double>& x, int channels, int rows, int cols,
                                     const Eigen::MatrixXd& phi) {
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    std::vector<double> mean(static_cast<std::size_t>(channels), 0.0);
    for (int c = 0; c < channels; ++c) {
        for (std::size_t q = 0; q < plane; ++q) mean[static_cast<std::size_t>(c)] += x[c * plane + q];
        mean[static_cast<std::size_t>(c)] /= static_cast<double>(plane);
    }
    std::vector<double> out(x.size());
    for (int c = 0; c < channels; ++c) {
        double logit = 0.0;
        for (int d = 0; d < channels; ++d) logit += phi(c, d) * mean[static_cast<std::size_t>(d)];
        const double s = 1.0 / (1.0 + std::exp(-logit));
        for (std::size_t q = 0; q < plane; ++q) out[c * plane + q] = x[c * plane + q] * s;
    }
    return out;
}

struct LiftedPoint {
    std::array<double, 3> p;
    std::vector<double> feature;
};

/// Per-(pixel, bin) lifting with the ray-plane oracle.
inline std::vector<LiftedPoint> lift(const roadgen::Tensor3& f, int stride, const roadgen::Tensor3& probs,
                                     const std::vector<double>& edges, const roadgen::CameraRig& rig) {
    std::vector<LiftedPoint> out;
    for (int i = 0; i < f.rows; ++i)
        for (int j = 0; j < f.cols; ++j)
            for (int k = 0; k < probs.channels; ++k) {
                const double pr = probs.at(k, i, j);
                if (!(pr > 0.0))
                    continue;
                const double hc = (edges[static_cast<std::size_t>(k)] + edges[static_cast<std::size_t>(k) + 1]) / 2.0;
                const auto g = ray_plane(rig, (j + 0.5) * stride, (i + 0.5) * stride, hc);
                if (!g)
                    continue;
                LiftedPoint lp{*g, {}};
                for (int c = 0; c < f.channels; ++c) lp.feature.push_back(pr * f.at(c, i, j));
                out.push_back(std::move(lp));
            }
    return out;
}

/// Sparse accumulation keyed by cell; cells outside the grid are skipped.
inline std::map<std::pair<int, int>, std::vector<double>> accumulate(const std::vector<LiftedPoint>& pts,
                                                                     const roadgen::GridConfig& g, int channels) {
    std::map<std::pair<int, int>, std::vector<double>> cells;
    const int nx = static_cast<int>(std::lround((g.x_max - g.x_min) / g.dx));
    const int ny = static_cast<int>(std::lround((g.y_max - g.y_min) / g.dy));
    for (const auto& lp : pts) {
        const int ix = static_cast<int>(std::floor((lp.p[0] - g.x_min) / g.dx));
        const int iy = static_cast<int>(std::floor((lp.p[1] - g.y_min) / g.dy));
        if (ix < 0 || iy < 0 || ix >= nx || iy >= ny)
            continue;
        auto& acc = cells[{ix, iy}];
        acc.resize(static_cast<std::size_t>(channels), 0.0);
        for (int c = 0; c < channels; ++c) acc[static_cast<std::size_t>(c)] += lp.feature[static_cast<std::size_t>(c)];
    }
    return cells;
}

/// Painter's algorithm for compositing: farthest first, greedy footprint gate,
/// instance cap, then per-pixel overwrite where mask and validity are both set.
struct PaintResult {
    roadgen::Image image;
    std::vector<roadgen::Box3D> labels;
};

inline PaintResult paint(const roadgen::BackgroundFrame& bg, const std::vector<roadgen::CompositeSource>& sources,
                         double t_iou, std::size_t cap, double max_invalid) {
    struct Item {
        double dist;
        std::size_t order;
        const roadgen::CompositeSource* src;
        std::size_t k;
    };
    const auto eye = bg.rig.camera_center();
    std::vector<Item> items;
    for (const auto& s : sources)
        for (std::size_t k = 0; k < s.frame.labels.boxes.size(); ++k) {
            const auto& b = s.frame.labels.boxes[k];
            const double d = std::sqrt((b.x - eye.x()) * (b.x - eye.x()) + (b.y - eye.y()) * (b.y - eye.y()) +
                                       (b.z - eye.z()) * (b.z - eye.z()));
            items.push_back({d, items.size(), &s, k});
        }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return a.dist != b.dist ? a.dist > b.dist : a.order < b.order;
    });
    PaintResult out{bg.image, {}};
    std::vector<const Item*> kept;
    for (const auto& it : items) {
        const auto& m = it.src->masks[it.k].bits;
        std::size_t area = 0, bad = 0;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(x, y)) {
                    ++area;
                    bad += it.src->frame.validity.at(x, y) == 0 ? 1 : 0;
                }
        if (area == 0 || static_cast<double>(bad) > max_invalid * static_cast<double>(area))
            continue;
        const auto& box = it.src->frame.labels.boxes[it.k];
        bool clash = false;
        for (const Item* o : kept) {
            const auto& other = o->src->frame.labels.boxes[o->k];
            const double reach = (std::hypot(other.l, other.w) + std::hypot(box.l, box.w)) / 2.0;
            if (std::hypot(other.x - box.x, other.y - box.y) < reach)
                clash = clash || raster_iou(other, box, 1e-2) >= t_iou;
        }
        if (clash || kept.size() >= cap)
            continue;
        kept.push_back(&it);
    }
    for (const Item* it : kept) {
        const auto& m = it->src->masks[it->k].bits;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(x, y) && it->src->frame.validity.at(x, y))
                    for (int c = 0; c < out.image.channels; ++c) out.image.at(x, y, c) = it->src->frame.image.at(x, y, c);
        out.labels.push_back(it->src->frame.labels.boxes[it->k]);
    }
    return out;
}

/// Number of composites a round yields for one scene: every nonempty frame, in batches.
inline std::size_t plan_count(std::size_t nonempty_frames, std::size_t batch) {
    return (nonempty_frames + batch - 1) / batch;
}

}  // namespace oracle
