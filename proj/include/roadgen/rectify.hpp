// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "roadgen/camgeom.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"

// Rectification moves a source frame into a background camera in two steps:
// a pure-rotation image warp into a camera with the background orientation and
// intrinsics but the source optical center, followed by a vertical label shift
// that accounts for the installation height difference.

namespace roadgen {

/// Invertible 3x3 pixel mapping with the (3,3) entry normalized to 1.
class Homography {
public:
    Homography() : m_(Mat3::Identity()) {}

    explicit Homography(const Mat3& m) {
        if (!m.allFinite() || std::abs(m(2, 2)) < 1e-12)
            throw Degenerate("homography: cannot normalize (3,3) entry");
        m_ = m / m(2, 2);
        if (std::abs(m_.determinant()) <= 1e-12)
            throw Degenerate("homography: singular matrix");
    }

    const Mat3& matrix() const noexcept { return m_; }

    Vec2 apply(const Vec2& p) const {
        const Vec3 h = m_ * Vec3(p.x(), p.y(), 1.0);
        return {h.x() / h.z(), h.y() / h.z()};
    }

    Homography inverse() const { return Homography(m_.inverse()); }

    Homography operator*(const Homography& o) const { return Homography(m_ * o.m_); }

private:
    Mat3 m_;
};

/// Pixel mapping between two cameras sharing an optical center:
/// K_dst * R_dst * R_src^T * K_src^-1.
inline Homography rotation_homography(const CameraRig& src, const CameraRig& dst) {
    const Mat3 m = dst.intrinsics().matrix() * dst.extrinsics().rotation() *
                   src.extrinsics().rotation().transpose() * src.intrinsics().inverse_matrix();
    return Homography(m);
}

/// Background orientation and intrinsics placed at the source camera center.
inline CameraRig interim_rig(const CameraRig& src, const CameraRig& bg) {
    const Vec3 center = src.camera_center();
    return CameraRig(bg.intrinsics(), Extrinsics::from_center(bg.extrinsics().rotation(), center), center.z(),
                     bg.width(), bg.height());
}

enum class Interpolation { bilinear, nearest };

struct WarpResult {
    Image image;
    Mask validity;
};

/// Inverse warp: every destination pixel samples the source at H^-1 * (x, y, 1).
/// Destination pixels whose sample falls outside the source get `fill` and validity 0.
inline WarpResult warp_image(const Image& image, const Homography& h, int out_width, int out_height,
                             Interpolation interp = Interpolation::bilinear, std::uint8_t fill = 0) {
    const Mat3 inv = h.matrix().inverse();
    if (!inv.allFinite())
        throw Degenerate("warp: homography is not invertible");
    WarpResult out{Image(out_width, out_height, image.channels, fill), Mask(out_width, out_height, 0)};
    const double max_x = image.width - 1, max_y = image.height - 1;
    constexpr double kSnap = 1e-9;
    const auto snap = [](double v) {
        const double r = std::round(v);
        return std::abs(v - r) < kSnap ? r : v;
    };
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const Vec3 s = inv * Vec3(x, y, 1.0);
            if (!(s.z() > 0.0))
                continue;
            const double sx = snap(s.x() / s.z());
            const double sy = snap(s.y() / s.z());
            if (interp == Interpolation::nearest) {
                const double rx = std::round(sx), ry = std::round(sy);
                if (!(rx >= 0.0 && rx <= max_x && ry >= 0.0 && ry <= max_y))
                    continue;
                for (int c = 0; c < image.channels; ++c)
                    out.image.at(x, y, c) = image.at(static_cast<int>(rx), static_cast<int>(ry), c);
            } else {
                if (!(sx >= 0.0 && sx <= max_x && sy >= 0.0 && sy <= max_y))
                    continue;
                const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
                const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
                const double fx = sx - x0, fy = sy - y0;
                for (int c = 0; c < image.channels; ++c) {
                    const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
                    const double bottom = (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
                    const double v = (1.0 - fy) * top + fy * bottom;
                    out.image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
                }
            }
            out.validity.at(x, y) = 1;
        }
    }
    return out;
}

/// Shifts every box vertically by (h_bg - h_src); all other fields are untouched.
inline LabelSet rectify_labels(const LabelSet& labels, double h_src, double h_bg) {
    if (!(h_src > 0.0) || !(h_bg > 0.0))
        throw InvalidArgument("rectify_labels: installation heights must be positive");
    const double dz = h_bg - h_src;
    LabelSet out = labels;
    for (auto& b : out.boxes) b.z = b.z + dz;
    return out;
}

struct RectifiedFrame {
    Image image;
    Mask validity;
    CameraRig rig;
    LabelSet labels;
};

inline RectifiedFrame rectify_frame(const Image& image, const CameraRig& rig_src, const LabelSet& labels,
                                    const CameraRig& rig_bg, Interpolation interp = Interpolation::bilinear) {
    if (image.width != rig_src.width() || image.height != rig_src.height())
        throw ShapeMismatch("rectify_frame: image size differs from the source rig");
    const Homography h = rotation_homography(rig_src, interim_rig(rig_src, rig_bg));
    WarpResult warped = warp_image(image, h, rig_bg.width(), rig_bg.height(), interp);
    LabelSet shifted = rectify_labels(labels, rig_src.install_height(), rig_bg.install_height());
    return {std::move(warped.image), std::move(warped.validity), rig_bg, in_image_filter(shifted, rig_bg)};
}

}  // namespace roadgen
