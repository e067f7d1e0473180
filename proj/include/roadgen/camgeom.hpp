// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "roadgen/errors.hpp"

// Pinhole cameras over a right-handed ego/ground frame: z up, ground plane z = 0.
// Extrinsics map ego coordinates into the camera frame (x right, y down, z forward).
// All geometry is double precision; angles are radians.

namespace roadgen {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kOrthonormalTol = 1e-9;
inline constexpr double kHeightTol = 1e-6;
inline constexpr double kMinDepth = 1e-9;

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double skew = 0.0;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
            throw InvalidArgument("intrinsics: focal lengths must be positive and finite");
        if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew))
            throw InvalidArgument("intrinsics: principal point and skew must be finite");
    }

    Mat3 matrix() const {
        Mat3 k;
        k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }

    // Closed form of the upper-triangular inverse.
    Mat3 inverse_matrix() const {
        Mat3 inv;
        inv << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy), 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0,
            1.0;
        return inv;
    }

    /// Intrinsics for an image resampled by `factor` (pixel-corner convention).
    Intrinsics scaled(double factor) const { return {fx * factor, fy * factor, cx * factor, cy * factor, skew * factor}; }

    bool operator==(const Intrinsics&) const = default;
};

inline double orthonormality_error(const Mat3& r) { return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(); }

/// Rigid transform ego -> camera: p_cam = rotation * p_ego + translation.
class Extrinsics {
public:
    Extrinsics() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

    Extrinsics(const Mat3& rotation, const Vec3& translation) : rotation_(rotation), translation_(translation) {
        if (!rotation.allFinite() || !translation.allFinite())
            throw InvalidArgument("extrinsics: non-finite entries");
        if (orthonormality_error(rotation) >= kOrthonormalTol || rotation.determinant() <= 0.0)
            throw InvalidArgument("extrinsics: rotation is not orthonormal with determinant +1");
    }

    /// Camera placed at `center` (ego frame) with the given ego->camera rotation.
    static Extrinsics from_center(const Mat3& rotation, const Vec3& center) {
        return Extrinsics(rotation, -rotation * center);
    }

    const Mat3& rotation() const noexcept { return rotation_; }
    const Vec3& translation() const noexcept { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

    /// Camera origin expressed in the ego frame.
    Vec3 camera_center() const { return -rotation_.transpose() * translation_; }

    bool operator==(const Extrinsics& o) const { return rotation_ == o.rotation_ && translation_ == o.translation_; }

private:
    Mat3 rotation_;
    Vec3 translation_;
};

/// (a ∘ b)(p) = a(b(p))
inline Extrinsics compose(const Extrinsics& a, const Extrinsics& b) {
    return Extrinsics(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

inline Extrinsics invert(const Extrinsics& e) {
    const Mat3 rt = e.rotation().transpose();
    return Extrinsics(rt, -rt * e.translation());
}

/// Intrinsics matrix product; the result must stay upper triangular with unit (3,3).
inline Intrinsics compose(const Intrinsics& a, const Intrinsics& b) {
    const Mat3 m = a.matrix() * b.matrix();
    Intrinsics out{m(0, 0), m(1, 1), m(0, 2), m(1, 2), m(0, 1)};
    out.validate();
    return out;
}

inline Intrinsics invert(const Intrinsics& k) {
    const Mat3 m = k.inverse_matrix();
    Intrinsics out{m(0, 0), m(1, 1), m(0, 2), m(1, 2), m(0, 1)};
    out.validate();
    return out;
}

/// Ego->camera rotation for a camera heading `yaw` (about +z, 0 = looking along +y),
/// tilted down by `pitch`, and rolled by `roll` about its optical axis.
inline Mat3 look_rotation(double yaw, double pitch, double roll = 0.0) {
    const Vec3 heading(-std::sin(yaw), std::cos(yaw), 0.0);
    const Vec3 right(std::cos(yaw), std::sin(yaw), 0.0);
    const Vec3 up(0.0, 0.0, 1.0);
    const Vec3 forward = std::cos(pitch) * heading - std::sin(pitch) * up;
    const Vec3 down = -std::sin(pitch) * heading - std::cos(pitch) * up;
    const Vec3 x_cam = std::cos(roll) * right + std::sin(roll) * down;
    const Vec3 y_cam = -std::sin(roll) * right + std::cos(roll) * down;
    Mat3 r;
    r.row(0) = x_cam.transpose();
    r.row(1) = y_cam.transpose();
    r.row(2) = forward.transpose();
    return r;
}

class CameraRig {
public:
    CameraRig(const Intrinsics& intrinsics, const Extrinsics& extrinsics, double install_height, int image_width,
              int image_height)
        : intrinsics_(intrinsics),
          extrinsics_(extrinsics),
          install_height_(install_height),
          width_(image_width),
          height_(image_height) {
        intrinsics_.validate();
        if (!(install_height > 0.0))
            throw InvalidArgument("rig: install height must be positive");
        if (image_width <= 0 || image_height <= 0)
            throw InvalidArgument("rig: image dimensions must be positive");
        if (std::abs(extrinsics_.camera_center().z() - install_height) >= kHeightTol)
            throw InvalidArgument("rig: install height disagrees with the extrinsics camera origin");
    }

    const Intrinsics& intrinsics() const noexcept { return intrinsics_; }
    const Extrinsics& extrinsics() const noexcept { return extrinsics_; }
    double install_height() const noexcept { return install_height_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Vec3 camera_center() const { return extrinsics_.camera_center(); }

    bool contains(const Vec2& pixel) const {
        return pixel.x() >= 0.0 && pixel.x() < width_ && pixel.y() >= 0.0 && pixel.y() < height_;
    }

    bool operator==(const CameraRig&) const = default;

private:
    Intrinsics intrinsics_;
    Extrinsics extrinsics_;
    double install_height_;
    int width_;
    int height_;
};

/// Camera at (x, y, height) above the ground looking with `look_rotation(yaw, pitch, roll)`.
inline CameraRig make_rig(const Intrinsics& k, double yaw, double pitch, double roll, const Vec3& center, int width,
                          int height) {
    return CameraRig(k, Extrinsics::from_center(look_rotation(yaw, pitch, roll), center), center.z(), width, height);
}

/// Field-by-field comparison with an absolute tolerance.
inline bool approx_equal(const CameraRig& a, const CameraRig& b, double tol) {
    const auto close = [tol](double x, double y) { return std::abs(x - y) <= tol; };
    const Intrinsics& ka = a.intrinsics();
    const Intrinsics& kb = b.intrinsics();
    return a.width() == b.width() && a.height() == b.height() && close(ka.fx, kb.fx) && close(ka.fy, kb.fy) &&
           close(ka.cx, kb.cx) && close(ka.cy, kb.cy) && close(ka.skew, kb.skew) &&
           close(a.install_height(), b.install_height()) &&
           (a.extrinsics().rotation() - b.extrinsics().rotation()).cwiseAbs().maxCoeff() <= tol &&
           (a.extrinsics().translation() - b.extrinsics().translation()).cwiseAbs().maxCoeff() <= tol;
}

struct Projection {
    Vec2 pixel;
    double depth;
};

inline Projection project(const CameraRig& rig, const Vec3& point) {
    const Vec3 pc = rig.extrinsics().apply(point);
    if (!(pc.z() > kMinDepth))
        throw BehindCamera();
    const Vec3 h = rig.intrinsics().matrix() * pc;
    return {Vec2(h.x() / h.z(), h.y() / h.z()), pc.z()};
}

/// Ray direction (ego frame, unnormalized) through `pixel`.
inline Vec3 pixel_ray(const CameraRig& rig, const Vec2& pixel) {
    return rig.extrinsics().rotation().transpose() * (rig.intrinsics().inverse_matrix() * Vec3(pixel.x(), pixel.y(), 1.0));
}

/// Point where the ray through `pixel` meets the horizontal plane z = `height`.
inline Vec3 ray_ground_intersect(const CameraRig& rig, const Vec2& pixel, double height) {
    const Vec3 origin = rig.camera_center();
    const Vec3 dir = pixel_ray(rig, pixel);
    if (std::abs(dir.z()) < 1e-12)
        throw NoIntersection();
    const double s = (height - origin.z()) / dir.z();
    if (!(s > 0.0) || !std::isfinite(s))
        throw NoIntersection();
    Vec3 p = origin + s * dir;
    p.z() = height;
    return p;
}

// --- calibration files ------------------------------------------------------

inline nlohmann::json rig_to_json(const CameraRig& rig) {
    const Mat3 k = rig.intrinsics().matrix();
    const Mat3& r = rig.extrinsics().rotation();
    const Vec3& t = rig.extrinsics().translation();
    nlohmann::json j;
    j["intrinsics"] = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) j["intrinsics"].push_back(k(i, c));
    j["extrinsics"] = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) j["extrinsics"].push_back(r(i, c));
        j["extrinsics"].push_back(t(i));
    }
    j["install_height_m"] = rig.install_height();
    j["image_size"] = {rig.width(), rig.height()};
    return j;
}

inline CameraRig rig_from_json(const nlohmann::json& j) {
    try {
        for (const auto& [key, value] : j.items()) {
            if (key != "intrinsics" && key != "extrinsics" && key != "install_height_m" && key != "image_size")
                throw InvalidArgument("calibration: unknown key '" + key + "'");
        }
        const auto kin = j.at("intrinsics").get<std::vector<double>>();
        const auto ext = j.at("extrinsics").get<std::vector<double>>();
        const auto size = j.at("image_size").get<std::vector<int>>();
        if (kin.size() != 9)
            throw InvalidArgument("calibration: intrinsics must have 9 entries");
        if (ext.size() != 12)
            throw InvalidArgument("calibration: extrinsics must have 12 entries");
        if (size.size() != 2)
            throw InvalidArgument("calibration: image_size must be [width, height]");
        if (kin[3] != 0.0 || kin[6] != 0.0 || kin[7] != 0.0 || kin[8] != 1.0)
            throw InvalidArgument("calibration: intrinsics must be upper triangular with unit (3,3) entry");
        Mat3 r;
        Vec3 t;
        for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 3; ++c) r(i, c) = ext[static_cast<std::size_t>(i * 4 + c)];
            t(i) = ext[static_cast<std::size_t>(i * 4 + 3)];
        }
        const Intrinsics k{kin[0], kin[4], kin[2], kin[5], kin[1]};
        return CameraRig(k, Extrinsics(r, t), j.at("install_height_m").get<double>(), size[0], size[1]);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("calibration: ") + e.what());
    }
}

inline CameraRig load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open calibration file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("calibration " + path.string() + ": " + e.what());
    }
    return rig_from_json(j);
}

inline void save_calibration(const std::filesystem::path& path, const CameraRig& rig) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write calibration file " + path.string());
    out << rig_to_json(rig).dump(2) << '\n';
}

}  // namespace roadgen
