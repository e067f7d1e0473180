// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "roadgen/camgeom.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/segmask.hpp"
#include "roadgen/tensor.hpp"

// Background-suppressed feature math and the height-based image -> BEV lift.
// Learned quantities (segmentation scores, context features, height
// distributions, fusion weights) are inputs; everything here is deterministic.

namespace roadgen {

struct FeatureMap {
    Tensor3 data;
    int stride = kDefaultStride;

    void validate() const {
        if (data.channels <= 0 || data.rows <= 0 || data.cols <= 0 || stride <= 0)
            throw InvalidArgument("feature map: dimensions and stride must be positive");
        for (double v : data.data)
            if (!std::isfinite(v))
                throw InvalidArgument("feature map: non-finite value");
    }
};

inline std::vector<double> uniform_bin_edges(double h_min, double h_max, int bins) {
    if (bins <= 0 || !(h_max > h_min))
        throw InvalidArgument("height bins: need bins > 0 and h_max > h_min");
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) edges[static_cast<std::size_t>(k)] = h_min + (h_max - h_min) * k / bins;
    return edges;
}

inline constexpr double kDefaultHeightMin = -1.0;
inline constexpr double kDefaultHeightMax = 3.0;

/// Per-pixel categorical distribution over height bins (meters above ground).
struct HeightDistribution {
    Tensor3 probs;
    std::vector<double> bin_edges;

    int bins() const { return probs.channels; }
    double bin_center(int k) const {
        return 0.5 * (bin_edges[static_cast<std::size_t>(k)] + bin_edges[static_cast<std::size_t>(k) + 1]);
    }

    void validate() const {
        if (bin_edges.size() != static_cast<std::size_t>(probs.channels) + 1)
            throw ShapeMismatch("height distribution: need bins + 1 edges");
        for (std::size_t k = 1; k < bin_edges.size(); ++k)
            if (!(bin_edges[k] > bin_edges[k - 1]))
                throw InvalidArgument("height distribution: bin edges must be strictly ascending");
        for (int i = 0; i < probs.rows; ++i)
            for (int j = 0; j < probs.cols; ++j) {
                double sum = 0.0;
                for (int k = 0; k < probs.channels; ++k) {
                    const double p = probs.at(k, i, j);
                    if (!(p >= 0.0))
                        throw InvalidArgument("height distribution: negative probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-6)
                    throw InvalidArgument("height distribution: probabilities do not sum to 1");
            }
    }
};

/// Fusion weights: a 3x3 convolution from (C_s + C_c) to C_e channels followed by
/// a C_e x C_e channel-attention transform.
struct AttentionParams {
    Eigen::MatrixXd phi;
    std::vector<double> conv_weights;  // [out][in][3][3]
    std::vector<double> conv_bias;     // [out]
    int in_channels = 0;

    int out_channels() const { return static_cast<int>(conv_bias.size()); }

    double weight(int o, int i, int ky, int kx) const {
        return conv_weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
    }

    void validate() const {
        const int out = out_channels();
        if (out <= 0 || in_channels <= 0)
            throw ShapeMismatch("attention params: empty convolution");
        if (conv_weights.size() != static_cast<std::size_t>(out) * in_channels * 9)
            throw ShapeMismatch("attention params: convolution weights must be out x in x 3 x 3");
        if (phi.rows() != out || phi.cols() != out)
            throw ShapeMismatch("attention params: phi must be C_e x C_e");
        if (!phi.allFinite())
            throw InvalidArgument("attention params: non-finite phi");
        for (double v : conv_weights)
            if (!std::isfinite(v))
                throw InvalidArgument("attention params: non-finite weight");
        for (double v : conv_bias)
            if (!std::isfinite(v))
                throw InvalidArgument("attention params: non-finite bias");
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// s = sigmoid(phi * spatial_mean(f)); channel c is scaled by s_c.
inline FeatureMap channel_attention(const FeatureMap& f, const Eigen::MatrixXd& phi) {
    const Tensor3& t = f.data;
    if (phi.rows() != t.channels || phi.cols() != t.channels)
        throw ShapeMismatch("channel_attention: phi must be C x C");
    Eigen::VectorXd mean(t.channels);
    const double n = static_cast<double>(t.plane_size());
    for (int c = 0; c < t.channels; ++c) {
        double s = 0.0;
        for (std::size_t p = 0; p < t.plane_size(); ++p) s += t.data[static_cast<std::size_t>(c) * t.plane_size() + p];
        mean(c) = s / n;
    }
    const Eigen::VectorXd logits = phi * mean;
    FeatureMap out = f;
    for (int c = 0; c < t.channels; ++c) {
        const double scale = sigmoid(logits(c));
        for (std::size_t p = 0; p < t.plane_size(); ++p)
            out.data.data[static_cast<std::size_t>(c) * t.plane_size() + p] *= scale;
    }
    return out;
}

/// Concatenates [scores, context] along channels, applies the 3x3 convolution
/// (stride 1, zero padding 1) and then channel attention.
inline FeatureMap fuse_features(const MultiClassMask& m_seg, const FeatureMap& f_context,
                                const AttentionParams& params) {
    const Tensor3& seg = m_seg.scores;
    const Tensor3& ctx = f_context.data;
    if (!seg.same_spatial(ctx))
        throw ShapeMismatch("fuse_features: mask and context differ spatially");
    params.validate();
    if (params.in_channels != seg.channels + ctx.channels)
        throw ShapeMismatch("fuse_features: convolution expects " + std::to_string(params.in_channels) +
                            " input channels, got " + std::to_string(seg.channels + ctx.channels));
    const int rows = ctx.rows, cols = ctx.cols;
    const auto input = [&](int c, int i, int j) {
        if (i < 0 || j < 0 || i >= rows || j >= cols)
            return 0.0;
        return c < seg.channels ? seg.at(c, i, j) : ctx.at(c - seg.channels, i, j);
    };
    FeatureMap conv{Tensor3(params.out_channels(), rows, cols), f_context.stride};
    for (int o = 0; o < params.out_channels(); ++o)
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                double acc = params.conv_bias[static_cast<std::size_t>(o)];
                for (int c = 0; c < params.in_channels; ++c)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) acc += params.weight(o, c, ky, kx) * input(c, i + ky - 1, j + kx - 1);
                conv.data.at(o, i, j) = acc;
            }
    return channel_attention(conv, params.phi);
}

/// Zeroes every feature column where the foreground mask is 0.
inline FeatureMap mask_features(const FeatureMap& f, const BinaryForegroundMask& m_bin) {
    const Tensor3& t = f.data;
    if (m_bin.bits.width != t.cols || m_bin.bits.height != t.rows)
        throw ShapeMismatch("mask_features: mask and features differ spatially");
    FeatureMap out = f;
    for (int c = 0; c < t.channels; ++c)
        for (int i = 0; i < t.rows; ++i)
            for (int j = 0; j < t.cols; ++j)
                out.data.at(c, i, j) = m_bin.bits.at(j, i) ? t.at(c, i, j) : 0.0;
    return out;
}

// --- lift ---------------------------------------------------------------------

/// Weighted feature points; features are stored row-major as points x channels.
struct LiftedPoints {
    int channels = 0;
    std::vector<Vec3> points;
    std::vector<double> features;
    std::vector<std::size_t> source_pixel;  // i * cols + j of the originating feature pixel
    std::size_t dropped = 0;

    std::size_t size() const { return points.size(); }
    const double* feature(std::size_t n) const { return features.data() + n * static_cast<std::size_t>(channels); }
};

/// Image pixel at the center of feature cell (row i, column j).
inline Vec2 feature_cell_center(int i, int j, int stride) { return {(j + 0.5) * stride, (i + 0.5) * stride}; }

/// Places each feature pixel at every height bin with positive probability, on its ray
/// at the bin-center height, carrying probability x feature. Bins whose plane the ray
/// cannot reach are dropped and counted.
inline LiftedPoints lift(const FeatureMap& f, const HeightDistribution& h, const CameraRig& rig) {
    const Tensor3& t = f.data;
    if (!t.same_spatial(h.probs))
        throw ShapeMismatch("lift: features and height distribution differ spatially");
    h.validate();
    LiftedPoints out;
    out.channels = t.channels;
    for (int i = 0; i < t.rows; ++i)
        for (int j = 0; j < t.cols; ++j) {
            const Vec2 pixel = feature_cell_center(i, j, f.stride);
            for (int k = 0; k < h.bins(); ++k) {
                const double p = h.probs.at(k, i, j);
                if (!(p > 0.0))
                    continue;
                Vec3 point;
                try {
                    point = ray_ground_intersect(rig, pixel, h.bin_center(k));
                } catch (const NoIntersection&) {
                    ++out.dropped;
                    continue;
                }
                out.points.push_back(point);
                for (int c = 0; c < t.channels; ++c) out.features.push_back(p * t.at(c, i, j));
                out.source_pixel.push_back(static_cast<std::size_t>(i) * t.cols + j);
            }
        }
    return out;
}

// --- voxel pooling ------------------------------------------------------------

struct GridConfig {
    double x_min = -51.2, x_max = 51.2;
    double y_min = 0.0, y_max = 102.4;
    double dx = 0.2, dy = 0.2;

    static int cell_count(double lo, double hi, double step, const char* axis) {
        if (!(step > 0.0) || !(hi > lo))
            throw InvalidArgument(std::string("grid: invalid extent along ") + axis);
        const double n = std::round((hi - lo) / step);
        if (std::abs(n * step - (hi - lo)) > 1e-9)
            throw InvalidArgument(std::string("grid: extent along ") + axis + " is not a multiple of the voxel size");
        return static_cast<int>(n);
    }
    int nx() const { return cell_count(x_min, x_max, dx, "x"); }
    int ny() const { return cell_count(y_min, y_max, dy, "y"); }

    bool operator==(const GridConfig&) const = default;
};

/// X x Y x C cells; cell (ix, iy) covers [x_min + ix*dx, x_min + (ix+1)*dx) and likewise in y.
struct BEVGrid {
    GridConfig config;
    int nx = 0, ny = 0, channels = 0;
    std::vector<double> cells;
    std::size_t dropped = 0;

    std::size_t index(int ix, int iy, int c) const {
        return (static_cast<std::size_t>(ix) * ny + iy) * channels + c;
    }
    double at(int ix, int iy, int c) const { return cells[index(ix, iy, c)]; }

    /// Cell holding (x, y), or false when outside the extents.
    bool locate(double x, double y, int& ix, int& iy) const {
        const double fx = std::floor((x - config.x_min) / config.dx);
        const double fy = std::floor((y - config.y_min) / config.dy);
        if (!(fx >= 0.0 && fx < nx && fy >= 0.0 && fy < ny))
            return false;
        ix = static_cast<int>(fx);
        iy = static_cast<int>(fy);
        return true;
    }
};

/// Sums each point's feature into the cell containing its (x, y), collapsing height.
/// Points are visited in order and accumulated with Neumaier compensation.
inline BEVGrid voxel_pool(const LiftedPoints& points, const GridConfig& config) {
    BEVGrid grid{config, config.nx(), config.ny(), points.channels, {}, 0};
    grid.cells.assign(static_cast<std::size_t>(grid.nx) * grid.ny * grid.channels, 0.0);
    std::vector<double> comp(grid.cells.size(), 0.0);
    for (std::size_t n = 0; n < points.size(); ++n) {
        int ix = 0, iy = 0;
        if (!grid.locate(points.points[n].x(), points.points[n].y(), ix, iy)) {
            ++grid.dropped;
            continue;
        }
        const double* feat = points.feature(n);
        for (int c = 0; c < grid.channels; ++c) {
            const std::size_t idx = grid.index(ix, iy, c);
            const double sum = grid.cells[idx];
            const double v = feat[c];
            const double t = sum + v;
            comp[idx] += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
            grid.cells[idx] = t;
        }
    }
    for (std::size_t i = 0; i < grid.cells.size(); ++i) grid.cells[i] += comp[i];
    return grid;
}

inline TensorFile to_tensor_file(const BEVGrid& g) {
    TensorFile f{{static_cast<std::uint32_t>(g.nx), static_cast<std::uint32_t>(g.ny),
                  static_cast<std::uint32_t>(g.channels)},
                 {}};
    f.values.reserve(g.cells.size());
    for (double v : g.cells) f.values.push_back(static_cast<float>(v));
    return f;
}

}  // namespace roadgen
