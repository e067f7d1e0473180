// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadgen/errors.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"
#include "roadgen/tensor.hpp"

namespace roadgen {

inline constexpr double kDefaultForegroundThreshold = 0.55;
inline constexpr int kDefaultStride = 16;

/// Per-pixel class scores in [0, 1]; channel 0 is background.
struct MultiClassMask {
    Tensor3 scores;
    std::vector<std::string> class_names;

    void validate() const {
        if (scores.channels < 2 || static_cast<std::size_t>(scores.channels) != class_names.size())
            throw ShapeMismatch("multi-class mask: need >= 2 channels matching class_names");
        for (double v : scores.data)
            if (!(v >= 0.0 && v <= 1.0))
                throw InvalidArgument("multi-class mask: scores must lie in [0, 1]");
    }
};

struct InstanceMask {
    Mask bits;
    int instance_id = 0;
    Category category = Category::car;
};

struct BinaryForegroundMask {
    Mask bits;
};

struct BoxPrompt {
    Box2D box;
    Category category = Category::car;
};

/// Box-prompted instance segmentation (the role a promptable segmenter plays).
class InstanceSegmenter {
public:
    virtual ~InstanceSegmenter() = default;

    /// One mask per prompt, in prompt order; instance ids are prompt indices.
    virtual std::vector<InstanceMask> segment(const Image& image, std::span<const BoxPrompt> prompts) const = 0;

    /// Whether `segment` may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }
};

/// Fills every pixel whose integer coordinate lies inside the prompt box (inclusive).
class BoxFillSegmenter final : public InstanceSegmenter {
public:
    std::vector<InstanceMask> segment(const Image& image, std::span<const BoxPrompt> prompts) const override {
        std::vector<InstanceMask> out;
        out.reserve(prompts.size());
        for (std::size_t k = 0; k < prompts.size(); ++k) {
            InstanceMask m{Mask(image.width, image.height), static_cast<int>(k), prompts[k].category};
            const Box2D& b = prompts[k].box;
            const int x0 = std::max(0, static_cast<int>(std::ceil(b.u_min)));
            const int y0 = std::max(0, static_cast<int>(std::ceil(b.v_min)));
            const int x1 = std::min(image.width - 1, static_cast<int>(std::floor(b.u_max)));
            const int y1 = std::min(image.height - 1, static_cast<int>(std::floor(b.v_max)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) m.bits.at(x, y) = 1;
            out.push_back(std::move(m));
        }
        return out;
    }

    bool concurrent_safe() const override { return true; }
};

/// Pixel is foreground iff some non-background class score exceeds `t_fg`.
inline BinaryForegroundMask binary_foreground(const MultiClassMask& m, double t_fg = kDefaultForegroundThreshold) {
    if (!(t_fg > 0.0 && t_fg < 1.0))
        throw InvalidArgument("binary_foreground: t_fg must lie in (0, 1)");
    const Tensor3& s = m.scores;
    if (s.channels < 2)
        throw ShapeMismatch("binary_foreground: need at least one foreground class");
    BinaryForegroundMask out{Mask(s.cols, s.rows)};
    for (int c = 1; c < s.channels; ++c)
        for (int i = 0; i < s.rows; ++i)
            for (int j = 0; j < s.cols; ++j)
                if (s.at(c, i, j) > t_fg)
                    out.bits.at(j, i) = 1;
    return out;
}

/// Area-average pooling over stride x stride blocks, foreground iff the mean exceeds 0.5.
/// Dimensions that are not multiples of the stride are zero-padded.
inline Mask downsample_mask(const Mask& mask, int stride = kDefaultStride) {
    if (stride <= 0)
        throw InvalidArgument("downsample_mask: stride must be positive");
    const int out_w = (mask.width + stride - 1) / stride;
    const int out_h = (mask.height + stride - 1) / stride;
    Mask out(out_w, out_h);
    const long block = static_cast<long>(stride) * stride;
    for (int by = 0; by < out_h; ++by) {
        for (int bx = 0; bx < out_w; ++bx) {
            long ones = 0;
            for (int y = by * stride; y < std::min(mask.height, (by + 1) * stride); ++y)
                for (int x = bx * stride; x < std::min(mask.width, (bx + 1) * stride); ++x) ones += mask.at(x, y);
            out.at(bx, by) = 2 * ones > block ? 1 : 0;
        }
    }
    return out;
}

/// Union of each class's instance masks; channel 0 is the complement of all instances.
inline MultiClassMask rasterize_instances(std::span<const InstanceMask> masks,
                                          const std::vector<std::string>& class_names, int width, int height) {
    if (class_names.size() < 2)
        throw InvalidArgument("rasterize_instances: need background plus at least one class");
    MultiClassMask out{Tensor3(static_cast<int>(class_names.size()), height, width, 0.0), class_names};
    std::vector<std::uint8_t> any(static_cast<std::size_t>(width) * height, 0);
    for (const auto& inst : masks) {
        if (inst.bits.width != width || inst.bits.height != height)
            throw ShapeMismatch("rasterize_instances: mask dimensions differ");
        const auto it = std::find(class_names.begin() + 1, class_names.end(), to_string(inst.category));
        if (it == class_names.end())
            throw InvalidArgument("rasterize_instances: category '" + std::string(to_string(inst.category)) +
                                  "' has no channel");
        const int c = static_cast<int>(it - class_names.begin());
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (inst.bits.at(x, y)) {
                    out.scores.at(c, y, x) = 1.0;
                    any[static_cast<std::size_t>(y) * width + x] = 1;
                }
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out.scores.at(0, y, x) = any[static_cast<std::size_t>(y) * width + x] ? 0.0 : 1.0;
    return out;
}

// --- instance mask files ------------------------------------------------------
//
// Each instance is a 0/255 PGM `<stem>_inst<id>.pgm`; `<stem>_instances.json`
// indexes them as {"instances": [{"id", "category", "file"}]}.

inline std::filesystem::path write_instance_masks(const std::filesystem::path& dir, const std::string& stem,
                                                  std::span<const InstanceMask> masks) {
    nlohmann::json index;
    index["instances"] = nlohmann::json::array();
    for (const auto& m : masks) {
        const std::string file = stem + "_inst" + std::to_string(m.instance_id) + ".pgm";
        write_mask(dir / file, m.bits);
        index["instances"].push_back({{"id", m.instance_id}, {"category", to_string(m.category)}, {"file", file}});
    }
    const auto index_path = dir / (stem + "_instances.json");
    std::ofstream out(index_path);
    if (!out)
        throw IoError("cannot write " + index_path.string());
    out << index.dump(2) << '\n';
    return index_path;
}

inline std::vector<InstanceMask> read_instance_masks(const std::filesystem::path& index_path) {
    std::ifstream in(index_path);
    if (!in)
        throw IoError("cannot open " + index_path.string());
    std::vector<InstanceMask> out;
    try {
        const auto index = nlohmann::json::parse(in);
        for (const auto& e : index.at("instances")) {
            const auto category = parse_category(e.at("category").get<std::string>());
            if (!category)
                throw InvalidArgument("instance index: unknown category");
            out.push_back({read_mask(index_path.parent_path() / e.at("file").get<std::string>()), e.at("id").get<int>(),
                           *category});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("instance index " + index_path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace roadgen
