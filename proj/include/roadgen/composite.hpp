// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "roadgen/camgeom.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"
#include "roadgen/rectify.hpp"
#include "roadgen/segmask.hpp"

namespace roadgen {

inline constexpr double kDefaultIouThreshold = 0.25;
inline constexpr std::size_t kRecommendedBackgroundStack = 30;

/// Per-pixel, per-channel lower median of the stack (element (n-1)/2 after sorting).
inline Image extract_background(std::span<const Image> frames) {
    if (frames.size() < 3)
        throw TooFewFrames("extract_background: need at least 3 frames, got " + std::to_string(frames.size()));
    for (const auto& f : frames)
        if (!f.same_shape(frames.front()))
            throw ShapeMismatch("extract_background: frames differ in size");
    Image out = frames.front();
    std::vector<std::uint8_t> column(frames.size());
    const auto mid = static_cast<std::ptrdiff_t>((frames.size() - 1) / 2);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        for (std::size_t k = 0; k < frames.size(); ++k) column[k] = frames[k].data[i];
        std::nth_element(column.begin(), column.begin() + mid, column.end());
        out.data[i] = column[static_cast<std::size_t>(mid)];
    }
    return out;
}

struct BackgroundFrame {
    Image image;
    CameraRig rig;

    void validate() const {
        if (image.width != rig.width() || image.height != rig.height())
            throw ShapeMismatch("background: image size differs from its rig");
    }
};

/// A rectified frame plus one instance mask per label (masks[k] belongs to labels.boxes[k]).
struct CompositeSource {
    std::string frame_id;
    RectifiedFrame frame;
    std::vector<InstanceMask> masks;
};

struct ComposeOptions {
    double t_iou = kDefaultIouThreshold;
    std::size_t max_instances = 64;
    double max_invalid_fraction = 0.1;
    bool feather = false;
};

struct ComposeStats {
    std::size_t candidates = 0;
    std::size_t rejected_by_iou = 0;
    std::size_t rejected_invalid = 0;
    std::size_t rejected_by_cap = 0;
};

struct CompositeSample {
    Image image;
    CameraRig rig;
    LabelSet labels;
    Mask combined_mask;
    std::vector<std::string> source_frame_ids;
    ComposeStats stats;
};

/// Pastes instance foregrounds onto the background. Candidates are ordered far-to-near
/// by distance from the camera center, accepted greedily while their footprint IoU with
/// every accepted instance stays below t_iou, and painted in that order so nearer
/// instances occlude farther ones. Only valid (non-fabricated) source pixels are pasted.
inline CompositeSample compose(const BackgroundFrame& bg, std::span<const CompositeSource> sources,
                               const ComposeOptions& opts, const std::string& frame_id) {
    bg.validate();
    for (const auto& s : sources) {
        if (!approx_equal(s.frame.rig, bg.rig, 1e-9))
            throw RigMismatch("compose: source '" + s.frame_id + "' is not rectified to the background rig");
        if (!s.frame.image.same_shape(bg.image) || s.frame.validity.width != bg.image.width ||
            s.frame.validity.height != bg.image.height)
            throw ShapeMismatch("compose: source '" + s.frame_id + "' differs in size from the background");
        if (s.masks.size() != s.frame.labels.boxes.size())
            throw ShapeMismatch("compose: source '" + s.frame_id + "' needs one mask per label");
        for (const auto& m : s.masks)
            if (m.bits.width != bg.image.width || m.bits.height != bg.image.height)
                throw ShapeMismatch("compose: instance mask differs in size from the background");
    }

    struct Candidate {
        std::size_t source;
        std::size_t box;
        double distance;
    };
    const Vec3 eye = bg.rig.camera_center();
    std::vector<Candidate> candidates;
    for (std::size_t s = 0; s < sources.size(); ++s)
        for (std::size_t k = 0; k < sources[s].frame.labels.boxes.size(); ++k)
            candidates.push_back({s, k, (sources[s].frame.labels.boxes[k].center() - eye).norm()});
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.distance > b.distance; });

    CompositeSample out{bg.image, bg.rig, LabelSet{frame_id, {}, Provenance::synthetic},
                        Mask(bg.image.width, bg.image.height), {}, {}};
    out.stats.candidates = candidates.size();

    std::vector<const Candidate*> accepted;
    for (const auto& cand : candidates) {
        const auto& src = sources[cand.source];
        const Box3D& box = src.frame.labels.boxes[cand.box];
        const Mask& m = src.masks[cand.box].bits;
        std::size_t area = 0, invalid = 0;
        for (std::size_t i = 0; i < m.bits.size(); ++i)
            if (m.bits[i]) {
                ++area;
                invalid += src.frame.validity.bits[i] == 0;
            }
        if (area == 0 || static_cast<double>(invalid) > opts.max_invalid_fraction * static_cast<double>(area)) {
            ++out.stats.rejected_invalid;
            continue;
        }
        const bool collides = std::any_of(accepted.begin(), accepted.end(), [&](const Candidate* a) {
            return bev_iou(sources[a->source].frame.labels.boxes[a->box], box) >= opts.t_iou;
        });
        if (collides) {
            ++out.stats.rejected_by_iou;
            continue;
        }
        if (accepted.size() >= opts.max_instances) {
            ++out.stats.rejected_by_cap;
            continue;
        }
        accepted.push_back(&cand);
    }

    const int w = bg.image.width, h = bg.image.height, ch = bg.image.channels;
    for (const Candidate* a : accepted) {
        const auto& src = sources[a->source];
        const Mask& m = src.masks[a->box].bits;
        const Mask& valid = src.frame.validity;
        const auto inside = [&](int x, int y) { return m.at(x, y) && valid.at(x, y); };
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!inside(x, y))
                    continue;
                const bool edge = opts.feather && (x == 0 || y == 0 || x == w - 1 || y == h - 1 || !inside(x - 1, y) ||
                                                   !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1));
                for (int c = 0; c < ch; ++c) {
                    const std::uint8_t v = src.frame.image.at(x, y, c);
                    out.image.at(x, y, c) =
                        edge ? static_cast<std::uint8_t>((v + out.image.at(x, y, c) + 1) / 2) : v;
                }
                out.combined_mask.at(x, y) = 1;
            }
        }
        out.labels.boxes.push_back(src.frame.labels.boxes[a->box]);
        if (std::find(out.source_frame_ids.begin(), out.source_frame_ids.end(), src.frame_id) ==
            out.source_frame_ids.end())
            out.source_frame_ids.push_back(src.frame_id);
    }
    return out;
}

// --- batch planning -----------------------------------------------------------

struct CompositionPlan {
    std::vector<std::size_t> frames;
    bool operator==(const CompositionPlan&) const = default;
};

namespace detail {

// mt19937_64 output is fully specified by the standard; the distributions are not,
// so bounded draws use rejection sampling on the raw output.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % bound);
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(rng, i)]);
}

}  // namespace detail

/// Groups frames that carry at least one candidate into seeded, disjoint batches of
/// at most `batch_size` frames. Frames without candidates are skipped.
inline std::vector<CompositionPlan> plan_batches(std::span<const LabelSet> candidates, std::size_t batch_size,
                                                 std::uint64_t seed) {
    if (batch_size == 0)
        throw InvalidArgument("plan_batches: batch size must be at least 1");
    std::vector<std::size_t> frames;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (!candidates[i].empty())
            frames.push_back(i);
    std::mt19937_64 rng(seed);
    detail::seeded_shuffle(frames, rng);
    std::vector<CompositionPlan> plans;
    for (std::size_t i = 0; i < frames.size(); i += batch_size) {
        CompositionPlan p;
        p.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(i),
                        frames.begin() + static_cast<std::ptrdiff_t>(std::min(frames.size(), i + batch_size)));
        plans.push_back(std::move(p));
    }
    return plans;
}

}  // namespace roadgen
