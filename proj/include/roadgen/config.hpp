// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadgen/bsmbev.hpp"
#include "roadgen/composite.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/pipeline.hpp"
#include "roadgen/segmask.hpp"

namespace roadgen {

struct DetectorConfig {
    std::string kind = "oracle";  // oracle | noisy | constant
    std::string labels_dir = "ground_truth";
    double sigma = 0.2;
    double conf = 0.5;
    bool operator==(const DetectorConfig&) const = default;
};

/// Run configuration. Relative paths are resolved against the config file's directory.
struct Config {
    std::string dataset_root;
    std::string output_root;
    std::string manifest = "manifest.jsonl";
    Thresholds thresholds;
    GridConfig grid;
    int image_width = 1536;
    int image_height = 864;
    int stride = kDefaultStride;
    int rounds = kDefaultRounds;
    std::uint64_t seed = 0;
    std::size_t batch_size = 4;
    std::size_t max_instances = 64;
    double height_min = kDefaultHeightMin;
    double height_max = kDefaultHeightMax;
    DetectorConfig detector;
    std::string segmenter = "box_fill";
    std::vector<std::string> trainer;  // empty: record-only trainer
    unsigned workers = 1;

    void validate() const {
        if (dataset_root.empty())
            throw ConfigError("dataset_root", "required");
        if (output_root.empty())
            throw ConfigError("output_root", "required");
        const auto unit = [](const char* key, double v) {
            if (!(v > 0.0 && v < 1.0))
                throw ConfigError(key, "must lie in (0, 1)");
        };
        unit("t_conf", thresholds.t_conf);
        unit("t_iou", thresholds.t_iou);
        unit("t_fg", thresholds.t_fg);
        if (rounds < 1)
            throw ConfigError("rounds", "must be at least 1");
        if (stride < 1)
            throw ConfigError("stride", "must be positive");
        if (image_width < 1 || image_height < 1)
            throw ConfigError("image_size", "dimensions must be positive");
        if (batch_size < 1)
            throw ConfigError("batch_size", "must be at least 1");
        if (!(height_max > height_min))
            throw ConfigError("height_bins", "max must exceed min");
        try {
            (void)grid.nx();
            (void)grid.ny();
        } catch (const InvalidArgument& e) {
            throw ConfigError("grid", e.what());
        }
        if (detector.kind != "oracle" && detector.kind != "noisy" && detector.kind != "constant")
            throw ConfigError("detector.kind", "must be oracle, noisy or constant");
        if (segmenter != "box_fill")
            throw ConfigError("segmenter", "must be box_fill");
        if (workers < 1)
            throw ConfigError("workers", "must be at least 1");
    }

    bool operator==(const Config&) const = default;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
    if (!j.is_object())
        throw ConfigError(prefix.empty() ? "<root>" : prefix, "must be an object");
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown key");
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace detail

inline Config config_from_json(const nlohmann::json& j) {
    detail::reject_unknown(j,
                           {"dataset_root", "output_root", "manifest", "t_conf", "t_iou", "t_fg", "grid", "image_size",
                            "stride", "rounds", "seed", "batch_size", "max_instances", "height_bins", "detector",
                            "segmenter", "trainer", "workers"},
                           "");
    Config c;
    detail::read_key(j, "dataset_root", c.dataset_root, "dataset_root");
    detail::read_key(j, "output_root", c.output_root, "output_root");
    detail::read_key(j, "manifest", c.manifest, "manifest");
    detail::read_key(j, "t_conf", c.thresholds.t_conf, "t_conf");
    detail::read_key(j, "t_iou", c.thresholds.t_iou, "t_iou");
    detail::read_key(j, "t_fg", c.thresholds.t_fg, "t_fg");
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown(g, {"x_min", "x_max", "y_min", "y_max", "dx", "dy"}, "grid");
        detail::read_key(g, "x_min", c.grid.x_min, "grid.x_min");
        detail::read_key(g, "x_max", c.grid.x_max, "grid.x_max");
        detail::read_key(g, "y_min", c.grid.y_min, "grid.y_min");
        detail::read_key(g, "y_max", c.grid.y_max, "grid.y_max");
        detail::read_key(g, "dx", c.grid.dx, "grid.dx");
        detail::read_key(g, "dy", c.grid.dy, "grid.dy");
    }
    if (j.contains("image_size")) {
        std::vector<int> size;
        detail::read_key(j, "image_size", size, "image_size");
        if (size.size() != 2)
            throw ConfigError("image_size", "must be [width, height]");
        c.image_width = size[0];
        c.image_height = size[1];
    }
    detail::read_key(j, "stride", c.stride, "stride");
    detail::read_key(j, "rounds", c.rounds, "rounds");
    detail::read_key(j, "seed", c.seed, "seed");
    detail::read_key(j, "batch_size", c.batch_size, "batch_size");
    detail::read_key(j, "max_instances", c.max_instances, "max_instances");
    if (j.contains("height_bins")) {
        const auto& h = j.at("height_bins");
        detail::reject_unknown(h, {"min", "max"}, "height_bins");
        detail::read_key(h, "min", c.height_min, "height_bins.min");
        detail::read_key(h, "max", c.height_max, "height_bins.max");
    }
    if (j.contains("detector")) {
        const auto& d = j.at("detector");
        detail::reject_unknown(d, {"kind", "labels_dir", "sigma", "conf"}, "detector");
        detail::read_key(d, "kind", c.detector.kind, "detector.kind");
        detail::read_key(d, "labels_dir", c.detector.labels_dir, "detector.labels_dir");
        detail::read_key(d, "sigma", c.detector.sigma, "detector.sigma");
        detail::read_key(d, "conf", c.detector.conf, "detector.conf");
    }
    detail::read_key(j, "segmenter", c.segmenter, "segmenter");
    detail::read_key(j, "trainer", c.trainer, "trainer");
    detail::read_key(j, "workers", c.workers, "workers");
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const Config& c) {
    return {{"dataset_root", c.dataset_root},
            {"output_root", c.output_root},
            {"manifest", c.manifest},
            {"t_conf", c.thresholds.t_conf},
            {"t_iou", c.thresholds.t_iou},
            {"t_fg", c.thresholds.t_fg},
            {"grid",
             {{"x_min", c.grid.x_min},
              {"x_max", c.grid.x_max},
              {"y_min", c.grid.y_min},
              {"y_max", c.grid.y_max},
              {"dx", c.grid.dx},
              {"dy", c.grid.dy}}},
            {"image_size", {c.image_width, c.image_height}},
            {"stride", c.stride},
            {"rounds", c.rounds},
            {"seed", c.seed},
            {"batch_size", c.batch_size},
            {"max_instances", c.max_instances},
            {"height_bins", {{"min", c.height_min}, {"max", c.height_max}}},
            {"detector",
             {{"kind", c.detector.kind},
              {"labels_dir", c.detector.labels_dir},
              {"sigma", c.detector.sigma},
              {"conf", c.detector.conf}}},
            {"segmenter", c.segmenter},
            {"trainer", c.trainer},
            {"workers", c.workers}};
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("<root>", e.what());
    }
    Config c = config_from_json(j);
    const auto base = std::filesystem::absolute(path).parent_path();
    for (std::string* p : {&c.dataset_root, &c.output_root})
        if (std::filesystem::path(*p).is_relative())
            *p = (base / *p).lexically_normal().generic_string();
    return c;
}

inline std::string dump_config(const Config& c) { return config_to_json(c).dump(2) + "\n"; }

}  // namespace roadgen
