// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "roadgen/bsmbev.hpp"
#include "roadgen/camgeom.hpp"
#include "roadgen/composite.hpp"
#include "roadgen/config.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/fixture.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"
#include "roadgen/pipeline.hpp"
#include "roadgen/rectify.hpp"
#include "roadgen/segmask.hpp"
#include "roadgen/tensor.hpp"
#include "roadgen/viz.hpp"

namespace roadgen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace cli {

namespace fs = std::filesystem;

inline Interpolation parse_interpolation(const std::string& s) {
    return s == "nearest" ? Interpolation::nearest : Interpolation::bilinear;
}

inline std::shared_ptr<Detector> make_detector(const DetectorConfig& d, const fs::path& dataset_root,
                                               std::uint64_t seed) {
    GroundTruth gt = ground_truth_from_directory(resolve_path(dataset_root, d.labels_dir));
    if (d.kind == "noisy")
        return std::make_shared<NoisyOracleDetector>(std::move(gt), d.sigma, seed);
    if (d.kind == "constant")
        return std::make_shared<ConstantConfidenceDetector>(std::move(gt), d.conf);
    return std::make_shared<OracleDetector>(std::move(gt));
}

inline nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

// {"in_channels": n, "conv_weights": [...], "conv_bias": [...], "phi": [[...], ...]}
inline AttentionParams read_attention_params(const fs::path& path) {
    const auto j = read_json(path);
    AttentionParams p;
    try {
        p.in_channels = j.at("in_channels").get<int>();
        p.conv_weights = j.at("conv_weights").get<std::vector<double>>();
        p.conv_bias = j.at("conv_bias").get<std::vector<double>>();
        const auto rows = j.at("phi").get<std::vector<std::vector<double>>>();
        p.phi.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows[0].size())
                throw ShapeMismatch("attention params: ragged phi");
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                p.phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
    p.validate();
    return p;
}

inline int cmd_rectify(const fs::path& image_path, const fs::path& calib, const std::optional<fs::path>& labels_path,
                       const fs::path& bg_calib, const fs::path& out_dir, const std::string& interp) {
    const Image image = read_image(image_path);
    const CameraRig rig = load_calibration(calib);
    const CameraRig bg = load_calibration(bg_calib);
    const std::string stem = image_path.stem().string();
    const LabelSet labels = labels_path ? read_labels(*labels_path) : LabelSet{stem, {}, Provenance::manual};
    const RectifiedFrame r = rectify_frame(image, rig, labels, bg, parse_interpolation(interp));
    fs::create_directories(out_dir);
    write_image(out_dir / (stem + ".ppm"), r.image);
    write_mask(out_dir / (stem + "_valid.pgm"), r.validity);
    write_labels(out_dir / (stem + ".txt"), r.labels);
    save_calibration(out_dir / (stem + "_calib.json"), r.rig);
    return kExitOk;
}

inline int cmd_background(const std::vector<fs::path>& frames, const fs::path& out) {
    std::vector<Image> images;
    images.reserve(frames.size());
    for (const auto& f : frames) images.push_back(read_image(f));
    write_image(out, extract_background(images));
    return kExitOk;
}

// Plan file:
// {"background": {"image", "calib"}, "t_iou", "max_instances", "feather",
//  "samples": [{"id", "sources": [{"frame_id", "image", "calib", "labels", "validity"?, "masks"?}]}]}
// Sources are already rectified to the background rig. Without "masks" the
// box-fill segmenter is prompted with each label's projected box.
inline int cmd_composite(const fs::path& plan_path, const fs::path& out_dir) {
    const auto plan = read_json(plan_path);
    const fs::path base = plan_path.parent_path();
    const auto path_of = [&](const nlohmann::json& j, const char* key) {
        return resolve_path(base, j.at(key).get<std::string>());
    };
    try {
        const auto& bgj = plan.at("background");
        const BackgroundFrame bg{read_image(path_of(bgj, "image")), load_calibration(path_of(bgj, "calib"))};
        ComposeOptions opts;
        opts.t_iou = plan.value("t_iou", kDefaultIouThreshold);
        opts.max_instances = plan.value("max_instances", std::size_t{64});
        opts.feather = plan.value("feather", false);
        const BoxFillSegmenter segmenter;
        fs::create_directories(out_dir);
        for (const auto& sj : plan.at("samples")) {
            const std::string id = sj.at("id").get<std::string>();
            std::vector<CompositeSource> sources;
            for (const auto& src : sj.at("sources")) {
                const Image img = read_image(path_of(src, "image"));
                RectifiedFrame frame{img,
                                     src.contains("validity") ? read_mask(path_of(src, "validity"))
                                                              : Mask(img.width, img.height, 1),
                                     load_calibration(path_of(src, "calib")), read_labels(path_of(src, "labels"))};
                std::vector<InstanceMask> masks;
                if (src.contains("masks")) {
                    masks = read_instance_masks(path_of(src, "masks"));
                } else {
                    std::vector<BoxPrompt> prompts;
                    for (const auto& b : frame.labels.boxes)
                        prompts.push_back({project_box_2d(b, frame.rig).value_or(Box2D{}), b.category});
                    masks = segmenter.segment(frame.image, prompts);
                }
                sources.push_back({src.value("frame_id", frame.labels.frame_id), std::move(frame), std::move(masks)});
            }
            const CompositeSample s = compose(bg, sources, opts, id);
            write_image(out_dir / (id + ".ppm"), s.image);
            write_labels(out_dir / (id + ".txt"), s.labels);
            write_mask(out_dir / (id + "_mask.pgm"), s.combined_mask);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(plan_path.string() + ": " + e.what());
    }
    return kExitOk;
}

inline int cmd_pseudo(const fs::path& manifest_path, const DetectorConfig& d, const fs::path& dataset_root,
                      double t_conf, std::uint64_t seed, const fs::path& out_dir) {
    if (!(t_conf > 0.0 && t_conf < 1.0))
        throw InvalidArgument("pseudo: t_conf must lie in (0, 1)");
    const DatasetManifest m = read_manifest(manifest_path);
    const auto detector = make_detector(d, dataset_root, seed);
    const auto r = pseudo_label(m, manifest_path.parent_path(), detector.get(), t_conf, out_dir);
    std::size_t kept = 0;
    for (const auto& l : r.labels) kept += l.size();
    std::cout << "frames " << r.frames.size() << " skipped " << r.skipped << " raw " << r.raw_predictions << " kept "
              << kept << '\n';
    return kExitOk;
}

struct BevArgs {
    fs::path features, heights, calib, out;
    std::optional<fs::path> seg, params;
    double t_fg = kDefaultForegroundThreshold;
    int stride = kDefaultStride;
    double h_min = kDefaultHeightMin, h_max = kDefaultHeightMax;
    std::optional<fs::path> config;
};

inline int cmd_bev(const BevArgs& a) {
    GridConfig grid;
    if (a.config)
        grid = load_config(*a.config).grid;
    FeatureMap f{to_tensor3(read_tensor_file(a.features)), a.stride};
    f.validate();
    const Tensor3 probs = to_tensor3(read_tensor_file(a.heights));
    const HeightDistribution h{probs, uniform_bin_edges(a.h_min, a.h_max, probs.channels)};
    const CameraRig rig = load_calibration(a.calib);
    if (a.params && !a.seg)
        throw InvalidArgument("bev: --params requires --seg");
    if (a.seg) {
        MultiClassMask seg{to_tensor3(read_tensor_file(*a.seg)), {}};
        seg.class_names.push_back("background");
        for (int c = 1; c < seg.scores.channels; ++c) seg.class_names.push_back("class" + std::to_string(c));
        seg.validate();
        if (a.params)
            f = fuse_features(seg, f, read_attention_params(*a.params));
        f = mask_features(f, binary_foreground(seg, a.t_fg));
    }
    const BEVGrid g = voxel_pool(lift(f, h, rig), grid);
    write_tensor_file(a.out, to_tensor_file(g));
    return kExitOk;
}

struct PipelineOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> rounds;
    std::optional<double> t_conf, t_iou, t_fg;
};

inline int cmd_pipeline(const fs::path& config_path, const PipelineOverrides& o) {
    Config c = load_config(config_path);
    if (o.seed)
        c.seed = *o.seed;
    if (o.rounds)
        c.rounds = *o.rounds;
    if (o.t_conf)
        c.thresholds.t_conf = *o.t_conf;
    if (o.t_iou)
        c.thresholds.t_iou = *o.t_iou;
    if (o.t_fg)
        c.thresholds.t_fg = *o.t_fg;
    c.validate();

    const fs::path dataset_root = c.dataset_root;
    PipelineContext ctx;
    ctx.output_root = c.output_root;
    const DetectorConfig det = c.detector;
    const std::uint64_t seed = c.seed;
    ctx.detectors = [det, dataset_root, seed](const std::string&) { return make_detector(det, dataset_root, seed); };
    if (!c.trainer.empty())
        ctx.trainer = command_trainer(c.trainer);
    ctx.batch_size = c.batch_size;
    ctx.max_instances = c.max_instances;
    ctx.workers = c.workers;

    PipelineOptions opts;
    opts.manifest_path = resolve_path(dataset_root, c.manifest);
    opts.rounds = c.rounds;
    opts.thresholds = c.thresholds;
    opts.seed = c.seed;
    const PipelineResult r = run_pipeline(opts, ctx);
    std::cout << "rounds " << r.reports.size() << " manifest entries " << r.manifest.entries.size() << '\n';
    return kExitOk;
}

struct VizArgs {
    fs::path labels, calib, out;
    std::optional<fs::path> gt, image, overlay_out;
    double scale = 5.0;
};

inline int cmd_viz(const VizArgs& a) {
    const LabelSet pred = read_labels(a.labels, Provenance::pseudo);
    const CameraRig rig = load_calibration(a.calib);
    std::optional<LabelSet> gt;
    if (a.gt)
        gt = read_labels(*a.gt);
    PlotOptions opts;
    opts.pixels_per_meter = a.scale;
    write_image(a.out, plot_bev(pred, rig, gt, opts));
    if (a.image) {
        if (!a.overlay_out)
            throw InvalidArgument("viz: --image requires --overlay-out");
        Image img = read_image(*a.image);
        if (gt)
            img = overlay_boxes(img, rig, *gt, kBlack);
        img = overlay_boxes(img, rig, pred, kGreen);
        write_image(*a.overlay_out, img);
    }
    return kExitOk;
}

inline int cmd_fixture(const fs::path& out_dir, std::uint64_t seed) {
    fixture::DeskOptions opts;
    opts.seed = seed;
    const auto fx = fixture::write_desk_fixture(out_dir, opts);
    Config c;
    c.dataset_root = ".";
    c.output_root = "out";
    std::ofstream(out_dir / "config.json") << dump_config(c);
    std::cout << "wrote " << fx.manifest.generic_string() << '\n';
    return kExitOk;
}

// First "--flag" that the chosen subcommand does not define. Reported ahead of
// missing required options, which CLI11 checks first.
inline std::optional<std::string> unknown_flag(CLI::App& app, int argc, const char* const* argv) {
    CLI::App* scope = &app;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (scope == &app && arg.rfind('-', 0) != 0) {
            CLI::App* sub = app.get_subcommand_no_throw(arg);
            if (sub == nullptr)
                return std::nullopt;
            scope = sub;
            continue;
        }
        if (arg == "--")
            break;
        if (arg.rfind("--", 0) == 0) {
            const std::string name = arg.substr(0, arg.find('='));
            if (name != "--help" && scope->get_option_no_throw(name) == nullptr)
                return name;
        }
    }
    return std::nullopt;
}

}  // namespace cli

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on a usage error
/// and 2 when the inputs cannot be processed.
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    namespace fs = std::filesystem;
    CLI::App app{"roadgen: roadside scene generalization toolkit", "roadgen"};
    app.require_subcommand(1);
    std::function<int()> action;

    std::string image, calib, labels, bg_calib, out_dir, interp = "bilinear";
    auto* rect = app.add_subcommand("rectify", "warp a frame and its labels to a background rig");
    rect->add_option("--image", image, "input image (ppm/pgm)")->required();
    rect->add_option("--calib", calib, "calibration of the input frame")->required();
    rect->add_option("--labels", labels, "label file of the input frame");
    rect->add_option("--bg-calib", bg_calib, "calibration of the background rig")->required();
    rect->add_option("--out-dir", out_dir, "output directory")->required();
    rect->add_option("--interp", interp, "bilinear or nearest")->check(CLI::IsMember({"bilinear", "nearest"}));
    rect->callback([&] {
        action = [&] {
            return cli::cmd_rectify(image, calib, labels.empty() ? std::nullopt : std::optional<fs::path>(labels),
                                    bg_calib, out_dir, interp);
        };
    });

    std::vector<std::string> frames;
    std::string out;
    auto* bgc = app.add_subcommand("background", "temporal median of a frame stack");
    bgc->add_option("frames", frames, "input frames")->required();
    bgc->add_option("--out", out, "output image")->required();
    bgc->callback([&] {
        action = [&] { return cli::cmd_background({frames.begin(), frames.end()}, out); };
    });

    std::string plan;
    auto* comp = app.add_subcommand("composite", "compose synthetic samples from a plan file");
    comp->add_option("--plan", plan, "plan file")->required();
    comp->add_option("--out-dir", out_dir, "output directory")->required();
    comp->callback([&] {
        action = [&] { return cli::cmd_composite(plan, out_dir); };
    });

    std::string manifest, dataset_root;
    DetectorConfig det;
    double t_conf = kDefaultConfThreshold;
    std::uint64_t seed = 0;
    auto* pseudo = app.add_subcommand("pseudo", "pseudo-label the unlabeled split of a manifest");
    pseudo->add_option("--manifest", manifest, "dataset manifest")->required();
    pseudo->add_option("--detector", det.kind, "oracle, noisy or constant")
        ->check(CLI::IsMember({"oracle", "noisy", "constant"}));
    pseudo->add_option("--labels-dir", det.labels_dir, "ground-truth directory for mock detectors");
    pseudo->add_option("--sigma", det.sigma, "center jitter of the noisy detector (m)");
    pseudo->add_option("--conf", det.conf, "confidence of the constant detector");
    pseudo->add_option("--t-conf", t_conf, "confidence threshold");
    pseudo->add_option("--seed", seed, "detector seed");
    pseudo->add_option("--out-dir", out_dir, "output directory")->required();
    pseudo->callback([&] {
        action = [&] {
            const fs::path m(manifest);
            return cli::cmd_pseudo(m, det, m.parent_path(), t_conf, seed, out_dir);
        };
    });

    cli::BevArgs bev;
    std::string seg, params, config_for_bev;
    auto* bevc = app.add_subcommand("bev", "lift image features to a BEV grid");
    bevc->add_option("--features", bev.features, "feature tensor C x H x W")->required();
    bevc->add_option("--heights", bev.heights, "height distribution tensor D x H x W")->required();
    bevc->add_option("--calib", bev.calib, "camera calibration")->required();
    bevc->add_option("--out", bev.out, "output tensor X x Y x C")->required();
    bevc->add_option("--seg", seg, "multi-class mask tensor, channel 0 is background");
    bevc->add_option("--params", params, "fusion weights (json)");
    bevc->add_option("--t-fg", bev.t_fg, "foreground threshold");
    bevc->add_option("--stride", bev.stride, "feature stride in pixels");
    bevc->add_option("--h-min", bev.h_min, "lowest height bin edge (m)");
    bevc->add_option("--h-max", bev.h_max, "highest height bin edge (m)");
    bevc->add_option("--config", config_for_bev, "config file supplying the grid");
    bevc->callback([&] {
        if (!seg.empty())
            bev.seg = seg;
        if (!params.empty())
            bev.params = params;
        if (!config_for_bev.empty())
            bev.config = config_for_bev;
        action = [&] { return cli::cmd_bev(bev); };
    });

    std::string config;
    cli::PipelineOverrides ov;
    auto* pipe = app.add_subcommand("pipeline", "run the multi-round loop from a config file");
    pipe->add_option("--config", config, "config file")->required();
    pipe->add_option("--seed", ov.seed, "override seed");
    pipe->add_option("--rounds", ov.rounds, "override round count");
    pipe->add_option("--t-conf", ov.t_conf, "override confidence threshold");
    pipe->add_option("--t-iou", ov.t_iou, "override IoU threshold");
    pipe->add_option("--t-fg", ov.t_fg, "override foreground threshold");
    pipe->callback([&] {
        action = [&] { return cli::cmd_pipeline(config, ov); };
    });

    cli::VizArgs viz;
    std::string gt, viz_image, overlay_out;
    auto* vizc = app.add_subcommand("viz", "top-down plot of labels");
    vizc->add_option("--labels", viz.labels, "predicted or reference labels")->required();
    vizc->add_option("--calib", viz.calib, "camera calibration")->required();
    vizc->add_option("--out", viz.out, "output plot (ppm)")->required();
    vizc->add_option("--gt", gt, "ground-truth labels");
    vizc->add_option("--image", viz_image, "camera image for the overlay");
    vizc->add_option("--overlay-out", overlay_out, "output overlay image (ppm)");
    vizc->add_option("--scale", viz.scale, "pixels per meter")->check(CLI::PositiveNumber);
    vizc->callback([&] {
        if (!gt.empty())
            viz.gt = gt;
        if (!viz_image.empty())
            viz.image = viz_image;
        if (!overlay_out.empty())
            viz.overlay_out = overlay_out;
        action = [&] { return cli::cmd_viz(viz); };
    });

    std::uint64_t fixture_seed = 7;
    auto* fix = app.add_subcommand("fixture", "write the synthetic desk dataset");
    fix->add_option("--out-dir", out_dir, "output directory")->required();
    fix->add_option("--seed", fixture_seed, "scene seed");
    fix->callback([&] {
        action = [&] { return cli::cmd_fixture(out_dir, fixture_seed); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (const auto flag = cli::unknown_flag(app, argc, argv)) {
            err << "roadgen: unknown flag " << *flag << '\n';
            return kExitUsage;
        }
        err << "roadgen: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        return action ? action() : kExitUsage;
    } catch (const std::exception& e) {
        err << "roadgen: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace roadgen
