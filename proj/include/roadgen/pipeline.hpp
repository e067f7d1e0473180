// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spawn.h>
#include <sys/wait.h>

#include <json.hpp>

#include "roadgen/camgeom.hpp"
#include "roadgen/composite.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"
#include "roadgen/rectify.hpp"
#include "roadgen/segmask.hpp"

extern char** environ;

namespace roadgen {

namespace fs = std::filesystem;

inline constexpr double kDefaultConfThreshold = 0.7;
inline constexpr int kDefaultRounds = 5;

// --- manifest -----------------------------------------------------------------

enum class Split { labeled, unlabeled, background, synthetic, validation, test };

inline constexpr std::array<std::string_view, 6> kSplitNames = {"labeled",   "unlabeled",  "background",
                                                                 "synthetic", "validation", "test"};

inline std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

inline std::optional<Split> parse_split(std::string_view name) {
    for (std::size_t i = 0; i < kSplitNames.size(); ++i)
        if (kSplitNames[i] == name)
            return static_cast<Split>(i);
    return std::nullopt;
}

/// Paths are relative to the directory holding the manifest unless absolute.
struct ManifestEntry {
    std::string frame_id;
    std::string image;
    std::string calib;
    std::optional<std::string> label;
    Split split = Split::unlabeled;
    std::string scene_id;
    int round_created = 0;

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    void validate() const {
        std::vector<std::string_view> ids;
        ids.reserve(entries.size());
        for (const auto& e : entries) {
            if (e.frame_id.empty())
                throw InvalidArgument("manifest: empty frame id");
            if (e.split == Split::labeled && !e.label)
                throw InvalidArgument("manifest: labeled frame '" + e.frame_id + "' has no label path");
            if (e.split == Split::background && e.label)
                throw InvalidArgument("manifest: background frame '" + e.frame_id + "' must not carry labels");
            ids.push_back(e.frame_id);
        }
        std::sort(ids.begin(), ids.end());
        const auto dup = std::adjacent_find(ids.begin(), ids.end());
        if (dup != ids.end())
            throw InvalidArgument("manifest: duplicate frame id '" + std::string(*dup) + "'");
    }

    std::vector<const ManifestEntry*> with_split(Split s) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : entries)
            if (e.split == s)
                out.push_back(&e);
        return out;
    }

    bool operator==(const DatasetManifest&) const = default;
};

inline nlohmann::json to_json(const ManifestEntry& e) {
    nlohmann::json j{{"frame_id", e.frame_id},   {"image", e.image},          {"calib", e.calib},
                     {"split", to_string(e.split)}, {"scene_id", e.scene_id}, {"round_created", e.round_created}};
    j["label"] = e.label ? nlohmann::json(*e.label) : nlohmann::json(nullptr);
    return j;
}

inline std::string format_manifest(const DatasetManifest& m) {
    std::string out;
    for (const auto& e : m.entries) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline DatasetManifest parse_manifest(std::string_view text) {
    DatasetManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            for (const auto& [key, value] : j.items())
                if (key != "frame_id" && key != "image" && key != "calib" && key != "label" && key != "split" &&
                    key != "scene_id" && key != "round_created")
                    throw ParseError("unknown manifest field '" + key + "'", line_no, 1);
            ManifestEntry e;
            e.frame_id = j.at("frame_id").get<std::string>();
            e.image = j.at("image").get<std::string>();
            e.calib = j.at("calib").get<std::string>();
            if (j.contains("label") && !j.at("label").is_null())
                e.label = j.at("label").get<std::string>();
            const auto split = parse_split(j.at("split").get<std::string>());
            if (!split)
                throw ParseError("unknown split '" + j.at("split").get<std::string>() + "'", line_no, 1);
            e.split = *split;
            e.scene_id = j.value("scene_id", std::string{});
            e.round_created = j.value("round_created", 0);
            m.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(std::string("manifest: ") + ex.what(), line_no, 1);
        }
    }
    m.validate();
    return m;
}

inline DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write manifest " + path.string());
    out << format_manifest(m);
}

inline fs::path resolve_path(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

/// Re-expresses every path of `m` (relative to `from`) relative to `to`.
inline DatasetManifest rebase_manifest(const DatasetManifest& m, const fs::path& from, const fs::path& to) {
    const fs::path to_abs = fs::absolute(to).lexically_normal();
    const auto rebase = [&](const std::string& p) {
        const fs::path abs = fs::absolute(resolve_path(from, p)).lexically_normal();
        const fs::path rel = abs.lexically_relative(to_abs);
        return (rel.empty() ? abs : rel).generic_string();
    };
    DatasetManifest out = m;
    for (auto& e : out.entries) {
        e.image = rebase(e.image);
        e.calib = rebase(e.calib);
        if (e.label)
            e.label = rebase(*e.label);
    }
    return out;
}

// --- detectors ----------------------------------------------------------------

struct DetectorInput {
    std::string frame_id;
    const Image& image;
    const CameraRig& rig;
};

/// A 3D detector: predicted boxes (with confidences) for one frame.
class Detector {
public:
    virtual ~Detector() = default;
    virtual LabelSet predict(const DetectorInput& input) = 0;

    virtual std::vector<LabelSet> predict_batch(std::span<const DetectorInput> inputs) {
        std::vector<LabelSet> out;
        out.reserve(inputs.size());
        for (const auto& in : inputs) out.push_back(predict(in));
        return out;
    }
};

/// Ground-truth lookup by frame id; frames without an entry have no objects.
using GroundTruth = std::function<LabelSet(const std::string& frame_id)>;

inline GroundTruth ground_truth_from_map(std::map<std::string, LabelSet> labels) {
    return [labels = std::move(labels)](const std::string& id) {
        const auto it = labels.find(id);
        return it == labels.end() ? LabelSet{id, {}, Provenance::manual} : it->second;
    };
}

inline GroundTruth ground_truth_from_directory(fs::path dir) {
    return [dir = std::move(dir)](const std::string& id) {
        const fs::path p = dir / (id + ".txt");
        if (!fs::exists(p))
            return LabelSet{id, {}, Provenance::manual};
        LabelSet l = read_labels(p);
        l.frame_id = id;
        return l;
    };
}

/// Returns ground truth with confidence 1.
class OracleDetector final : public Detector {
public:
    explicit OracleDetector(GroundTruth gt) : gt_(std::move(gt)) {}
    LabelSet predict(const DetectorInput& input) override {
        LabelSet out = gt_(input.frame_id);
        out.frame_id = input.frame_id;
        for (auto& b : out.boxes) b.conf = 1.0;
        return out;
    }

private:
    GroundTruth gt_;
};

/// Returns ground truth with every confidence fixed to `conf`.
class ConstantConfidenceDetector final : public Detector {
public:
    ConstantConfidenceDetector(GroundTruth gt, double conf) : gt_(std::move(gt)), conf_(conf) {}
    LabelSet predict(const DetectorInput& input) override {
        LabelSet out = gt_(input.frame_id);
        out.frame_id = input.frame_id;
        for (auto& b : out.boxes) b.conf = conf_;
        return out;
    }

private:
    GroundTruth gt_;
    double conf_;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Box-Muller on the raw engine output so results do not depend on the standard library.
inline double standard_normal(std::mt19937_64& rng) {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;
    const double u2 = static_cast<double>(rng() >> 11) * kScale;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

/// Ground truth with Gaussian center jitter; confidence is the footprint IoU between
/// the jittered and the true box. Deterministic per (seed, frame id).
class NoisyOracleDetector final : public Detector {
public:
    NoisyOracleDetector(GroundTruth gt, double sigma, std::uint64_t seed)
        : gt_(std::move(gt)), sigma_(sigma), seed_(seed) {}

    LabelSet predict(const DetectorInput& input) override {
        LabelSet truth = gt_(input.frame_id);
        LabelSet out{input.frame_id, {}, Provenance::manual};
        std::mt19937_64 rng(seed_ ^ detail::fnv1a(input.frame_id));
        for (const auto& b : truth.boxes) {
            Box3D p = b;
            p.x += sigma_ * detail::standard_normal(rng);
            p.y += sigma_ * detail::standard_normal(rng);
            p.conf = bev_iou(p, b);
            out.boxes.push_back(p);
        }
        return out;
    }

private:
    GroundTruth gt_;
    double sigma_;
    std::uint64_t seed_;
};

// --- trainer hook -------------------------------------------------------------

struct TrainerInvocation {
    fs::path manifest;
    int round = 0;
    fs::path out;
};

/// Returns the trainer's exit status; 0 means success.
using TrainerHook = std::function<int(const TrainerInvocation&)>;

/// Runs `argv_prefix --manifest <path> --round <n> --out <path>` as a child process.
inline TrainerHook command_trainer(std::vector<std::string> argv_prefix) {
    return [argv_prefix = std::move(argv_prefix)](const TrainerInvocation& inv) -> int {
        if (argv_prefix.empty())
            throw InvalidArgument("trainer: empty command");
        std::vector<std::string> args = argv_prefix;
        args.insert(args.end(), {"--manifest", inv.manifest.string(), "--round", std::to_string(inv.round), "--out",
                                 inv.out.string()});
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        pid_t pid = 0;
        if (posix_spawnp(&pid, argv[0], nullptr, nullptr, argv.data(), environ) != 0)
            return 127;
        int status = 0;
        if (waitpid(pid, &status, 0) < 0)
            return 127;
        return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    };
}

/// Trainer stand-in that only records which manifest it was handed.
inline int noop_trainer(const TrainerInvocation& inv) {
    std::ofstream out(inv.out);
    if (!out)
        return 1;
    out << inv.manifest.filename().generic_string() << '\n';
    return 0;
}

// --- rounds -------------------------------------------------------------------

struct Thresholds {
    double t_conf = kDefaultConfThreshold;
    double t_iou = kDefaultIouThreshold;
    double t_fg = kDefaultForegroundThreshold;
    bool operator==(const Thresholds&) const = default;
};

struct RoundState {
    int round_index = 1;
    int max_rounds = kDefaultRounds;
    std::string detector_ref;
    DatasetManifest manifest;
    Thresholds thresholds;
    std::uint64_t seed = 0;

    void validate() const {
        if (round_index < 1 || round_index > max_rounds)
            throw InvalidArgument("round state: round index out of range");
        for (double t : {thresholds.t_conf, thresholds.t_iou, thresholds.t_fg})
            if (!(t > 0.0 && t < 1.0))
                throw InvalidArgument("round state: thresholds must lie in (0, 1)");
        manifest.validate();
    }
};

struct RoundReport {
    int round = 0;
    std::size_t unlabeled_frames = 0;
    std::size_t skipped_frames = 0;
    std::size_t raw_predictions = 0;
    std::size_t pseudo_labels = 0;
    std::size_t rectified_labels = 0;
    std::size_t rejected_by_iou = 0;
    std::size_t rejected_invalid = 0;
    std::size_t composited_samples = 0;
    std::size_t synthetic_instances = 0;

    bool operator==(const RoundReport&) const = default;
};

inline nlohmann::json to_json(const RoundReport& r) {
    return {{"round", r.round},
            {"unlabeled_frames", r.unlabeled_frames},
            {"skipped_frames", r.skipped_frames},
            {"raw_predictions", r.raw_predictions},
            {"pseudo_labels", r.pseudo_labels},
            {"rectified_labels", r.rectified_labels},
            {"rejected_by_iou", r.rejected_by_iou},
            {"rejected_invalid", r.rejected_invalid},
            {"composited_samples", r.composited_samples},
            {"synthetic_instances", r.synthetic_instances}};
}

using DetectorFactory = std::function<std::shared_ptr<Detector>(const std::string& detector_ref)>;
using Logger = std::function<void(const std::string&)>;

inline void log_to_stderr(const std::string& msg) { std::clog << "roadgen: " << msg << '\n'; }

/// Everything a round needs besides its state. Manifest paths resolve against `output_root`.
struct PipelineContext {
    fs::path output_root;
    DetectorFactory detectors;
    std::shared_ptr<const InstanceSegmenter> segmenter = std::make_shared<BoxFillSegmenter>();
    TrainerHook trainer = noop_trainer;
    std::size_t batch_size = 4;
    std::size_t max_instances = 64;
    Interpolation interpolation = Interpolation::bilinear;
    unsigned workers = 1;
    Logger log = log_to_stderr;
};

struct PseudoLabelResult {
    std::vector<LabelSet> labels;  // one per processed unlabeled frame, manifest order
    std::vector<const ManifestEntry*> frames;
    std::size_t raw_predictions = 0;
    std::size_t skipped = 0;
};

/// Runs the detector on every unlabeled frame, keeps boxes above t_conf and, when
/// `out_dir` is given, writes one label file per frame. Frames that fail to load or
/// predict are logged and skipped.
inline PseudoLabelResult pseudo_label(const DatasetManifest& manifest, const fs::path& base, Detector* detector,
                                      double t_conf, const std::optional<fs::path>& out_dir = std::nullopt,
                                      const Logger& log = log_to_stderr) {
    PseudoLabelResult out;
    const auto unlabeled = manifest.with_split(Split::unlabeled);
    if (unlabeled.empty())
        return out;
    if (detector == nullptr)
        throw DetectorUnavailable();
    if (out_dir)
        fs::create_directories(*out_dir);
    for (const ManifestEntry* e : unlabeled) {
        try {
            const Image image = read_image(resolve_path(base, e->image));
            const CameraRig rig = load_calibration(resolve_path(base, e->calib));
            const LabelSet raw = detector->predict({e->frame_id, image, rig});
            raw.validate();
            LabelSet kept = filter_by_conf(raw, t_conf);
            kept.frame_id = e->frame_id;
            out.raw_predictions += raw.size();
            if (out_dir)
                write_labels(*out_dir / (e->frame_id + ".txt"), kept);
            out.labels.push_back(std::move(kept));
            out.frames.push_back(e);
        } catch (const std::exception& ex) {
            ++out.skipped;
            log("skipping frame '" + e->frame_id + "': " + ex.what());
        }
    }
    return out;
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::string round_dir_name(int round) { return "round_" + std::to_string(round); }

}  // namespace detail

struct RoundResult {
    RoundState next;
    RoundReport report;
};

/// One self-training round: pseudo-label the unlabeled split, rectify every
/// pseudo-labeled frame into one background rig per scene, composite synthetic
/// frames per seeded batch plan, append them to the manifest and hand
/// labeled + this round's synthetic frames to the trainer. On trainer failure the
/// manifest on disk is left at its pre-round snapshot.
inline RoundResult run_round(const RoundState& state, const PipelineContext& ctx) {
    state.validate();
    const int round = state.round_index;
    const fs::path& root = ctx.output_root;
    const fs::path round_dir = root / detail::round_dir_name(round);
    const fs::path synth_dir = round_dir / "synthetic";
    fs::remove_all(round_dir);
    fs::create_directories(synth_dir);
    write_manifest(round_dir / "manifest_snapshot.jsonl", state.manifest);

    RoundReport report;
    report.round = round;
    report.unlabeled_frames = state.manifest.with_split(Split::unlabeled).size();

    std::shared_ptr<Detector> detector;
    if (report.unlabeled_frames > 0 && ctx.detectors)
        detector = ctx.detectors(state.detector_ref);
    const PseudoLabelResult pseudo =
        pseudo_label(state.manifest, root, detector.get(), state.thresholds.t_conf, round_dir / "pseudo", ctx.log);
    report.skipped_frames = pseudo.skipped;
    report.raw_predictions = pseudo.raw_predictions;
    for (const auto& l : pseudo.labels) report.pseudo_labels += l.size();

    // One background per scene, seeded choice among that scene's backgrounds.
    std::map<std::string, std::vector<const ManifestEntry*>> backgrounds;
    for (const ManifestEntry* e : state.manifest.with_split(Split::background)) backgrounds[e->scene_id].push_back(e);
    std::mt19937_64 rng(detail::mix_seed(state.seed, static_cast<std::uint64_t>(round)));

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < pseudo.labels.size(); ++i)
        if (!pseudo.labels[i].empty())
            active.push_back(i);

    DatasetManifest next_manifest = state.manifest;
    DatasetManifest train_manifest;
    for (const auto& e : state.manifest.entries)
        if (e.split == Split::labeled)
            train_manifest.entries.push_back(e);

    std::mutex segment_mutex;
    for (const auto& [scene, candidates] : backgrounds) {
        const ManifestEntry* bg_entry = candidates[detail::uniform_index(rng, candidates.size())];
        const std::uint64_t plan_seed = rng();
        BackgroundFrame bg{read_image(resolve_path(root, bg_entry->image)),
                           load_calibration(resolve_path(root, bg_entry->calib))};
        bg.validate();
        if (active.empty())
            continue;

        std::vector<std::optional<CompositeSource>> sources(active.size());
        std::vector<std::string> failures(active.size());
        detail::parallel_for(active.size(), ctx.workers, [&](std::size_t n) {
            const std::size_t i = active[n];
            const ManifestEntry* e = pseudo.frames[i];
            try {
                const Image image = read_image(resolve_path(root, e->image));
                const CameraRig rig = load_calibration(resolve_path(root, e->calib));
                RectifiedFrame frame = rectify_frame(image, rig, pseudo.labels[i], bg.rig, ctx.interpolation);
                std::vector<BoxPrompt> prompts;
                for (const auto& b : frame.labels.boxes) {
                    const auto box2d = project_box_2d(b, bg.rig);
                    prompts.push_back({box2d.value_or(Box2D{}), b.category});
                }
                std::vector<InstanceMask> masks;
                if (ctx.segmenter->concurrent_safe()) {
                    masks = ctx.segmenter->segment(frame.image, prompts);
                } else {
                    std::lock_guard lock(segment_mutex);
                    masks = ctx.segmenter->segment(frame.image, prompts);
                }
                sources[n] = CompositeSource{e->frame_id, std::move(frame), std::move(masks)};
            } catch (const std::exception& ex) {
                failures[n] = ex.what();
            }
        });

        std::vector<CompositeSource> ready;
        for (std::size_t n = 0; n < active.size(); ++n) {
            if (!failures[n].empty()) {
                ++report.skipped_frames;
                ctx.log("skipping frame '" + pseudo.frames[active[n]]->frame_id + "' for scene '" + scene +
                        "': " + failures[n]);
                continue;
            }
            report.rectified_labels += sources[n]->frame.labels.size();
            ready.push_back(std::move(*sources[n]));
        }

        std::vector<LabelSet> per_frame;
        for (const auto& s : ready) per_frame.push_back(s.frame.labels);
        const auto plans = plan_batches(per_frame, ctx.batch_size, plan_seed);
        const ComposeOptions opts{state.thresholds.t_iou, ctx.max_instances};
        for (std::size_t p = 0; p < plans.size(); ++p) {
            std::vector<CompositeSource> batch;
            for (std::size_t idx : plans[p].frames) batch.push_back(ready[idx]);
            char suffix[16];
            std::snprintf(suffix, sizeof suffix, "%04zu", p);
            const std::string id = "r" + std::to_string(round) + "_" + scene + "_" + suffix;
            const CompositeSample sample = compose(bg, batch, opts, id);
            report.rejected_by_iou += sample.stats.rejected_by_iou;
            report.rejected_invalid += sample.stats.rejected_invalid;
            report.synthetic_instances += sample.labels.size();
            ++report.composited_samples;

            write_image(synth_dir / (id + ".ppm"), sample.image);
            write_labels(synth_dir / (id + ".txt"), sample.labels);
            write_mask(synth_dir / (id + "_mask.pgm"), sample.combined_mask);
            const fs::path rel = fs::path(detail::round_dir_name(round)) / "synthetic";
            ManifestEntry entry{id,
                                (rel / (id + ".ppm")).generic_string(),
                                bg_entry->calib,
                                (rel / (id + ".txt")).generic_string(),
                                Split::synthetic,
                                scene,
                                round};
            next_manifest.entries.push_back(entry);
            train_manifest.entries.push_back(std::move(entry));
        }
    }
    next_manifest.validate();

    const fs::path train_path = round_dir / "train_manifest.jsonl";
    write_manifest(train_path, rebase_manifest(train_manifest, root, round_dir));
    const fs::path detector_out = round_dir / "detector.ref";
    const int status = ctx.trainer(TrainerInvocation{train_path, round, detector_out});
    if (status != 0)
        throw TrainerHookFailed("trainer exited with status " + std::to_string(status) + " in round " +
                                std::to_string(round));

    std::ofstream(round_dir / "report.json") << to_json(report).dump(2) << '\n';
    write_manifest(root / "manifest.jsonl", next_manifest);

    RoundState next = state;
    next.round_index = round + 1;
    next.detector_ref = (fs::path(detail::round_dir_name(round)) / "detector.ref").generic_string();
    next.manifest = std::move(next_manifest);
    return {std::move(next), report};
}

struct PipelineOptions {
    fs::path manifest_path;
    int rounds = kDefaultRounds;
    Thresholds thresholds;
    std::uint64_t seed = 0;
    std::string initial_detector_ref;
};

struct PipelineResult {
    DatasetManifest manifest;
    std::vector<RoundReport> reports;
};

/// Copies the input manifest into the output root (paths rebased) and runs the
/// configured number of rounds. Reports are appended to `round_report.jsonl` as
/// rounds finish, so a failing round leaves the last good state on disk.
inline PipelineResult run_pipeline(const PipelineOptions& opts, const PipelineContext& ctx) {
    if (opts.rounds < 1)
        throw InvalidArgument("pipeline: rounds must be at least 1");
    fs::create_directories(ctx.output_root);
    const DatasetManifest input = read_manifest(opts.manifest_path);
    RoundState state{1, opts.rounds, opts.initial_detector_ref,
                     rebase_manifest(input, opts.manifest_path.parent_path(), ctx.output_root), opts.thresholds,
                     opts.seed};
    write_manifest(ctx.output_root / "manifest.jsonl", state.manifest);
    const fs::path report_path = ctx.output_root / "round_report.jsonl";
    std::ofstream(report_path, std::ios::trunc).close();

    PipelineResult result;
    while (state.round_index <= opts.rounds) {
        RoundResult r = run_round(state, ctx);
        std::ofstream(report_path, std::ios::app) << to_json(r.report).dump() << '\n';
        result.reports.push_back(r.report);
        state = std::move(r.next);
    }
    result.manifest = std::move(state.manifest);
    return result;
}

}  // namespace roadgen
