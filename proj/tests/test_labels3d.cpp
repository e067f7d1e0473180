// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "roadgen/labels3d.hpp"

using namespace roadgen;

namespace {

CameraRig default_rig() {
    return make_rig({1000, 1000, 768, 432, 0}, 0.0, deg_to_rad(10.0), 0.0, {0, 0, 5.0}, 1536, 864);
}

Box3D car(double x, double y, double yaw = 0.0, double conf = 1.0) {
    return {x, y, 0.75, 1.5, 1.8, 4.5, yaw, conf, Category::car};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) / 9007199254740992.0;
}

Box3D random_box(std::mt19937_64& rng) {
    return {uniform(rng, -20, 20), uniform(rng, -5, 60), uniform(rng, -1, 2), uniform(rng, 0.5, 3),
            uniform(rng, 0.4, 2.5), uniform(rng, 0.4, 8), uniform(rng, -3.1, 3.1), uniform(rng, 0, 1),
            static_cast<Category>(rng() % kCategoryNames.size())};
}

}  // namespace

TEST(FilterByConf, StrictThreshold) {
    const LabelSet in{"f", {car(0, 10, 0, 0.9), car(5, 10, 0, 0.7), car(-5, 10, 0, 0.69)}, Provenance::manual};
    const LabelSet out = filter_by_conf(in, 0.7);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out.boxes[0].conf, 0.9);
    EXPECT_EQ(out.provenance, Provenance::pseudo);
}

TEST(FilterByConf, EmptyAndAllBelow) {
    EXPECT_TRUE(filter_by_conf(LabelSet{"f", {}, Provenance::manual}, 0.7).empty());
    const LabelSet low{"f", {car(0, 10, 0, 0.2), car(5, 10, 0, 0.7)}, Provenance::manual};
    EXPECT_TRUE(filter_by_conf(low, 0.7).empty());
}

TEST(BevIou, IdenticalIsOne) {
    EXPECT_EQ(bev_iou(car(1, 2, 0.3), car(1, 2, 0.3)), 1.0);
}

TEST(BevIou, FarApartIsZero) {
    EXPECT_EQ(bev_iou(car(0, 0), car(0, 10)), 0.0);
}

TEST(BevIou, RotatedPairMatchesRasterOracle) {
    const Box3D a = car(0, 0, 0.0);
    const Box3D b = car(1.0, 0, std::numbers::pi / 6.0);
    EXPECT_NEAR(bev_iou(a, b), oracle::raster_iou(a, b), 1e-3);
}

TEST(BevIou, SymmetricBoundedAndMatchesRaster) {
    std::mt19937_64 rng(21);
    for (int n = 0; n < 60; ++n) {
        Box3D a = random_box(rng), b = random_box(rng);
        b.x = a.x + uniform(rng, -3, 3);
        b.y = a.y + uniform(rng, -3, 3);
        const double ab = bev_iou(a, b);
        EXPECT_NEAR(ab, bev_iou(b, a), 1e-12);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
        EXPECT_NEAR(ab, oracle::raster_iou(a, b, 5e-3), 5e-3);
    }
}

TEST(FilterByIou, DefaultThreshold) { EXPECT_EQ(kDefaultIouThreshold, 0.25); }

TEST(FilterByIou, SingletonUnchanged) {
    const LabelSet one{"f", {car(0, 10)}, Provenance::pseudo};
    EXPECT_EQ(filter_by_iou(one, 0.25), one);
}

TEST(FilterByIou, BothCollidingBoxesRemoved) {
    // shift along the length axis so IoU(A, B) = 0.3: overlap o with o / (2*4.5 - o) = 0.3
    const double o = 0.3 * 9.0 / 1.3;
    const Box3D a = car(0, 0), b = car(4.5 - o, 0), c = car(0, 20);
    ASSERT_NEAR(bev_iou(a, b), 0.3, 1e-12);
    const LabelSet out = filter_by_iou({"f", {a, b, c}, Provenance::pseudo}, 0.25);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out.boxes[0], c);
}

TEST(FilterByIou, MatchesPairwiseOracle) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        LabelSet in{"f", {}, Provenance::pseudo};
        for (int n = 0; n < 25; ++n) {
            Box3D b = random_box(rng);
            b.x = uniform(rng, -6, 6);
            b.y = uniform(rng, 0, 12);
            in.boxes.push_back(b);
        }
        const auto keep = oracle::iou_survivors(in.boxes, 0.25, &bev_iou);
        const LabelSet out = filter_by_iou(in, 0.25);
        ASSERT_EQ(out.size(), keep.size());
        for (std::size_t k = 0; k < keep.size(); ++k) EXPECT_EQ(out.boxes[k], in.boxes[keep[k]]);
    }
}

TEST(ProjectBox2d, BehindCameraIsNotVisible) {
    EXPECT_FALSE(project_box_2d(car(0, -20), default_rig()));
}

TEST(ProjectBox2d, OnAxisBoxIsCentered) {
    const CameraRig rig = make_rig({800, 800, 400, 300, 0}, 0.0, 0.0, 0.0, {0, 0, 5}, 800, 600);
    const Box3D b{0, 25, 5, 1.5, 1.8, 1.8, 0, 1, Category::car};
    const auto box = project_box_2d(b, rig);
    ASSERT_TRUE(box);
    EXPECT_NEAR(box->center().x(), 400.0, 1e-9);
    EXPECT_NEAR(box->center().y(), 300.0, 1e-9);
}

TEST(ProjectBox2d, MatchesCornerOracle) {
    const CameraRig rig = default_rig();
    const Box3D b = car(0, 20);
    const auto box = project_box_2d(b, rig);
    const auto o = oracle::box_2d(b, rig);
    ASSERT_TRUE(box && o);
    EXPECT_NEAR(box->u_min, o->u0, 0.5);
    EXPECT_NEAR(box->v_min, o->v0, 0.5);
    EXPECT_NEAR(box->u_max, o->u1, 0.5);
    EXPECT_NEAR(box->v_max, o->v1, 0.5);
}

TEST(InImageFilter, CenteredBoxesKept) {
    const LabelSet in{"f", {car(0, 20), car(2, 30), car(-3, 40)}, Provenance::pseudo};
    EXPECT_EQ(in_image_filter(in, default_rig()), in);
}

TEST(InImageFilter, BehindDropped) {
    const LabelSet in{"f", {car(0, 20), car(0, -20)}, Provenance::pseudo};
    EXPECT_EQ(in_image_filter(in, default_rig()).size(), 1u);
}

TEST(InImageFilter, MatchesOracleVerdicts) {
    std::mt19937_64 rng(4);
    const CameraRig rig = default_rig();
    LabelSet in{"f", {}, Provenance::pseudo};
    for (int n = 0; n < 400; ++n) {
        Box3D b = random_box(rng);
        b.x = uniform(rng, -60, 60);
        b.y = uniform(rng, -10, 80);
        in.boxes.push_back(b);
    }
    const LabelSet out = in_image_filter(in, rig);
    LabelSet expect{"f", {}, Provenance::pseudo};
    for (const auto& b : in.boxes)
        if (oracle::visible(b, rig))
            expect.boxes.push_back(b);
    EXPECT_EQ(out, expect);
    EXPECT_GT(out.size(), 20u);
    EXPECT_LT(out.size(), in.size());
}

TEST(LabelFiles, EmptyFileIsEmptySet) {
    const auto p = std::filesystem::temp_directory_path() / "roadgen_empty_labels.txt";
    std::ofstream(p).close();
    const LabelSet l = read_labels(p);
    EXPECT_TRUE(l.empty());
    EXPECT_EQ(l.frame_id, "roadgen_empty_labels");
    std::filesystem::remove(p);
}

TEST(LabelFiles, RandomRoundTripIsExact) {
    std::mt19937_64 rng(31);
    const auto p = std::filesystem::temp_directory_path() / "roadgen_rt.txt";
    for (int trial = 0; trial < 20; ++trial) {
        LabelSet in{"roadgen_rt", {}, Provenance::manual};
        for (int n = 0; n < 12; ++n) in.boxes.push_back(random_box(rng));
        write_labels(p, in);
        EXPECT_EQ(read_labels(p), in);
    }
    std::filesystem::remove(p);
}

TEST(LabelFiles, HandWrittenRowsParse) {
    const std::string text =
        "car 0 0 -10 -1 -1 -1 -1 1.5 1.8 4.5 2.25 30.5 0.75 0.5 0.95\n"
        "pedestrian 0 0 -10 -1 -1 -1 -1 1.7 0.6 0.6 -3 12 0.85 -1.25\n";
    const LabelSet l = parse_labels(text, "hand");
    ASSERT_EQ(l.size(), 2u);
    EXPECT_EQ(l.boxes[0], (Box3D{2.25, 30.5, 0.75, 1.5, 1.8, 4.5, 0.5, 0.95, Category::car}));
    EXPECT_EQ(l.boxes[1], (Box3D{-3, 12, 0.85, 1.7, 0.6, 0.6, -1.25, 1.0, Category::pedestrian}));
}

TEST(LabelFiles, MalformedRowReportsPosition) {
    try {
        parse_labels("car 0 0 -10 -1 -1 -1 -1 1.5 1.8 4.5 2 3\n", "bad");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
    EXPECT_THROW(parse_labels("lorry 0 0 -10 -1 -1 -1 -1 1.5 1.8 4.5 2 3 0.5 0 0.9\n", "bad"), ParseError);
    EXPECT_THROW(parse_labels("car 0 0 -10 -1 -1 -1 -1 -1.5 1.8 4.5 2 3 0.5 0 0.9\n", "bad"), Error);
}

TEST(Box3D, YawIsNormalized) {
    const LabelSet l = parse_labels("car 0 0 -10 -1 -1 -1 -1 1.5 1.8 4.5 0 10 0.75 4.0 1\n", "y");
    EXPECT_GT(l.boxes[0].yaw, -std::numbers::pi);
    EXPECT_LE(l.boxes[0].yaw, std::numbers::pi);
    EXPECT_NEAR(l.boxes[0].yaw, 4.0 - 2 * std::numbers::pi, 1e-12);
}
