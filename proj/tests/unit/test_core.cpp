#include <gtest/gtest.h>

#include <random>

#include "objtrans/image.hpp"
#include "objtrans/parallel.hpp"
#include "objtrans/rng.hpp"
#include "objtrans/types.hpp"
#include "oracles.hpp"

using namespace objtrans;

TEST(BBoxIou, IdenticalBoxesGiveOne) {
    BBox a{0.4, 0.5, 0.2, 0.3};
    EXPECT_DOUBLE_EQ(bbox_iou(a, a), 1.0);
}

TEST(BBoxIou, DisjointBoxesGiveZero) {
    EXPECT_EQ(bbox_iou({0.1, 0.1, 0.1, 0.1}, {0.8, 0.8, 0.1, 0.1}), 0.0);
}

TEST(BBoxIou, OverlappingCornerSquaresGiveOneSeventh) {
    // (0,0)-(2,2) and (1,1)-(3,3) on a 10x10 frame: intersection 1, union 7
    auto a = BBox::from_corners(0.0, 0.0, 0.2, 0.2);
    auto b = BBox::from_corners(0.1, 0.1, 0.3, 0.3);
    EXPECT_NEAR(bbox_iou(a, b), 1.0 / 7.0, 1e-12);
}

TEST(BBoxIou, SymmetricBoundedAndMatchesOracle) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> c(0.05, 0.95), s(0.01, 0.5);
    for (int i = 0; i < 5000; ++i) {
        BBox a{c(gen), c(gen), s(gen), s(gen)};
        BBox b{c(gen), c(gen), s(gen), s(gen)};
        double ab = bbox_iou(a, b);
        EXPECT_EQ(ab, bbox_iou(b, a));
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
        EXPECT_NEAR(ab, oracle::iou({a.cx, a.cy, a.w, a.h}, {b.cx, b.cy, b.w, b.h}), 1e-12);
        EXPECT_NEAR(bbox_iou(a, a), 1.0, 1e-15);
    }
}

TEST(BBoxClip, InsideBoxIsUntouchedAndOutsideIsCut) {
    BBox inside{0.3, 0.4, 0.2, 0.2};
    EXPECT_EQ(inside.clipped(), inside);
    auto c = BBox{0.95, 0.5, 0.2, 0.2}.clipped();
    EXPECT_NEAR(c.x1(), 1.0, 1e-12);
    EXPECT_NEAR(c.x0(), 0.85, 1e-12);
    auto gone = BBox{1.5, 0.5, 0.2, 0.2}.clipped();
    EXPECT_TRUE(gone.valid());
    EXPECT_GT(gone.w, 0.0);
}

TEST(PopulationVariance, HandExamples) {
    std::vector<double> constant{0.8, 0.8, 0.8};
    EXPECT_EQ(population_variance(constant), 0.0);
    std::vector<double> two{0.0, 1.0};
    EXPECT_DOUBLE_EQ(population_variance(two), 0.25);
    std::vector<double> four{0.1, 0.2, 0.3, 0.4};
    EXPECT_NEAR(population_variance(four), 0.0125, 1e-15);
}

TEST(PopulationVariance, EmptyInputThrows) {
    std::vector<double> none;
    EXPECT_THROW(population_variance(none), std::invalid_argument);
}

TEST(PopulationVariance, MatchesTwoPassOracleAndScalesCorrectly) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> xs(2 + t % 40);
        for (auto& x : xs) x = u(gen);
        double v = population_variance(xs);
        EXPECT_NEAR(v, oracle::variance(xs), 1e-12);

        auto shifted = xs;
        for (auto& x : shifted) x += 3.25;
        EXPECT_NEAR(population_variance(shifted), v, 1e-12);

        auto scaled = xs;
        for (auto& x : scaled) x *= 7.0;
        EXPECT_NEAR(population_variance(scaled), 49.0 * v, 1e-9 * 49.0 * v + 1e-300);
    }
}

TEST(CombineWeights, ValidationAndCombination) {
    EXPECT_NO_THROW(CombineWeights{}.validate());
    EXPECT_THROW((CombineWeights{0.5, 0.6}.validate()), std::invalid_argument);
    EXPECT_THROW(CombineWeights::from_bbox_weight(1.5), std::invalid_argument);
    CombineWeights w{0.25, 0.75};
    EXPECT_DOUBLE_EQ(w.combine(0.0, 0.25), 0.1875);
    EXPECT_DOUBLE_EQ(w.combine(0.04, 0.16, true), 0.25 * 0.2 + 0.75 * 0.4);
}

TEST(HsvParams, IdentityAndValidity) {
    EXPECT_TRUE(HsvParams::identity().is_identity());
    EXPECT_TRUE(HsvParams::identity().valid());
    EXPECT_FALSE((HsvParams{0, -1, 1}.valid()));
}

TEST(KeyedStream, SameKeySameSequenceDifferentKeyDifferent) {
    KeyedStream a(1, {2, 3}), b(1, {2, 3}), c(1, {3, 2});
    for (int i = 0; i < 100; ++i) {
        auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
    KeyedStream u(9, {1});
    for (int i = 0; i < 10000; ++i) {
        double v = u.uniform();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(ImageFrame, ConstructionAndAccess) {
    ImageFrame img(3, 2, "x");
    EXPECT_EQ(img.pixels().size(), 18u);
    img.set(2, 1, {1, 2, 3});
    EXPECT_EQ(img.at(2, 1), (Rgb{1, 2, 3}));
    EXPECT_THROW(ImageFrame(2, 2, std::vector<std::uint8_t>(5), "bad"), std::invalid_argument);
}

TEST(InstanceMask, SpansAreMergedAndCounted) {
    InstanceMask m("img", 1, 0, {{0, 2, 4}, {0, 0, 2}, {1, 1, 3}, {0, 3, 5}});
    ASSERT_EQ(m.spans().size(), 2u);
    EXPECT_EQ(m.spans()[0], (Span{0, 0, 5}));
    EXPECT_EQ(m.pixel_count(), 7u);
    EXPECT_TRUE(m.contains(4, 0));
    EXPECT_FALSE(m.contains(0, 1));
    EXPECT_TRUE(m.fits(5, 2));
    EXPECT_FALSE(m.fits(4, 2));
}

TEST(InstanceMask, FromBoxCoversOutwardRoundedPixels) {
    auto m = InstanceMask::from_bbox(BBox::from_corners(0.1, 0.1, 0.35, 0.3), 10, 10);
    // x in [1, 3.5) -> pixels 1..3, y in [1, 3) -> rows 1..2
    EXPECT_EQ(m.pixel_count(), 3u * 2u);
    auto tiny = InstanceMask::from_bbox({0.55, 0.55, 1e-6, 1e-6}, 10, 10);
    EXPECT_EQ(tiny.pixel_count(), 1u);
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrowsLowestFailure) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    try {
        parallel_for(100, 4, [](std::size_t i) {
            if (i == 17 || i == 60) throw std::runtime_error("fail " + std::to_string(i));
        });
        FAIL() << "expected exception";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "fail 17");
    }
}
