#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "objtrans/eval.hpp"
#include "oracles.hpp"

using namespace objtrans;

namespace {

ScoredRecord rec(double score, double u, Verdict v) {
    ScoredRecord r;
    r.score = score;
    r.u_combined = u;
    r.verdict = v;
    return r;
}

// n records of one verdict, all with the same score and uncertainty
void add(std::vector<ScoredRecord>& out, std::size_t n, double score, double u, Verdict v) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(rec(score, u, v));
}

std::string two_decimals(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

}  // namespace

TEST(MatchToGt, GreedyByScoreOneToOne) {
    std::vector<GroundTruthBox> gts{{{0.3, 0.3, 0.2, 0.2}, 0}, {{0.7, 0.7, 0.2, 0.2}, 1}};
    std::vector<Detection> dets{
        {{0.31, 0.3, 0.2, 0.2}, 0, 0.6, -1},  // TP but lower score than the duplicate below
        {{0.30, 0.3, 0.2, 0.2}, 0, 0.9, -1},  // claims gt 0 first
        {{0.70, 0.7, 0.2, 0.2}, 0, 0.8, -1},  // wrong class
        {{0.10, 0.9, 0.1, 0.1}, 0, 0.7, -1},  // nothing there
    };
    auto m = match_to_gt(dets, gts);
    EXPECT_EQ(m.verdicts, (std::vector<Verdict>{Verdict::fp, Verdict::tp, Verdict::fp, Verdict::fp}));
    EXPECT_EQ(m.matched_gt[1], std::optional<std::size_t>(0));
    EXPECT_EQ(m.gt_detected, (std::vector<bool>{true, false}));
    EXPECT_EQ(m.false_negatives(), 1u);
}

TEST(MatchToGt, IouThresholdIsInclusive) {
    // IoU exactly 0.5: box of half the width sharing an edge
    std::vector<GroundTruthBox> gts{{BBox::from_corners(0.0, 0.0, 0.5, 0.5), 0}};
    std::vector<Detection> dets{{BBox::from_corners(0.0, 0.0, 0.25, 0.5), 0, 0.9, -1}};
    EXPECT_EQ(match_to_gt(dets, gts, 0.5).verdicts[0], Verdict::tp);
    EXPECT_EQ(match_to_gt(dets, gts, 0.51).verdicts[0], Verdict::fp);
}

TEST(FilteredCounts, ThresholdsAndRatio) {
    std::vector<ScoredRecord> r{rec(0.9, 0.01, Verdict::tp), rec(0.3, 0.2, Verdict::tp), rec(0.5, 0.3, Verdict::fp),
                                rec(0.1, 0.0, Verdict::fp)};
    auto all = filtered_counts(r, 0.25, std::nullopt);
    EXPECT_EQ(all.tp, 2u);
    EXPECT_EQ(all.fp, 1u);
    EXPECT_EQ(all.ratio(), 2.0);
    auto f = filtered_counts(r, 0.25, 0.2);
    EXPECT_EQ(f.tp, 2u);
    EXPECT_EQ(f.fp, 0u);
    EXPECT_EQ(f.ratio(), std::numeric_limits<double>::infinity());
    EXPECT_EQ(filtered_counts(r, 0.3, 0.2).tp, 2u);  // score threshold is inclusive
}

TEST(FilteredCounts, ReproducesPublishedRatios) {
    struct Column {
        std::size_t tp, fp;
        const char* ratio;
    };
    // Each column becomes a record set with its TP/FP counts; the FP ratio
    // is read back through filtered_counts.
    for (auto [tp, fp, want] : {Column{3349, 938, "3.57"}, Column{3186, 640, "4.98"}, Column{3719, 685, "5.43"},
                                Column{4156, 908, "4.58"}}) {
        std::vector<ScoredRecord> r;
        add(r, tp, 0.5, 0.1, Verdict::tp);
        add(r, fp, 0.5, 0.1, Verdict::fp);
        add(r, 17, 0.5, 0.9, Verdict::fp);  // removed by the filter
        auto c = filtered_counts(r, 0.25, 0.146);
        EXPECT_EQ(c.tp, tp);
        EXPECT_EQ(c.fp, fp);
        EXPECT_EQ(two_decimals(c.ratio()), want);
    }
    // the remaining published column: 4818/1864 = 2.5848..., which rounds to 2.58
    std::vector<ScoredRecord> r;
    add(r, 4818, 0.5, 0.1, Verdict::tp);
    add(r, 1864, 0.5, 0.1, Verdict::fp);
    EXPECT_EQ(two_decimals(filtered_counts(r, 0.01, std::nullopt).ratio()), "2.58");
}

TEST(FilteredCounts, TighterUncertaintyThresholdNeverAddsDetections) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 100; ++t) {
        std::vector<ScoredRecord> r;
        for (int i = 0; i < 200; ++i) r.push_back(rec(u(gen), u(gen) * 0.3, u(gen) < 0.6 ? Verdict::tp : Verdict::fp));
        Counts prev = filtered_counts(r, 0.25, std::nullopt);
        for (double thr = 0.3; thr >= 0; thr -= 0.01) {
            auto c = filtered_counts(r, 0.25, thr);
            ASSERT_LE(c.tp, prev.tp);
            ASSERT_LE(c.fp, prev.fp);
            prev = c;
        }
    }
}

TEST(PrCurve, PerfectAndUselessDetectors) {
    std::vector<ScoredRecord> perfect{rec(0.9, 0, Verdict::tp), rec(0.8, 0, Verdict::tp)};
    auto grid = linear_grid(0.0, 1.0, 11);
    EXPECT_DOUBLE_EQ(pr_curve(perfect, 2, std::nullopt, grid).auc, 1.0);
    std::vector<ScoredRecord> useless{rec(0.9, 0, Verdict::fp), rec(0.8, 0, Verdict::fp)};
    EXPECT_EQ(pr_curve(useless, 2, std::nullopt, grid).auc, 0.0);
}

TEST(PrCurve, NoGroundTruthIsRejected) {
    std::vector<ScoredRecord> r{rec(0.9, 0, Verdict::fp)};
    auto grid = linear_grid(0.0, 1.0, 5);
    try {
        pr_curve(r, 0, std::nullopt, grid);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "recall undefined");
    }
    std::vector<double> unsorted{0.5, 0.1};
    EXPECT_THROW(pr_curve(r, 1, std::nullopt, unsorted), std::invalid_argument);
    EXPECT_THROW(pr_curve(r, 1, std::nullopt, std::vector<double>{}), std::invalid_argument);
}

TEST(PrCurve, MatchesBruteForceOracle) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(0, 1);
    auto grid = linear_grid(0.0, 1.0, 101);
    for (int t = 0; t < 200; ++t) {
        std::size_t n = 1 + gen() % 100;
        std::vector<ScoredRecord> r;
        std::vector<oracle::Rec> o;
        std::size_t tps = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool tp = u(gen) < 0.5;
            tps += tp;
            r.push_back(rec(u(gen), u(gen), tp ? Verdict::tp : Verdict::fp));
            o.push_back({r.back().score, r.back().u_combined, tp});
        }
        std::size_t num_gt = tps + gen() % 5 + 1;
        for (std::optional<double> thr : {std::optional<double>{}, std::optional<double>{0.5}}) {
            auto c = pr_curve(r, num_gt, thr, grid);
            ASSERT_NEAR(c.auc, oracle::pr_auc(o, num_gt, thr, grid), 1e-12);
            ASSERT_EQ(c.points.size(), grid.size());
        }
    }
}

TEST(LinearGrid, EndpointsIncluded) {
    auto g = linear_grid(0.0, 1.0, 5);
    EXPECT_EQ(g, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(Separation, MeansAndRatios) {
    std::vector<ScoredRecord> r;
    auto tp = rec(0.9, 0, Verdict::tp);
    tp.bbox_var = {1e-6, 2e-6, 3e-6, 4e-6};
    tp.u_class = 6.25e-3;
    auto fp = rec(0.4, 0, Verdict::fp);
    fp.bbox_var = {4e-6, 2e-6, 9e-6, 2e-6};
    fp.u_class = 2.6e-2;
    r = {tp, tp, fp};
    auto s = separation_stats(r);
    ASSERT_EQ(s.rows.size(), 5u);
    EXPECT_EQ(s.rows[0].metric, "x");
    EXPECT_EQ(s.rows[4].metric, "conf");
    EXPECT_DOUBLE_EQ(*s.rows[0].tp_mean, 1e-6);
    EXPECT_DOUBLE_EQ(*s.rows[0].ratio, 4.0);
    EXPECT_DOUBLE_EQ(*s.rows[3].ratio, 0.5);
    EXPECT_NEAR(*s.rows[4].ratio, 4.16, 1e-12);
    EXPECT_TRUE(s.notes.empty());
}

TEST(Separation, MissingVerdictLeavesColumnsEmpty) {
    std::vector<ScoredRecord> r{rec(0.9, 0, Verdict::tp)};
    auto s = separation_stats(r);
    EXPECT_FALSE(s.rows[0].fp_mean.has_value());
    EXPECT_FALSE(s.rows[0].ratio.has_value());
    ASSERT_EQ(s.notes.size(), 1u);
    EXPECT_NE(s.notes[0].find("no false positives"), std::string::npos);
}

TEST(Histogram, BinsByVerdictWithClosedLastBin) {
    std::vector<ScoredRecord> r{rec(0.5, 0.0, Verdict::tp), rec(0.5, 0.24, Verdict::tp), rec(0.5, 0.5, Verdict::fp),
                                rec(0.5, 1.0, Verdict::fp)};
    auto h = uncertainty_histogram(r, 4, 1.0);
    ASSERT_EQ(h.size(), 4u);
    EXPECT_EQ(h[0].tp, 2u);
    EXPECT_EQ(h[2].fp, 1u);
    EXPECT_EQ(h[3].fp, 1u);
    EXPECT_EQ(h[3].hi, 1.0);
    EXPECT_THROW(uncertainty_histogram(r, 0), std::invalid_argument);
}
