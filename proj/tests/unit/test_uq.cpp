#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

#include "objtrans/errors.hpp"
#include "objtrans/mock_detector.hpp"
#include "objtrans/synthetic.hpp"
#include "objtrans/uq.hpp"
#include "oracles.hpp"

using namespace objtrans;

namespace {

Detection det(double cx, double cy, double w, double h, std::uint32_t cls, double score) {
    return Detection{{cx, cy, w, h}, cls, score, -1};
}

PerturbationRunSet run_set(const std::vector<std::optional<Detection>>& matches) {
    PerturbationRunSet rs;
    rs.anchor = det(0.5, 0.5, 0.2, 0.2, 0, 0.9);
    for (const auto& m : matches) rs.runs.push_back({HsvParams::identity(), m});
    return rs;
}

struct Scene {
    ImageFrame image;
    MockDetectorSpec spec;
};

// One flat object of the given hue on a noisy background, planted under the
// image id so the mock reports it.
Scene hue_scene(MockKind kind, double hue, double sharpness = 1.0) {
    std::vector<SyntheticObject> objs{{{0.5, 0.5, 0.4, 0.4}, 0, hue}};
    Scene s{render_scene(48, 48, "scene", 1, objs), {}};
    s.spec.kind = kind;
    s.spec.preferred_hue = hue;
    s.spec.sharpness = sharpness;
    s.spec.scenes["scene"] = {PlantedObject{{0.5, 0.5, 0.4, 0.4}, 0, std::nullopt, false, std::nullopt}};
    return s;
}

AdapterPool mock_pool(const MockDetectorSpec& spec, std::size_t size) {
    auto d = std::make_shared<const MockDetector>(spec);
    return AdapterPool(size, [d](std::size_t) { return std::make_unique<MockAdapter>(d); });
}

TransformSampler hue_only(double range, std::uint64_t seed) {
    TransformSampler s;
    s.hue_range = range;
    s.sat_range = {1, 1};
    s.val_range = {1, 1};
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Associate, PicksSameClassHighestIouAboveThreshold) {
    auto anchor = det(0.5, 0.5, 0.2, 0.2, 1, 0.9);
    std::vector<Detection> run{det(0.5, 0.5, 0.2, 0.2, 2, 0.95), det(0.52, 0.5, 0.2, 0.2, 1, 0.6),
                               det(0.505, 0.5, 0.2, 0.2, 1, 0.4)};
    auto m = associate(anchor, run, 0.5);
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(m->score, 0.4);
    EXPECT_FALSE(associate(anchor, {det(0.8, 0.8, 0.2, 0.2, 1, 0.9)}, 0.5).has_value());
    EXPECT_FALSE(associate(anchor, {}, 0.5).has_value());
}

TEST(AssociateAll, OneToOneGreedyByIou) {
    std::vector<Detection> anchors{det(0.30, 0.5, 0.2, 0.2, 0, 0.9), det(0.34, 0.5, 0.2, 0.2, 0, 0.8)};
    // a single run detection overlapping both: it goes to the closer anchor
    std::vector<Detection> run{det(0.345, 0.5, 0.2, 0.2, 0, 0.7)};
    auto m = associate_all(anchors, run, 0.5);
    EXPECT_FALSE(m[0].has_value());
    ASSERT_TRUE(m[1].has_value());
    EXPECT_EQ(*m[1], 0u);
}

TEST(ScoreUncertainty, WorkedExamples) {
    UqConfig cfg;
    // present at 1.0 in one run, absent in the other: scores {1, 0}
    auto u = score_uncertainty(run_set({det(0.5, 0.5, 0.2, 0.2, 0, 1.0), std::nullopt}), cfg);
    EXPECT_DOUBLE_EQ(u.u_class, 0.25);
    EXPECT_EQ(u.u_bbox, 0.25);  // fewer than two matched runs
    EXPECT_DOUBLE_EQ(u.u_combined, 0.25 * 0.25 + 0.75 * 0.25);
    EXPECT_EQ(u.n_matched_runs, 1);

    auto v = score_uncertainty(run_set({det(0.5, 0.5, 0.2, 0.2, 0, 0.0001), std::nullopt}), cfg);
    EXPECT_NEAR(v.u_class, 0.0001 * 0.0001 / 4, 1e-18);

    auto stable = score_uncertainty(run_set({det(0.5, 0.5, 0.2, 0.2, 0, 0.8), det(0.5, 0.5, 0.2, 0.2, 0, 0.8),
                                             det(0.5, 0.5, 0.2, 0.2, 0, 0.8)}),
                                    cfg);
    EXPECT_EQ(stable.u_class, 0.0);
    EXPECT_EQ(stable.u_bbox, 0.0);
    EXPECT_EQ(stable.u_combined, 0.0);

    EXPECT_THROW(score_uncertainty(run_set({std::nullopt}), cfg), std::invalid_argument);
}

TEST(ScoreUncertainty, AllRunsMissingGivesZeroClassVariance) {
    UqConfig cfg;
    auto u = score_uncertainty(run_set({std::nullopt, std::nullopt, std::nullopt}), cfg);
    EXPECT_EQ(u.u_class, 0.0);
    EXPECT_EQ(u.u_bbox, cfg.bbox_penalty);
    EXPECT_EQ(u.n_matched_runs, 0);
}

TEST(ScoreUncertainty, PerCoordinateMeansCombine) {
    double u_bbox = (4.02e-6 + 2.98e-6 + 7.25e-6 + 9.44e-6) / 4;
    EXPECT_NEAR(u_bbox, 5.9225e-6, 1e-18);
    CombineWeights w{0.25, 0.75};
    double u = w.combine(u_bbox, 6.26e-3);
    EXPECT_NEAR(u, 0.25 * 5.9225e-6 + 0.75 * 6.26e-3, 1e-15);
    EXPECT_NEAR(u, 4.6965e-3, 5e-8);  // the quoted value carries five significant figures
}

TEST(ScoreUncertainty, MatchesBruteForceOracle) {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u01(0, 1), jitter(-0.02, 0.02);
    UqConfig cfg;
    for (int t = 0; t < 1000; ++t) {
        int k = 2 + static_cast<int>(gen() % 31);
        std::vector<std::optional<Detection>> matches;
        std::vector<oracle::Run> runs;
        for (int i = 0; i < k; ++i) {
            if (u01(gen) < 0.3) {
                matches.push_back(std::nullopt);
                runs.push_back({false, 0, {}});
            } else {
                auto d = det(0.5 + jitter(gen), 0.5 + jitter(gen), 0.2 + jitter(gen), 0.2 + jitter(gen), 0, u01(gen));
                matches.push_back(d);
                runs.push_back({true, d.score, {d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h}});
            }
        }
        cfg.weights = CombineWeights::from_bbox_weight(u01(gen));
        auto got = score_uncertainty(run_set(matches), cfg);
        auto want = oracle::uncertainty(runs, cfg.weights.w_bbox, cfg.weights.w_class, 2, 0.25);
        ASSERT_NEAR(got.u_class, want.u_class, 1e-12);
        ASSERT_NEAR(got.u_bbox, want.u_bbox, 1e-12);
        ASSERT_NEAR(got.u_combined, want.u, 1e-12);
        ASSERT_LE(got.u_class, 0.25);
    }
}

TEST(ScoreUncertainty, StddevCombination) {
    UqConfig cfg;
    cfg.use_stddev = true;
    auto u = score_uncertainty(run_set({det(0.5, 0.5, 0.2, 0.2, 0, 1.0), det(0.5, 0.5, 0.2, 0.2, 0, 0.0)}), cfg);
    EXPECT_DOUBLE_EQ(u.u_combined, 0.75 * 0.5);
}

TEST(UqConfig, Validation) {
    UqConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.k = 1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.match_iou = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.crop_margin = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(rerun_mode_from_string("tiles"), ConfigError);
}

TEST(RunTta, OracleStableGivesExactlyZero) {
    for (int k : {2, 8, 32}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto s = hue_scene(MockKind::oracle_stable, 90);
            auto pool = mock_pool(s.spec, 2);
            UqConfig cfg;
            cfg.k = k;
            auto anchors = anchor_pass(pool.at(0), s.image, 0.25);
            ASSERT_EQ(anchors.size(), 1u);
            auto res = run_tta(s.image, anchors, pool, TransformSampler::inference_defaults(seed), cfg, 0.25);
            ASSERT_EQ(res.size(), 1u);
            EXPECT_EQ(res[0].uncertainty.u_class, 0.0);
            EXPECT_EQ(res[0].uncertainty.u_bbox, 0.0);
            EXPECT_EQ(res[0].uncertainty.u_combined, 0.0);
            EXPECT_EQ(res[0].uncertainty.n_matched_runs, k);
            EXPECT_EQ(pool.total_calls(), static_cast<std::uint64_t>(1 + k));
        }
    }
}

TEST(RunTta, HueSensitiveDetectorShowsClassVariance) {
    auto s = hue_scene(MockKind::hue_sensitive, 200);
    auto pool = mock_pool(s.spec, 1);
    UqConfig cfg;
    auto anchors = anchor_pass(pool.at(0), s.image, 0.01);
    ASSERT_EQ(anchors.size(), 1u);
    auto res = run_tta(s.image, anchors, pool, hue_only(30, 5), cfg, 0.01);
    EXPECT_GT(res[0].uncertainty.u_class, 0.0);
    EXPECT_EQ(res[0].uncertainty.u_bbox, 0.0);
}

TEST(RunTta, SharperHueResponseGivesMoreVariance) {
    double prev = -1;
    for (double sharpness : {1.0, 2.0, 3.0}) {
        auto s = hue_scene(MockKind::hue_sensitive, 200, sharpness);
        auto pool = mock_pool(s.spec, 1);
        UqConfig cfg;
        cfg.k = 16;
        auto anchors = anchor_pass(pool.at(0), s.image, 0.001);
        auto res = run_tta(s.image, anchors, pool, hue_only(30, 11), cfg, 0.001);
        EXPECT_GT(res[0].uncertainty.u_class, prev) << sharpness;
        prev = res[0].uncertainty.u_class;
    }
}

TEST(RunTta, NoAnchorsMeansNoDetectorCalls) {
    MockDetectorSpec spec;
    auto pool = mock_pool(spec, 2);
    UqConfig cfg;
    auto res = run_tta(ImageFrame(16, 16, "empty"), {}, pool, TransformSampler::inference_defaults(1), cfg, 0.25);
    EXPECT_TRUE(res.empty());
    EXPECT_EQ(pool.total_calls(), 0u);
}

TEST(RunTta, ResultsIndependentOfPoolSize) {
    MockDetectorSpec spec;
    spec.kind = MockKind::fragile_fp;
    spec.seed = 8;
    spec.decoys_per_image = 5;
    auto objs = random_objects(3, "img", 4, 2);
    auto img = render_scene(96, 64, "img", 3, objs);
    for (const auto& o : objs) spec.scenes["img"].push_back({o.bbox, o.class_id, std::nullopt, false, std::nullopt});
    UqConfig cfg;
    std::vector<nlohmann::ordered_json> outs;
    for (std::size_t jobs : {1u, 4u}) {
        auto pool = mock_pool(spec, jobs);
        auto anchors = anchor_pass(pool.at(0), img, 0.2);
        ASSERT_FALSE(anchors.empty());
        outs.push_back(uq_record_to_json("img", run_tta(img, anchors, pool, TransformSampler::inference_defaults(4), cfg, 0.2)));
    }
    EXPECT_EQ(outs[0].dump(), outs[1].dump());
}

TEST(RunTta, FragileDecoysVaryWhileStableObjectsDoNot) {
    MockDetectorSpec spec;
    spec.kind = MockKind::fragile_fp;
    spec.seed = 2;
    spec.decoys_per_image = 6;
    std::vector<SyntheticObject> objs{{{0.25, 0.5, 0.3, 0.4}, 0, 30}};
    auto img = render_scene(64, 64, "img", 7, objs);
    spec.scenes["img"] = {PlantedObject{objs[0].bbox, 0, 0.9, false, std::nullopt}};
    auto pool = mock_pool(spec, 1);
    UqConfig cfg;
    auto anchors = anchor_pass(pool.at(0), img, 0.05);
    auto res = run_tta(img, anchors, pool, TransformSampler::inference_defaults(1), cfg, 0.05);
    std::size_t stable = 0, fragile = 0;
    for (const auto& r : res) {
        if (r.anchor.score == 0.9 && bbox_iou(r.anchor.bbox, objs[0].bbox) == 1.0) {
            EXPECT_EQ(r.uncertainty.u_combined, 0.0);
            ++stable;
        } else {
            EXPECT_GT(r.uncertainty.u_combined, 0.0);
            ++fragile;
        }
    }
    EXPECT_EQ(stable, 1u);
    EXPECT_GT(fragile, 0u);
}

TEST(CropMode, OneCallPerAnchorAndRunWithBoxesMappedBack) {
    std::vector<SyntheticObject> objs{{{0.3, 0.3, 0.2, 0.2}, 0, 40}, {{0.7, 0.6, 0.3, 0.2}, 1, 220}};
    auto img = render_scene(100, 80, "img", 2, objs);
    MockDetectorSpec spec;
    for (const auto& o : objs) spec.scenes["img"].push_back({o.bbox, o.class_id, 0.8, false, std::nullopt});
    UqConfig cfg;
    cfg.k = 4;
    cfg.rerun_mode = RerunMode::crop;
    // plant each object in its own crop, in crop-normalized coordinates
    for (std::size_t a = 0; a < objs.size(); ++a) {
        auto r = crop_rect(objs[a].bbox, cfg.crop_margin, 100, 80);
        double cw = r.x1 - r.x0, ch = r.y1 - r.y0;
        BBox local{(objs[a].bbox.cx * 100 - r.x0) / cw, (objs[a].bbox.cy * 80 - r.y0) / ch,
                   objs[a].bbox.w * 100 / cw, objs[a].bbox.h * 80 / ch};
        spec.scenes["img#crop" + std::to_string(a)] = {PlantedObject{local.clipped(), objs[a].class_id, 0.8, false, std::nullopt}};
    }
    auto pool = mock_pool(spec, 2);
    auto anchors = anchor_pass(pool.at(0), img, 0.25);
    ASSERT_EQ(anchors.size(), 2u);
    std::sort(anchors.begin(), anchors.end(), [](const Detection& a, const Detection& b) { return a.bbox.cx < b.bbox.cx; });
    auto res = run_tta(img, anchors, pool, TransformSampler::inference_defaults(3), cfg, 0.25);
    EXPECT_EQ(pool.total_calls(), 1u + 2u * 4u);
    for (const auto& r : res) {
        EXPECT_EQ(r.uncertainty.n_matched_runs, 4);
        EXPECT_EQ(r.uncertainty.u_class, 0.0);
        EXPECT_LT(r.uncertainty.u_bbox, 1e-20);
    }
}

TEST(CropGeometry, RectAndUncropAreInverse) {
    auto r = crop_rect({0.5, 0.5, 0.2, 0.2}, 0.25, 100, 100);
    EXPECT_EQ(r.x0, 35u);
    EXPECT_EQ(r.x1, 65u);
    auto edge = crop_rect({0.02, 0.98, 0.04, 0.04}, 1.0, 100, 100);
    EXPECT_EQ(edge.x0, 0u);
    EXPECT_EQ(edge.y1, 100u);
    auto back = uncrop_box({0.5, 0.5, 1.0, 1.0}, r, 100, 100);
    EXPECT_NEAR(back.cx, 0.5, 1e-12);
    EXPECT_NEAR(back.w, 0.3, 1e-12);
    ImageFrame img(10, 10, "x");
    img.set(4, 5, {9, 8, 7});
    auto c = crop_frame(img, {3, 4, 6, 7});
    EXPECT_EQ(c.width(), 3u);
    EXPECT_EQ(c.at(1, 1), (Rgb{9, 8, 7}));
}

TEST(UqRecord, JsonRoundTrip) {
    AnchorUncertainty a{det(0.25, 0.5, 0.125, 0.3, 2, 0.875), {}};
    a.uncertainty.u_class = 0.01;
    a.uncertainty.u_bbox = 2.5e-6;
    a.uncertainty.u_combined = 0.0075;
    a.uncertainty.n_matched_runs = 7;
    a.uncertainty.bbox_var = {1e-6, 2e-6, 3e-6, 4e-6};
    auto j = uq_record_to_json("img_7", {a});
    auto back = uq_record_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.image_id, "img_7");
    ASSERT_EQ(back.detections.size(), 1u);
    EXPECT_EQ(back.detections[0].anchor.bbox, a.anchor.bbox);
    EXPECT_EQ(back.detections[0].anchor.score, 0.875);
    EXPECT_EQ(back.detections[0].uncertainty.u_combined, 0.0075);
    EXPECT_EQ(back.detections[0].uncertainty.n_matched_runs, 7);
    EXPECT_EQ(back.detections[0].uncertainty.bbox_var, a.uncertainty.bbox_var);
}

// Variance decomposition over a finite theta table.

TEST(Decomposition, WorkedExample) {
    auto a = analytic_decomposition({{-10, 0.9, 1}, {10, 0.5, 1}});
    EXPECT_NEAR(a.total, 0.21, 1e-12);
    EXPECT_NEAR(a.noise, 0.17, 1e-12);
    EXPECT_NEAR(a.effect, 0.04, 1e-12);
}

TEST(Decomposition, DegenerateTables) {
    auto flat = analytic_decomposition({{-10, 0.3, 1}, {0, 0.3, 2}, {10, 0.3, 1}});
    EXPECT_EQ(flat.effect, 0.0);
    EXPECT_NEAR(flat.noise, flat.total, 1e-15);
    auto certain = analytic_decomposition({{-10, 0.0, 1}, {10, 1.0, 1}});
    EXPECT_EQ(certain.noise, 0.0);
    EXPECT_EQ(certain.effect, certain.total);
    EXPECT_THROW(analytic_decomposition({}), std::invalid_argument);
}

TEST(Decomposition, DyadicTablesSatisfyIdentityExactly) {
    std::mt19937_64 gen(1);
    for (int t = 0; t < 200; ++t) {
        std::vector<BernoulliEntry> table;
        std::size_t n = 1u << (gen() % 3);  // 1, 2 or 4 equally weighted entries
        for (std::size_t i = 0; i < n; ++i) {
            table.push_back({static_cast<double>(i), static_cast<double>(gen() % 17) / 16.0, 1.0});
        }
        auto a = analytic_decomposition(table);
        ASSERT_EQ(a.noise + a.effect, a.total);
    }
}

TEST(Decomposition, RandomTablesSatisfyIdentityToRounding) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 1000; ++t) {
        std::vector<BernoulliEntry> table(1 + gen() % 8);
        for (auto& e : table) e = {u(gen) * 60 - 30, u(gen), 0.1 + u(gen)};
        auto a = analytic_decomposition(table);
        ASSERT_NEAR(a.noise + a.effect, a.total, 1e-15);
    }
}

TEST(Decomposition, MonteCarloRequiresBernoulliAndEnoughTrials) {
    MockDetectorSpec spec;
    spec.kind = MockKind::bernoulli;
    spec.table = {{0, 0.5, 1}};
    EXPECT_THROW(decompose_variance(spec, 999, 1), std::invalid_argument);
    spec.kind = MockKind::oracle_stable;
    EXPECT_THROW(decompose_variance(spec, 5000, 1), std::invalid_argument);
}

TEST(Decomposition, StandardErrorsAreCalibrated) {
    // z-scores of the three estimates across seeds: mean near 0, spread near 1
    MockDetectorSpec spec;
    spec.kind = MockKind::bernoulli;
    spec.seed = 5;
    spec.table = {{-20, 0.85, 1}, {0, 0.6, 2}, {20, 0.3, 1}};
    const int seeds = 200;
    for (int term = 0; term < 3; ++term) {
        double s = 0, s2 = 0, worst = 0;
        for (int seed = 0; seed < seeds; ++seed) {
            auto r = decompose_variance(spec, 20000, static_cast<std::uint64_t>(seed));
            double mc[] = {r.mc_total, r.mc_noise, r.mc_effect};
            double an[] = {r.analytic_total, r.analytic_noise, r.analytic_effect};
            double se[] = {r.se_total, r.se_noise, r.se_effect};
            double z = (mc[term] - an[term]) / se[term];
            s += z;
            s2 += z * z;
            worst = std::max(worst, std::abs(z));
        }
        double mean = s / seeds, sd = std::sqrt(s2 / seeds - mean * mean);
        EXPECT_LT(std::abs(mean), 0.35) << term;
        EXPECT_GT(sd, 0.6) << term;
        EXPECT_LT(sd, 1.3) << term;
        EXPECT_LT(worst, 4.5) << term;
    }
}

TEST(Decomposition, SameSeedSameEstimate) {
    MockDetectorSpec spec;
    spec.kind = MockKind::bernoulli;
    spec.table = {{-15, 0.9, 1}, {15, 0.5, 1}};
    auto a = decompose_variance(spec, 10000, 3);
    auto b = decompose_variance(spec, 10000, 3);
    EXPECT_EQ(a.mc_total, b.mc_total);
    EXPECT_EQ(a.mc_noise, b.mc_noise);
    EXPECT_EQ(a.mc_effect, b.mc_effect);
}
