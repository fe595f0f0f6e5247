#include "objtrans/uq.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "objtrans/errors.hpp"
#include "objtrans/parallel.hpp"
#include "objtrans/rng.hpp"

namespace objtrans {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(RerunMode mode) {
    return mode == RerunMode::crop ? "crop" : "full_image";
}

RerunMode rerun_mode_from_string(const std::string& name) {
    if (name == "full_image") return RerunMode::full_image;
    if (name == "crop") return RerunMode::crop;
    throw ConfigError("unknown rerun mode '" + name + "' (expected full_image or crop)");
}

void UqConfig::validate() const {
    if (k < 2) {
        throw ConfigError("K must be at least 2");
    }
    if (!(match_iou > 0.0 && match_iou < 1.0)) {
        throw ConfigError("match_iou must lie in (0,1)");
    }
    if (min_matched_for_bbox < 1) {
        throw ConfigError("min_matched_for_bbox must be >= 1");
    }
    if (!(bbox_penalty >= 0.0)) {
        throw ConfigError("bbox_penalty must be >= 0");
    }
    if (!(crop_margin >= 0.0 && crop_margin <= 10.0)) {
        throw ConfigError("crop_margin must lie in [0,10]");
    }
    try {
        weights.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::optional<Detection> associate(const Detection& anchor, const std::vector<Detection>& run_dets,
                                   double match_iou) {
    std::optional<Detection> best;
    double best_iou = -1.0;
    for (const auto& d : run_dets) {
        if (d.class_id != anchor.class_id) {
            continue;
        }
        double iou = bbox_iou(anchor.bbox, d.bbox);
        if (iou >= match_iou && iou > best_iou) {
            best_iou = iou;
            best = d;
        }
    }
    return best;
}

std::vector<std::optional<std::size_t>> associate_all(const std::vector<Detection>& anchors,
                                                      const std::vector<Detection>& run_dets, double match_iou) {
    struct Pair {
        double iou;
        std::size_t anchor;
        std::size_t det;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        for (std::size_t d = 0; d < run_dets.size(); ++d) {
            if (anchors[a].class_id != run_dets[d].class_id) {
                continue;
            }
            double iou = bbox_iou(anchors[a].bbox, run_dets[d].bbox);
            if (iou >= match_iou) {
                pairs.push_back({iou, a, d});
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        return std::tie(y.iou, x.anchor, x.det) < std::tie(x.iou, y.anchor, y.det);
    });
    std::vector<std::optional<std::size_t>> out(anchors.size());
    std::vector<bool> taken(run_dets.size(), false);
    for (const auto& p : pairs) {
        if (out[p.anchor] || taken[p.det]) {
            continue;
        }
        out[p.anchor] = p.det;
        taken[p.det] = true;
    }
    return out;
}

UncertaintyScore score_uncertainty(const PerturbationRunSet& rs, const UqConfig& cfg) {
    if (rs.runs.size() < 2) {
        throw std::invalid_argument("score_uncertainty needs K >= 2 runs");
    }
    std::vector<double> scores;
    std::array<std::vector<double>, 4> coords;
    scores.reserve(rs.runs.size());
    for (const auto& run : rs.runs) {
        if (run.matched) {
            scores.push_back(run.matched->score);
            const auto& b = run.matched->bbox;
            coords[0].push_back(b.cx);
            coords[1].push_back(b.cy);
            coords[2].push_back(b.w);
            coords[3].push_back(b.h);
        } else {
            scores.push_back(0.0);
        }
    }

    UncertaintyScore u;
    u.n_matched_runs = static_cast<int>(coords[0].size());
    u.u_class = population_variance(scores);
    if (u.n_matched_runs < cfg.min_matched_for_bbox) {
        u.u_bbox = cfg.bbox_penalty;
        u.bbox_var.fill(cfg.bbox_penalty);
    } else {
        double sum = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            u.bbox_var[i] = population_variance(coords[i]);
            sum += u.bbox_var[i];
        }
        u.u_bbox = sum / 4;
    }
    u.u_combined = cfg.weights.combine(u.u_bbox, u.u_class, cfg.use_stddev);
    return u;
}

std::vector<Detection> anchor_pass(DetectorAdapter& adapter, const ImageFrame& image, double conf_threshold,
                                   std::uint64_t request_id) {
    DetectRequest req;
    req.request_id = request_id;
    req.image_id = image.image_id();
    req.conf_threshold = conf_threshold;
    req.image = std::make_shared<const ImageFrame>(image);
    auto resp = detect(adapter, req);
    for (auto& d : resp.detections) {
        d.source_run = -1;
    }
    return resp.detections;
}

PixelRect crop_rect(const BBox& box, double margin, std::uint32_t width, std::uint32_t height) {
    BBox padded{box.cx, box.cy, box.w * (1 + 2 * margin), box.h * (1 + 2 * margin)};
    auto m = InstanceMask::from_bbox(padded.clipped(), width, height);
    PixelRect r{width, height, 0, 0};
    for (const auto& s : m.spans()) {
        r.x0 = std::min(r.x0, s.x_begin);
        r.x1 = std::max(r.x1, s.x_end);
        r.y0 = std::min(r.y0, s.y);
        r.y1 = std::max(r.y1, s.y + 1);
    }
    return r;
}

ImageFrame crop_frame(const ImageFrame& image, const PixelRect& r) {
    ImageFrame out(r.x1 - r.x0, r.y1 - r.y0, image.image_id());
    for (auto y = r.y0; y < r.y1; ++y) {
        for (auto x = r.x0; x < r.x1; ++x) {
            out.set(x - r.x0, y - r.y0, image.at(x, y));
        }
    }
    return out;
}

BBox uncrop_box(const BBox& box, const PixelRect& r, std::uint32_t width, std::uint32_t height) {
    double cw = r.x1 - r.x0;
    double ch = r.y1 - r.y0;
    return BBox{(r.x0 + box.cx * cw) / width, (r.y0 + box.cy * ch) / height, box.w * cw / width,
                box.h * ch / height}
        .clipped();
}

namespace {

std::vector<PerturbationRunSet> collect_crop_runs(const ImageFrame& image, const std::vector<Detection>& anchors,
                                                  AdapterPool& pool, const TransformSampler& sampler,
                                                  const UqConfig& cfg, double conf_threshold, TtaTimings* timings) {
    auto runs = static_cast<std::size_t>(cfg.k);
    std::vector<PerturbationRunSet> sets(anchors.size());
    std::vector<PixelRect> rects;
    std::vector<InstanceMask> regions;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        sets[a].anchor = anchors[a];
        sets[a].runs.resize(runs);
        auto r = crop_rect(anchors[a].bbox, cfg.crop_margin, image.width(), image.height());
        rects.push_back(r);
        // the anchor region in crop pixel coordinates
        auto full = InstanceMask::from_bbox(anchors[a].bbox, image.width(), image.height());
        std::vector<Span> spans;
        for (const auto& sp : full.spans()) {
            auto xb = std::max(sp.x_begin, r.x0);
            auto xe = std::min(sp.x_end, r.x1);
            if (sp.y >= r.y0 && sp.y < r.y1 && xb < xe) {
                spans.push_back({sp.y - r.y0, xb - r.x0, xe - r.x0});
            }
        }
        regions.emplace_back(image.image_id(), static_cast<std::uint32_t>(a), anchors[a].class_id, std::move(spans));
    }

    std::size_t jobs = anchors.size() * runs;
    auto lanes = std::min(pool.size(), jobs);
    std::vector<TtaTimings> lane_times(lanes);
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
    parallel_for(lanes, static_cast<int>(lanes), [&](std::size_t lane) {
        auto& adapter = pool.at(lane);
        auto& t = lane_times[lane];
        for (std::size_t j = lane; j < jobs; j += lanes) {
            std::size_t a = j / runs;
            std::size_t k = j % runs;
            auto t0 = clock::now();
            auto frame = std::make_shared<ImageFrame>(crop_frame(image, rects[a]));
            auto params = sample_params(sampler, {image.image_id(), a, k});
            perturb_region(*frame, regions[a], params);
            DetectRequest req;
            req.request_id = j + 1;
            req.image_id = image.image_id() + "#crop" + std::to_string(a);
            frame->set_image_id(req.image_id);
            req.conf_threshold = conf_threshold;
            req.image = std::shared_ptr<const ImageFrame>(frame);
            auto t1 = clock::now();
            auto dets = detect(adapter, req).detections;
            auto t2 = clock::now();
            for (auto& d : dets) {
                d.bbox = uncrop_box(d.bbox, rects[a], image.width(), image.height());
            }
            auto& run = sets[a].runs[k];
            run.params = params;
            run.matched = associate(anchors[a], dets, cfg.match_iou);
            if (run.matched) {
                run.matched->source_run = static_cast<int>(k);
            }
            auto t3 = clock::now();
            t.perturb_s += seconds(t0, t1);
            t.detect_s += seconds(t1, t2);
            t.associate_s += seconds(t2, t3);
        }
    });
    if (timings != nullptr) {
        for (const auto& t : lane_times) {
            timings->perturb_s += t.perturb_s;
            timings->detect_s += t.detect_s;
            timings->associate_s += t.associate_s;
        }
    }
    return sets;
}

}  // namespace

std::vector<PerturbationRunSet> collect_runs(const ImageFrame& image, const std::vector<Detection>& anchors,
                                             AdapterPool& pool, const TransformSampler& sampler,
                                             const UqConfig& cfg, double conf_threshold, TtaTimings* timings) {
    std::vector<PerturbationRunSet> sets(anchors.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        sets[a].anchor = anchors[a];
        sets[a].runs.resize(static_cast<std::size_t>(cfg.k));
    }
    if (anchors.empty()) {
        return sets;
    }
    if (cfg.rerun_mode == RerunMode::crop) {
        return collect_crop_runs(image, anchors, pool, sampler, cfg, conf_threshold, timings);
    }

    std::vector<InstanceMask> regions;
    regions.reserve(anchors.size());
    for (const auto& a : anchors) {
        regions.push_back(InstanceMask::from_bbox(a.bbox, image.width(), image.height(), image.image_id()));
    }

    auto runs = static_cast<std::size_t>(cfg.k);
    auto lanes = std::min(pool.size(), runs);
    std::vector<TtaTimings> lane_times(lanes);
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
    // lane L owns adapter L and runs L, L+lanes, ...
    parallel_for(lanes, static_cast<int>(lanes), [&](std::size_t lane) {
        auto& adapter = pool.at(lane);
        auto& t = lane_times[lane];
        for (std::size_t k = lane; k < runs; k += lanes) {
            auto t0 = clock::now();
            auto frame = std::make_shared<ImageFrame>(image);
            std::vector<HsvParams> params(anchors.size());
            for (std::size_t a = 0; a < anchors.size(); ++a) {
                params[a] = sample_params(sampler, {image.image_id(), a, k});
                perturb_region(*frame, regions[a], params[a]);
            }
            DetectRequest req;
            req.request_id = k + 1;
            req.image_id = image.image_id();
            req.conf_threshold = conf_threshold;
            req.image = std::shared_ptr<const ImageFrame>(frame);
            auto t1 = clock::now();
            auto dets = detect(adapter, req).detections;
            auto t2 = clock::now();
            auto matches = associate_all(anchors, dets, cfg.match_iou);
            for (std::size_t a = 0; a < anchors.size(); ++a) {
                auto& run = sets[a].runs[k];
                run.params = params[a];
                if (matches[a]) {
                    run.matched = dets[*matches[a]];
                    run.matched->source_run = static_cast<int>(k);
                }
            }
            auto t3 = clock::now();
            t.perturb_s += seconds(t0, t1);
            t.detect_s += seconds(t1, t2);
            t.associate_s += seconds(t2, t3);
        }
    });
    if (timings != nullptr) {
        for (const auto& t : lane_times) {
            timings->perturb_s += t.perturb_s;
            timings->detect_s += t.detect_s;
            timings->associate_s += t.associate_s;
        }
    }
    return sets;
}

std::vector<AnchorUncertainty> run_tta(const ImageFrame& image, const std::vector<Detection>& anchors,
                                       AdapterPool& pool, const TransformSampler& sampler, const UqConfig& cfg,
                                       double conf_threshold, TtaTimings* timings) {
    cfg.validate();
    std::vector<AnchorUncertainty> out;
    if (anchors.empty()) {
        return out;
    }
    auto sets = collect_runs(image, anchors, pool, sampler, cfg, conf_threshold, timings);
    auto t0 = std::chrono::steady_clock::now();
    out.reserve(sets.size());
    for (const auto& rs : sets) {
        out.push_back({rs.anchor, score_uncertainty(rs, cfg)});
    }
    if (timings != nullptr) {
        timings->score_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return out;
}

ordered_json uq_record_to_json(const std::string& image_id, const std::vector<AnchorUncertainty>& results) {
    ordered_json j;
    j["image_id"] = image_id;
    j["detections"] = ordered_json::array();
    for (const auto& r : results) {
        const auto& d = r.anchor;
        const auto& u = r.uncertainty;
        ordered_json dj;
        dj["bbox"] = {d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h};
        dj["class_id"] = d.class_id;
        dj["score"] = d.score;
        dj["u_class"] = u.u_class;
        dj["u_bbox"] = u.u_bbox;
        dj["u_combined"] = u.u_combined;
        dj["n_matched_runs"] = u.n_matched_runs;
        dj["bbox_var"] = {u.bbox_var[0], u.bbox_var[1], u.bbox_var[2], u.bbox_var[3]};
        j["detections"].push_back(std::move(dj));
    }
    return j;
}

UqRecordLine uq_record_from_json(const json& j) {
    UqRecordLine line;
    try {
        line.image_id = j.at("image_id").get<std::string>();
        for (const auto& dj : j.at("detections")) {
            AnchorUncertainty a;
            const auto& b = dj.at("bbox");
            a.anchor.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                             b.at(3).get<double>()};
            a.anchor.class_id = dj.at("class_id").get<std::uint32_t>();
            a.anchor.score = dj.at("score").get<double>();
            a.uncertainty.u_class = dj.at("u_class").get<double>();
            a.uncertainty.u_bbox = dj.at("u_bbox").get<double>();
            a.uncertainty.u_combined = dj.at("u_combined").get<double>();
            a.uncertainty.n_matched_runs = dj.value("n_matched_runs", 0);
            if (dj.contains("bbox_var")) {
                for (std::size_t i = 0; i < 4; ++i) {
                    a.uncertainty.bbox_var[i] = dj["bbox_var"].at(i).get<double>();
                }
            }
            line.detections.push_back(a);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed UQ record: ") + e.what());
    }
    return line;
}

AnalyticDecomposition analytic_decomposition(const std::vector<BernoulliEntry>& table) {
    double total_w = 0;
    for (const auto& e : table) {
        total_w += e.weight;
    }
    if (table.empty() || !(total_w > 0)) {
        throw std::invalid_argument("theta table must be non-empty with positive total weight");
    }
    double m = 0;
    for (const auto& e : table) {
        m += (e.weight / total_w) * e.p;
    }
    AnalyticDecomposition a;
    for (const auto& e : table) {
        double w = e.weight / total_w;
        a.noise += w * (e.p * (1 - e.p));
        a.effect += w * ((e.p - m) * (e.p - m));
    }
    a.total = m * (1 - m);
    return a;
}

DecompositionReport decompose_variance(const MockDetectorSpec& spec, std::size_t trials, std::uint64_t seed) {
    if (spec.kind != MockKind::bernoulli) {
        throw std::invalid_argument("variance decomposition needs a bernoulli mock");
    }
    if (trials < 1000) {
        throw std::invalid_argument("decompose_variance needs at least 1000 trials");
    }
    spec.validate();
    const auto& table = spec.table;
    auto analytic = analytic_decomposition(table);

    std::vector<double> cumulative;
    double acc = 0;
    for (const auto& e : table) {
        acc += e.weight;
        cumulative.push_back(acc);
    }

    std::vector<std::size_t> n(table.size(), 0);
    std::vector<std::size_t> hits(table.size(), 0);
    std::uint64_t coin_seed = spec.seed ^ mix64(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        KeyedStream rng(seed, {0x7e7a, t});
        double u = rng.uniform() * acc;
        auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                            cumulative.begin());
        idx = std::min(idx, table.size() - 1);
        ++n[idx];
        if (MockDetector::coin(coin_seed, t, table[idx].p)) {
            ++hits[idx];
        }
    }

    DecompositionReport r;
    r.trials = trials;
    r.analytic_total = analytic.total;
    r.analytic_noise = analytic.noise;
    r.analytic_effect = analytic.effect;

    auto N = static_cast<double>(trials);
    std::size_t total_hits = 0;
    for (auto h : hits) {
        total_hits += h;
    }
    double m_hat = static_cast<double>(total_hits) / N;
    r.mc_total = m_hat * (1 - m_hat);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (n[i] == 0) {
            continue;
        }
        double f = static_cast<double>(n[i]) / N;
        double p = static_cast<double>(hits[i]) / static_cast<double>(n[i]);
        r.mc_noise += f * p * (1 - p);
        r.mc_effect += f * (p - m_hat) * (p - m_hat);
    }

    // Delta method over the 2|table| multinomial cells (theta_i, Z), evaluated
    // at the true cell probabilities. The allowance term bounds the O(1/N)
    // plug-in bias, which dominates when the first-order gradient vanishes.
    double m = 0;
    for (const auto& e : table) {
        m += (e.weight / acc) * e.p;
    }
    double sum_t = 0, sum_t2 = 0, sum_n = 0, sum_n2 = 0, sum_e = 0, sum_e2 = 0;
    for (const auto& e : table) {
        double w = e.weight / acc;
        double a = w * e.p;
        double b = w * (1 - e.p);
        double gt_a = 1 - 2 * m, gt_b = 0.0;
        double gn_a = (1 - e.p) * (1 - e.p), gn_b = e.p * e.p;
        double ge_a = 2 * e.p - e.p * e.p - 2 * m, ge_b = -e.p * e.p;
        sum_t += a * gt_a + b * gt_b;
        sum_t2 += a * gt_a * gt_a + b * gt_b * gt_b;
        sum_n += a * gn_a + b * gn_b;
        sum_n2 += a * gn_a * gn_a + b * gn_b * gn_b;
        sum_e += a * ge_a + b * ge_b;
        sum_e2 += a * ge_a * ge_a + b * ge_b * ge_b;
    }
    double allowance = static_cast<double>(table.size() + 1) / (4 * N);
    auto se = [&](double s, double s2) { return std::sqrt(std::max(0.0, s2 - s * s) / N + allowance * allowance); };
    r.se_total = se(sum_t, sum_t2);
    r.se_noise = se(sum_n, sum_n2);
    r.se_effect = se(sum_e, sum_e2);
    return r;
}

}  // namespace objtrans
