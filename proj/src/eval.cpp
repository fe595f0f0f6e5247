#include "objtrans/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace objtrans {

std::size_t MatchResult::false_negatives() const {
    return static_cast<std::size_t>(std::count(gt_detected.begin(), gt_detected.end(), false));
}

MatchResult match_to_gt(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thr) {
    MatchResult r;
    r.verdicts.assign(dets.size(), Verdict::fp);
    r.matched_gt.assign(dets.size(), std::nullopt);
    r.gt_detected.assign(gts.size(), false);

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    for (auto i : order) {
        std::optional<std::size_t> best;
        double best_iou = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (r.gt_detected[g] || gts[g].class_id != dets[i].class_id) {
                continue;
            }
            double iou = bbox_iou(dets[i].bbox, gts[g].bbox);
            if (iou >= iou_thr && iou > best_iou) {
                best_iou = iou;
                best = g;
            }
        }
        if (best) {
            r.verdicts[i] = Verdict::tp;
            r.matched_gt[i] = best;
            r.gt_detected[*best] = true;
        }
    }
    return r;
}

double Counts::ratio() const {
    if (fp == 0) {
        return std::numeric_limits<double>::infinity();
    }
    return static_cast<double>(tp) / static_cast<double>(fp);
}

Counts filtered_counts(std::span<const ScoredRecord> records, double conf_thr, std::optional<double> u_thr) {
    Counts c;
    for (const auto& r : records) {
        if (r.score < conf_thr) {
            continue;
        }
        if (u_thr && !(r.u_combined <= *u_thr)) {
            continue;
        }
        (r.verdict == Verdict::tp ? c.tp : c.fp) += 1;
    }
    return c;
}

SeparationTable separation_stats(std::span<const ScoredRecord> records) {
    static constexpr const char* kMetrics[] = {"x", "y", "w", "h", "conf"};
    std::array<double, 5> tp_sum{}, fp_sum{};
    std::size_t n_tp = 0, n_fp = 0;
    for (const auto& r : records) {
        auto& sum = r.verdict == Verdict::tp ? tp_sum : fp_sum;
        (r.verdict == Verdict::tp ? n_tp : n_fp) += 1;
        for (std::size_t i = 0; i < 4; ++i) {
            sum[i] += r.bbox_var[i];
        }
        sum[4] += r.u_class;
    }
    SeparationTable t;
    if (n_tp == 0) {
        t.notes.emplace_back("no true positives; TP columns omitted");
    }
    if (n_fp == 0) {
        t.notes.emplace_back("no false positives; FP columns omitted");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        SeparationRow row{kMetrics[i], {}, {}, {}};
        if (n_tp > 0) {
            row.tp_mean = tp_sum[i] / static_cast<double>(n_tp);
        }
        if (n_fp > 0) {
            row.fp_mean = fp_sum[i] / static_cast<double>(n_fp);
        }
        if (row.tp_mean && row.fp_mean && *row.tp_mean > 0) {
            row.ratio = *row.fp_mean / *row.tp_mean;
        }
        t.rows.push_back(row);
    }
    return t;
}

PrCurve pr_curve(std::span<const ScoredRecord> records, std::size_t num_gt, std::optional<double> u_thr,
                 std::span<const double> thresholds) {
    if (num_gt == 0) {
        throw std::invalid_argument("recall undefined");
    }
    if (thresholds.empty()) {
        throw std::invalid_argument("threshold grid is empty");
    }
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw std::invalid_argument("threshold grid must be sorted");
    }
    PrCurve curve;
    for (double t : thresholds) {
        auto c = filtered_counts(records, t, u_thr);
        PrPoint p{t, 1.0, static_cast<double>(c.tp) / static_cast<double>(num_gt)};
        if (c.tp + c.fp > 0) {
            p.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
        }
        curve.points.push_back(p);
    }

    auto pts = curve.points;
    std::stable_sort(pts.begin(), pts.end(), [](const PrPoint& a, const PrPoint& b) {
        return a.recall != b.recall ? a.recall < b.recall : a.precision > b.precision;
    });
    if (pts.front().recall > 0) {
        pts.insert(pts.begin(), PrPoint{0, pts.front().precision, 0});
    }
    double area = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].recall - pts[i - 1].recall) * (pts[i].precision + pts[i - 1].precision) / 2;
    }
    curve.auc = std::clamp(area, 0.0, 1.0);
    return curve;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    if (n == 0) {
        return {};
    }
    if (n == 1) {
        return {lo};
    }
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return g;
}

std::vector<HistogramBin> uncertainty_histogram(std::span<const ScoredRecord> records, std::size_t bins,
                                                std::optional<double> max_value) {
    if (bins == 0) {
        throw std::invalid_argument("histogram needs at least one bin");
    }
    double hi = max_value.value_or(0.0);
    if (!max_value) {
        for (const auto& r : records) {
            hi = std::max(hi, r.u_combined);
        }
    }
    if (!(hi > 0)) {
        hi = 1.0;
    }
    std::vector<HistogramBin> out(bins);
    double width = hi / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        out[i].lo = width * static_cast<double>(i);
        out[i].hi = i + 1 == bins ? hi : width * static_cast<double>(i + 1);
    }
    for (const auto& r : records) {
        if (r.u_combined < 0 || r.u_combined > hi) {
            continue;
        }
        auto idx = std::min(bins - 1, static_cast<std::size_t>(r.u_combined / width));
        (r.verdict == Verdict::tp ? out[idx].tp : out[idx].fp) += 1;
    }
    return out;
}

}  // namespace objtrans
