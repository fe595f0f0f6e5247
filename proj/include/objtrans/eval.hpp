#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "objtrans/types.hpp"

namespace objtrans {

enum class Verdict { tp, fp };

struct MatchResult {
    std::vector<Verdict> verdicts;                   // per detection, input order
    std::vector<std::optional<std::size_t>> matched_gt;  // per detection
    std::vector<bool> gt_detected;                   // per ground truth

    std::size_t false_negatives() const;
};

/// Greedy matching for one image: detections in descending score order (ties
/// by input index) each claim the unclaimed same-class ground truth with the
/// highest IoU >= iou_thr.
MatchResult match_to_gt(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                        double iou_thr = 0.5);

/// A detection with its uncertainty and evaluation verdict.
struct ScoredRecord {
    std::string image_id;
    std::uint32_t class_id = 0;
    double score = 0;
    double u_class = 0;
    double u_bbox = 0;
    double u_combined = 0;
    std::array<double, 4> bbox_var{};
    Verdict verdict = Verdict::fp;
};

struct Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;

    /// tp / fp; +infinity when fp == 0.
    double ratio() const;
};

/// Keeps records with score >= conf_thr and, when u_thr is set,
/// u_combined <= u_thr.
Counts filtered_counts(std::span<const ScoredRecord> records, double conf_thr, std::optional<double> u_thr);

struct SeparationRow {
    std::string metric;  // x, y, w, h, conf
    std::optional<double> tp_mean;
    std::optional<double> fp_mean;
    std::optional<double> ratio;  // fp_mean / tp_mean
};

struct SeparationTable {
    std::vector<SeparationRow> rows;
    std::vector<std::string> notes;
};

/// Mean per-coordinate and score variances split by verdict. A verdict with no
/// records leaves its columns empty and adds a note.
SeparationTable separation_stats(std::span<const ScoredRecord> records);

struct PrPoint {
    double threshold = 0;
    double precision = 0;
    double recall = 0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // in threshold order
    double auc = 0;
};

/// Precision/recall at each confidence threshold after optional uncertainty
/// filtering. Precision is 1 when nothing is kept. The area is the trapezoid
/// rule over the points sorted by recall (ties: higher precision first), with
/// a leading (0, p_first) point when the lowest recall is positive.
/// Throws std::invalid_argument for zero ground truths ("recall undefined") or
/// an empty / unsorted grid.
PrCurve pr_curve(std::span<const ScoredRecord> records, std::size_t num_gt, std::optional<double> u_thr,
                 std::span<const double> thresholds);

/// Evenly spaced thresholds lo, lo+step, ..., hi (inclusive, n points).
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

struct HistogramBin {
    double lo = 0;
    double hi = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
};

/// u_combined histogram split by verdict over [0, max], `bins` equal bins; the
/// last bin is closed.
std::vector<HistogramBin> uncertainty_histogram(std::span<const ScoredRecord> records, std::size_t bins,
                                                std::optional<double> max_value = std::nullopt);

}  // namespace objtrans
