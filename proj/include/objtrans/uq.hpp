#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "objtrans/detector.hpp"
#include "objtrans/image.hpp"
#include "objtrans/mock_detector.hpp"
#include "objtrans/object_transform.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

/// What the detector sees in a perturbation run: the whole frame with every
/// anchor region perturbed in place (one call per run), or a crop around a
/// single anchor (one call per anchor and run).
enum class RerunMode { full_image, crop };

std::string to_string(RerunMode mode);
RerunMode rerun_mode_from_string(const std::string& name);

struct UqConfig {
    int k = 8;
    double match_iou = 0.5;
    CombineWeights weights{};
    double u_threshold = 0.146;
    int min_matched_for_bbox = 2;
    double bbox_penalty = 0.25;
    // Combine standard deviations instead of variances. Off by default; when
    // on, u_combined = w_bbox*sqrt(u_bbox) + w_class*sqrt(u_class).
    bool use_stddev = false;
    RerunMode rerun_mode = RerunMode::full_image;
    double crop_margin = 0.25;  // crop mode: padding per side, fraction of the anchor box size

    /// Throws ConfigError when k < 2, match_iou outside (0,1), or weights invalid.
    void validate() const;
};

struct PerturbationRun {
    HsvParams params;
    std::optional<Detection> matched;
};

/// The K re-detections gathered around one anchor detection.
struct PerturbationRunSet {
    Detection anchor;
    std::vector<PerturbationRun> runs;
};

/// Same-class detection with the highest IoU to the anchor, if that IoU
/// reaches match_iou.
std::optional<Detection> associate(const Detection& anchor, const std::vector<Detection>& run_dets,
                                   double match_iou);

/// One-to-one greedy association of several anchors against one run: pairs
/// are claimed in descending IoU order (ties: lower anchor index, then lower
/// detection index). Result[i] indexes into run_dets.
std::vector<std::optional<std::size_t>> associate_all(const std::vector<Detection>& anchors,
                                                      const std::vector<Detection>& run_dets, double match_iou);

/// Score variance with absent runs counted as score 0, mean box-coordinate
/// variance over matched runs (bbox_penalty below min_matched_for_bbox), and
/// their weighted combination. Throws std::invalid_argument for fewer than two runs.
UncertaintyScore score_uncertainty(const PerturbationRunSet& rs, const UqConfig& cfg);

struct AnchorUncertainty {
    Detection anchor;
    UncertaintyScore uncertainty;
};

/// Wall-clock seconds spent per stage, summed over runs (and over lanes when
/// runs execute concurrently).
struct TtaTimings {
    double perturb_s = 0;
    double detect_s = 0;
    double associate_s = 0;
    double score_s = 0;
};

/// Detects on the unperturbed frame and tags results as anchors.
std::vector<Detection> anchor_pass(DetectorAdapter& adapter, const ImageFrame& image, double conf_threshold,
                                   std::uint64_t request_id = 0);

/// For each run k, perturbs every anchor's box region with its own params,
/// runs the detector once on the whole frame, and associates the results
/// back to the anchors. Runs are spread over the pool and merged by run index.
/// In crop mode each (anchor, run) pair is a separate call on the padded
/// anchor crop; returned boxes are mapped back to frame coordinates.
std::vector<PerturbationRunSet> collect_runs(const ImageFrame& image, const std::vector<Detection>& anchors,
                                             AdapterPool& pool, const TransformSampler& sampler,
                                             const UqConfig& cfg, double conf_threshold,
                                             TtaTimings* timings = nullptr);

std::vector<AnchorUncertainty> run_tta(const ImageFrame& image, const std::vector<Detection>& anchors,
                                       AdapterPool& pool, const TransformSampler& sampler, const UqConfig& cfg,
                                       double conf_threshold, TtaTimings* timings = nullptr);

/// Pixel rectangle [x0, x1) x [y0, y1) around a box padded by `margin` of its
/// size on each side, clipped to the frame. Never empty.
struct PixelRect {
    std::uint32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};
PixelRect crop_rect(const BBox& box, double margin, std::uint32_t width, std::uint32_t height);
ImageFrame crop_frame(const ImageFrame& image, const PixelRect& r);
/// Maps a box normalized to the crop back to frame-normalized coordinates.
BBox uncrop_box(const BBox& box, const PixelRect& r, std::uint32_t width, std::uint32_t height);

/// JSON-lines record for one image.
nlohmann::ordered_json uq_record_to_json(const std::string& image_id, const std::vector<AnchorUncertainty>& results);

struct UqRecordLine {
    std::string image_id;
    std::vector<AnchorUncertainty> detections;
};
UqRecordLine uq_record_from_json(const nlohmann::json& j);

/// Analytic and Monte Carlo estimates of the three terms of
/// Var(Z) = E_theta[Var(Z | theta)] + Var_theta(P(Z = 1 | theta)).
struct DecompositionReport {
    double analytic_total = 0;
    double analytic_noise = 0;
    double analytic_effect = 0;
    double mc_total = 0;
    double mc_noise = 0;
    double mc_effect = 0;
    // standard errors of the Monte Carlo estimates (delta method plus a
    // second-order allowance)
    double se_total = 0;
    double se_noise = 0;
    double se_effect = 0;
    std::size_t trials = 0;
};

struct AnalyticDecomposition {
    double total = 0;
    double noise = 0;
    double effect = 0;
};

/// Closed form over a finite theta table (weights normalized).
AnalyticDecomposition analytic_decomposition(const std::vector<BernoulliEntry>& table);

/// Draws theta from the table's weights and Z from the bernoulli mock's coin,
/// `trials` times. Throws std::invalid_argument for trials < 1000 or a
/// non-bernoulli spec.
DecompositionReport decompose_variance(const MockDetectorSpec& spec, std::size_t trials, std::uint64_t seed);

}  // namespace objtrans
