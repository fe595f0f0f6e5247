#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace objtrans {

/// Axis-aligned box in normalized center-size form: every field is a fraction
/// of the image extent.
struct BBox {
    double cx = 0.5;
    double cy = 0.5;
    double w = 1.0;
    double h = 1.0;

    double x0() const { return cx - w / 2; }
    double y0() const { return cy - h / 2; }
    double x1() const { return cx + w / 2; }
    double y1() const { return cy + h / 2; }
    double area() const { return w * h; }

    static BBox from_corners(double x0, double y0, double x1, double y1);

    /// Intersection with the unit square. A box that collapses to zero extent
    /// keeps a minimal positive width/height so the type invariants hold.
    BBox clipped() const;

    bool valid() const;

    friend bool operator==(const BBox&, const BBox&) = default;
};

double bbox_iou(const BBox& a, const BBox& b);

struct Detection {
    BBox bbox;
    std::uint32_t class_id = 0;
    double score = 0.0;
    int source_run = -1;  // -1 marks the unperturbed anchor pass

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthBox {
    BBox bbox;
    std::uint32_t class_id = 0;

    friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// One object-level color transformation. Hue shifts add (wrapping), the two
/// scales multiply and clamp.
struct HsvParams {
    double hue_shift = 0.0;
    double sat_scale = 1.0;
    double val_scale = 1.0;

    static constexpr HsvParams identity() { return {}; }
    bool is_identity() const { return hue_shift == 0.0 && sat_scale == 1.0 && val_scale == 1.0; }
    bool valid() const;

    friend bool operator==(const HsvParams&, const HsvParams&) = default;
};

struct CombineWeights {
    double w_bbox = 0.25;
    double w_class = 0.75;

    /// Builds weights from the bbox share alone; throws std::invalid_argument
    /// outside [0,1].
    static CombineWeights from_bbox_weight(double w_bbox);

    /// Throws std::invalid_argument unless both lie in [0,1] and sum to 1 within 1e-9.
    void validate() const;

    /// w_bbox*u_bbox + w_class*u_class, or the same over square roots.
    double combine(double u_bbox, double u_class, bool use_stddev = false) const;
};

struct UncertaintyScore {
    double u_class = 0.0;
    double u_bbox = 0.0;
    double u_combined = 0.0;
    int n_matched_runs = 0;
    // Per-coordinate variances (cx, cy, w, h) behind u_bbox.
    std::array<double, 4> bbox_var{};
};

/// Population variance (divide by n). Throws std::invalid_argument("no samples")
/// on empty input.
double population_variance(std::span<const double> xs);

}  // namespace objtrans
