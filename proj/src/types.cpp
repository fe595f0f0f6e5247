#include "objtrans/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace objtrans {

namespace {
constexpr double kMinExtent = 1e-9;
}

BBox BBox::from_corners(double x0, double y0, double x1, double y1) {
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

BBox BBox::clipped() const {
    if (x0() >= 0.0 && y0() >= 0.0 && x1() <= 1.0 && y1() <= 1.0 && w >= kMinExtent && h >= kMinExtent) {
        return *this;
    }
    double ax = std::clamp(x0(), 0.0, 1.0);
    double ay = std::clamp(y0(), 0.0, 1.0);
    double bx = std::clamp(x1(), 0.0, 1.0);
    double by = std::clamp(y1(), 0.0, 1.0);
    if (bx - ax < kMinExtent) {
        ax = std::min(ax, 1.0 - kMinExtent);
        bx = ax + kMinExtent;
    }
    if (by - ay < kMinExtent) {
        ay = std::min(ay, 1.0 - kMinExtent);
        by = ay + kMinExtent;
    }
    return from_corners(ax, ay, bx, by);
}

bool BBox::valid() const {
    auto finite = std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h);
    return finite && cx >= 0 && cx <= 1 && cy >= 0 && cy <= 1 && w > 0 && w <= 1 && h > 0 && h <= 1;
}

double bbox_iou(const BBox& a, const BBox& b) {
    double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
    double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
    if (iw <= 0 || ih <= 0) {
        return 0.0;
    }
    double inter = iw * ih;
    // areas from corners so a box overlaps itself with IoU exactly 1
    double area_a = (a.x1() - a.x0()) * (a.y1() - a.y0());
    double area_b = (b.x1() - b.x0()) * (b.y1() - b.y0());
    double uni = area_a + area_b - inter;
    if (uni <= 0) {
        return 0.0;
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool HsvParams::valid() const {
    return std::isfinite(hue_shift) && hue_shift >= -180.0 && hue_shift < 180.0 && sat_scale > 0 &&
           val_scale > 0 && std::isfinite(sat_scale) && std::isfinite(val_scale);
}

CombineWeights CombineWeights::from_bbox_weight(double w_bbox) {
    if (!(w_bbox >= 0.0 && w_bbox <= 1.0)) {
        throw std::invalid_argument("bbox weight must lie in [0,1]");
    }
    return {w_bbox, 1.0 - w_bbox};
}

double CombineWeights::combine(double u_bbox, double u_class, bool use_stddev) const {
    if (use_stddev) {
        return w_bbox * std::sqrt(u_bbox) + w_class * std::sqrt(u_class);
    }
    return w_bbox * u_bbox + w_class * u_class;
}

void CombineWeights::validate() const {
    if (!(w_bbox >= 0 && w_bbox <= 1 && w_class >= 0 && w_class <= 1)) {
        throw std::invalid_argument("combine weights must lie in [0,1]");
    }
    if (std::abs(w_bbox + w_class - 1.0) > 1e-9) {
        throw std::invalid_argument("combine weights must sum to 1");
    }
}

double population_variance(std::span<const double> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("no samples");
    }
    // Welford
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        ++n;
        double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    return std::max(0.0, m2 / static_cast<double>(n));
}

}  // namespace objtrans
