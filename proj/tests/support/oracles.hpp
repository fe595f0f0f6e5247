// Independent reference implementations used only by tests. They are written
// from the textbook definitions and deliberately share no code with the library.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Explicit mean, then sum of squared deviations over n.
inline double variance(const std::vector<double>& xs) {
    long double sum = 0;
    for (double x : xs) sum += x;
    long double mean = sum / xs.size();
    long double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return static_cast<double>(ss / xs.size());
}

struct Box {
    double cx, cy, w, h;
};

inline double iou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.cx + a.w / 2, b.cx + b.w / 2) - std::max(a.cx - a.w / 2, b.cx - b.w / 2));
    double iy = std::max(0.0, std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2));
    double inter = ix * iy;
    double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// Uncertainty of one run set: score list with absent runs as 0, box variance
// over present runs only.
struct Run {
    bool present;
    double score;
    Box box;
};

struct Uncertainty {
    double u_class, u_bbox, u;
};

inline Uncertainty uncertainty(const std::vector<Run>& runs, double w_bbox, double w_class, int min_matched,
                               double penalty) {
    std::vector<double> scores, xs, ys, ws, hs;
    for (const auto& r : runs) {
        scores.push_back(r.present ? r.score : 0.0);
        if (r.present) {
            xs.push_back(r.box.cx);
            ys.push_back(r.box.cy);
            ws.push_back(r.box.w);
            hs.push_back(r.box.h);
        }
    }
    Uncertainty u{};
    u.u_class = variance(scores);
    if (static_cast<int>(xs.size()) < min_matched) {
        u.u_bbox = penalty;
    } else {
        u.u_bbox = (variance(xs) + variance(ys) + variance(ws) + variance(hs)) / 4;
    }
    u.u = w_bbox * u.u_bbox + w_class * u.u_class;
    return u;
}

// Hexcone RGB -> HSV written from the piecewise textbook formula.
struct Hsv {
    double h, s, v;
};

inline Hsv rgb_to_hsv(int r8, int g8, int b8) {
    double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    double d = mx - mn;
    Hsv o{0, mx == 0 ? 0 : d / mx, mx};
    if (d == 0) return o;
    if (mx == r) o.h = 60 * std::fmod((g - b) / d + 6, 6.0);
    else if (mx == g) o.h = 60 * ((b - r) / d + 2);
    else o.h = 60 * ((r - g) / d + 4);
    if (o.h >= 360) o.h -= 360;
    return o;
}

struct Rec {
    double score;
    double u;
    bool tp;
};

// PR curve area: kept = score >= t and (no filter or u <= u_thr); precision
// is 1 with nothing kept; points sorted by recall (ties: precision high
// first); a (0, p_first) point leads when the smallest recall is positive.
inline double pr_auc(const std::vector<Rec>& recs, std::size_t num_gt, std::optional<double> u_thr,
                     const std::vector<double>& thresholds) {
    std::vector<std::pair<double, double>> pts;  // (recall, precision)
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (const auto& r : recs) {
            if (r.score >= t && (!u_thr || r.u <= *u_thr)) (r.tp ? tp : fp) += 1;
        }
        double precision = tp + fp == 0 ? 1.0 : tp / (tp + fp);
        pts.push_back({tp / static_cast<double>(num_gt), precision});
    }
    std::sort(pts.begin(), pts.end(), [](auto a, auto b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
    });
    if (pts.front().first > 0) pts.insert(pts.begin(), {0.0, pts.front().second});
    double area = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2;
    }
    return area;
}

// Exhaustive calibration search. u = w*u_bbox + (1-w)*u_class; thresholds are
// nearest-rank quantiles at j/(n-1) (rank rounded to nearest), deduplicated,
// as midpoints plus the largest.
struct CalRec {
    double u_bbox, u_class;
    bool tp;
};

struct CalPick {
    double w_bbox = -1, u_th = -1, retention = -1, removal = -1;
    bool feasible = false;
};

inline std::vector<double> quantile_thresholds(std::vector<double> u, std::size_t n) {
    std::sort(u.begin(), u.end());
    std::vector<double> q;
    for (std::size_t j = 0; j < n; ++j) {
        double pos = n == 1 ? static_cast<double>(u.size() - 1)
                            : static_cast<double>(j) * static_cast<double>(u.size() - 1) / static_cast<double>(n - 1);
        q.push_back(u[static_cast<std::size_t>(std::llround(pos))]);
    }
    std::vector<double> distinct;
    for (double v : q) {
        if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
    }
    std::vector<double> out;
    for (std::size_t i = 1; i < distinct.size(); ++i) out.push_back((distinct[i - 1] + distinct[i]) / 2);
    out.push_back(distinct.back());
    return out;
}

inline CalPick calibrate(const std::vector<CalRec>& recs, const std::vector<double>& weights, std::size_t n_q,
                         double floor) {
    double n_tp = 0, n_fp = 0;
    for (const auto& r : recs) (r.tp ? n_tp : n_fp) += 1;
    // all candidate points, then one sort by the documented preference order
    std::vector<CalPick> all;
    for (double w : weights) {
        std::vector<double> u;
        for (const auto& r : recs) u.push_back(w * r.u_bbox + (1 - w) * r.u_class);
        for (double t : quantile_thresholds(u, n_q)) {
            double ktp = 0, kfp = 0;
            for (std::size_t i = 0; i < recs.size(); ++i) {
                if (u[i] <= t) (recs[i].tp ? ktp : kfp) += 1;
            }
            CalPick p{w, t, ktp / n_tp, (n_fp - kfp) / n_fp, ktp / n_tp >= floor};
            all.push_back(p);
        }
    }
    std::vector<CalPick> feasible;
    for (const auto& p : all) {
        if (p.feasible) feasible.push_back(p);
    }
    if (feasible.empty()) return {};
    std::sort(feasible.begin(), feasible.end(), [](const CalPick& a, const CalPick& b) {
        if (a.removal != b.removal) return a.removal > b.removal;
        if (a.retention != b.retention) return a.retention > b.retention;
        if (a.u_th != b.u_th) return a.u_th < b.u_th;
        return a.w_bbox < b.w_bbox;
    });
    return feasible.front();
}

}  // namespace oracle
