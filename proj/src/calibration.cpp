#include "objtrans/calibration.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "objtrans/errors.hpp"

namespace objtrans {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(CalibrationObjective o) {
    return o == CalibrationObjective::max_tp_fp_ratio ? "max_tp_fp_ratio" : "max_fp_removed_st_tp_retention";
}

CalibrationObjective calibration_objective_from_string(const std::string& name) {
    if (name == "max_fp_removed_st_tp_retention") return CalibrationObjective::max_fp_removed_st_tp_retention;
    if (name == "max_tp_fp_ratio") return CalibrationObjective::max_tp_fp_ratio;
    throw ConfigError("unknown calibration objective '" + name + "'");
}

std::vector<double> CalibrationSpec::default_weight_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 20; ++i) {
        g.push_back(i / 20.0);
    }
    return g;
}

void CalibrationSpec::validate() const {
    if (weight_grid.empty()) {
        throw ConfigError("weight grid is empty");
    }
    for (double w : weight_grid) {
        if (!(w >= 0.0 && w <= 1.0)) {
            throw ConfigError("weight grid values must lie in [0,1]");
        }
    }
    if (n_quantiles < 1) {
        throw ConfigError("need at least one quantile");
    }
    if (!(tp_retention_floor > 0.0 && tp_retention_floor <= 1.0)) {
        throw ConfigError("tp retention floor must lie in (0,1]");
    }
}

std::vector<double> threshold_candidates(std::span<const double> values, std::size_t n_quantiles) {
    if (values.empty() || n_quantiles == 0) {
        return {};
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> q;
    auto last = sorted.size() - 1;
    for (std::size_t j = 0; j < n_quantiles; ++j) {
        std::size_t rank = n_quantiles == 1
                               ? last
                               : static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(last) /
                                                                       static_cast<double>(n_quantiles - 1)));
        q.push_back(sorted[rank]);
    }
    q.erase(std::unique(q.begin(), q.end()), q.end());
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
        out.push_back((q[i] + q[i + 1]) / 2);
    }
    out.push_back(q.back());
    return out;
}

namespace {

double objective_value(const CalibrationPoint& p, CalibrationObjective o) {
    return o == CalibrationObjective::max_tp_fp_ratio ? p.tp_fp_ratio : p.fp_removal;
}

bool better(const CalibrationPoint& a, const CalibrationPoint& b, CalibrationObjective o) {
    double va = objective_value(a, o), vb = objective_value(b, o);
    if (va != vb) return va > vb;
    if (a.tp_retention != b.tp_retention) return a.tp_retention > b.tp_retention;
    if (a.u_threshold != b.u_threshold) return a.u_threshold < b.u_threshold;
    return a.weights.w_bbox < b.weights.w_bbox;
}

bool better_infeasible(const CalibrationPoint& a, const CalibrationPoint& b, CalibrationObjective o) {
    if (a.tp_retention != b.tp_retention) return a.tp_retention > b.tp_retention;
    return better(a, b, o);
}

}  // namespace

CalibrationResult calibrate(std::span<const ScoredRecord> records, const CalibrationSpec& spec) {
    spec.validate();
    std::size_t total_tp = 0, total_fp = 0;
    for (const auto& r : records) {
        (r.verdict == Verdict::tp ? total_tp : total_fp) += 1;
    }
    if (total_tp == 0 || total_fp == 0) {
        throw std::invalid_argument("calibration records must contain both true and false positives");
    }

    CalibrationResult result;
    std::optional<CalibrationPoint> best;
    std::optional<CalibrationPoint> best_bad;
    std::vector<double> u(records.size());
    for (double w : spec.weight_grid) {
        auto weights = CombineWeights::from_bbox_weight(w);
        for (std::size_t i = 0; i < records.size(); ++i) {
            u[i] = weights.combine(records[i].u_bbox, records[i].u_class, spec.use_stddev);
        }
        for (double thr : threshold_candidates(u, spec.n_quantiles)) {
            std::size_t kept_tp = 0, kept_fp = 0;
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (u[i] <= thr) {
                    (records[i].verdict == Verdict::tp ? kept_tp : kept_fp) += 1;
                }
            }
            CalibrationPoint p;
            p.weights = weights;
            p.u_threshold = thr;
            p.tp_retention = static_cast<double>(kept_tp) / static_cast<double>(total_tp);
            p.fp_removal = static_cast<double>(total_fp - kept_fp) / static_cast<double>(total_fp);
            p.tp_fp_ratio = kept_fp == 0 ? std::numeric_limits<double>::infinity()
                                         : static_cast<double>(kept_tp) / static_cast<double>(kept_fp);
            ++result.grid_points;
            if (p.tp_retention >= spec.tp_retention_floor) {
                if (!best || better(p, *best, spec.objective)) {
                    best = p;
                }
            } else if (!best_bad || better_infeasible(p, *best_bad, spec.objective)) {
                best_bad = p;
            }
        }
    }
    if (!best) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "no grid point keeps %.4f of true positives; best infeasible: w_bbox=%.4f u_threshold=%.6g "
                      "retention=%.4f removal=%.4f",
                      spec.tp_retention_floor, best_bad->weights.w_bbox, best_bad->u_threshold,
                      best_bad->tp_retention, best_bad->fp_removal);
        throw InfeasibleCalibration(buf, *best_bad);
    }
    result.best = *best;
    return result;
}

void save_profile(const std::filesystem::path& path, const CalibrationResult& result, const std::string& dataset_hash,
                  std::uint64_t seed) {
    ordered_json j;
    j["w_bbox"] = result.best.weights.w_bbox;
    j["w_class"] = result.best.weights.w_class;
    j["u_threshold"] = result.best.u_threshold;
    ordered_json achieved;
    achieved["tp_retention"] = result.best.tp_retention;
    achieved["fp_removal"] = result.best.fp_removal;
    j["metadata"] = {{"dataset_hash", dataset_hash},
                     {"seed", seed},
                     {"grid_points", result.grid_points},
                     {"achieved", achieved}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open calibration profile " + path.string());
    }
    try {
        auto j = json::parse(in);
        CalibrationProfile p;
        p.weights = {j.at("w_bbox").get<double>(), j.at("w_class").get<double>()};
        p.weights.validate();
        p.u_threshold = j.at("u_threshold").get<double>();
        return p;
    } catch (const std::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace objtrans
