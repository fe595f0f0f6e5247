#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "objtrans/eval.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

enum class CalibrationObjective {
    max_fp_removed_st_tp_retention,
    max_tp_fp_ratio,
};

std::string to_string(CalibrationObjective o);
CalibrationObjective calibration_objective_from_string(const std::string& name);

struct CalibrationSpec {
    std::vector<double> weight_grid = default_weight_grid();  // candidate w_bbox values
    std::size_t n_quantiles = 50;
    CalibrationObjective objective = CalibrationObjective::max_fp_removed_st_tp_retention;
    double tp_retention_floor = 0.95;
    bool use_stddev = false;  // combine like UqConfig::use_stddev

    /// 0, 0.05, ..., 1.
    static std::vector<double> default_weight_grid();
    void validate() const;
};

struct CalibrationPoint {
    CombineWeights weights;
    double u_threshold = 0;
    double tp_retention = 0;
    double fp_removal = 0;
    double tp_fp_ratio = 0;  // kept TP / kept FP, +inf when no FP is kept
};

struct CalibrationResult {
    CalibrationPoint best;
    std::size_t grid_points = 0;
};

/// Raised when no grid point meets the retention floor; carries the point
/// with the highest retention (ties broken like a feasible selection).
class InfeasibleCalibration : public std::runtime_error {
public:
    InfeasibleCalibration(const std::string& what, CalibrationPoint best)
        : std::runtime_error(what), best_(best) {}
    const CalibrationPoint& best_infeasible() const { return best_; }

private:
    CalibrationPoint best_;
};

/// Threshold candidates for one set of combined uncertainties: the
/// nearest-rank quantiles at levels j/(n-1), deduplicated, then the midpoints
/// between consecutive distinct quantiles followed by the largest quantile.
std::vector<double> threshold_candidates(std::span<const double> values, std::size_t n_quantiles);

/// Exhaustive search over weight_grid x threshold candidates. Selection order:
/// objective value, then higher retention, then lower threshold, then lower
/// w_bbox. Records must contain both verdicts (std::invalid_argument).
CalibrationResult calibrate(std::span<const ScoredRecord> records, const CalibrationSpec& spec);

/// Profile file: {w_bbox, w_class, u_threshold, metadata: {...}}.
void save_profile(const std::filesystem::path& path, const CalibrationResult& result, const std::string& dataset_hash,
                  std::uint64_t seed);

struct CalibrationProfile {
    CombineWeights weights;
    double u_threshold = 0;
};
CalibrationProfile load_profile(const std::filesystem::path& path);

}  // namespace objtrans
