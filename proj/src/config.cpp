#include "objtrans/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "objtrans/errors.hpp"

namespace objtrans {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
    static const std::map<std::string, std::string> kDefaults = {
        {"seed", "0"},
        {"jobs", "1"},
        {"split", ""},
        {"dataset", ""},
        {"out", ""},
        {"profile", ""},

        {"adapter.cmd", ""},
        {"adapter.mock", ""},
        {"adapter.timeout_s", "30"},
        {"adapter.inline_images", "false"},

        {"uq.k", "8"},
        {"uq.conf", "0.25"},
        {"uq.match_iou", "0.5"},
        {"uq.w_bbox", "0.25"},
        {"uq.w_class", "0.75"},
        {"uq.u_threshold", "0.146"},
        {"uq.min_matched_for_bbox", "2"},
        {"uq.bbox_penalty", "0.25"},
        {"uq.use_stddev", "false"},
        {"uq.rerun_mode", "full_image"},
        {"uq.crop_margin", "0.25"},
        {"uq.hue_range", "30"},
        {"uq.sat_lo", "0.7"},
        {"uq.sat_hi", "1.3"},
        {"uq.val_lo", "0.7"},
        {"uq.val_hi", "1.3"},

        {"augment.transforms_per_image", "14"},
        {"augment.classes", "all"},
        {"augment.skip_classes", ""},
        {"augment.hue_range", "180"},
        {"augment.sat_lo", "0.5"},
        {"augment.sat_hi", "1.5"},
        {"augment.val_lo", "0.5"},
        {"augment.val_hi", "1.5"},

        {"eval.records", ""},
        {"eval.iou", "0.5"},
        {"eval.hist_bins", "20"},
        {"eval.pr_points", "101"},

        {"calibrate.records", ""},
        {"calibrate.floor", "0.95"},
        {"calibrate.objective", "max_fp_removed_st_tp_retention"},
        {"calibrate.quantiles", "50"},
        {"calibrate.weight_step", "0.05"},

        {"decompose.mock", ""},
        {"decompose.table", "0.9,0.5"},
        {"decompose.trials", "100000"},

        {"bench.frames", "100"},
        {"bench.width", "640"},
        {"bench.height", "640"},
        {"bench.detections", "10"},
        {"bench.mock", "hue_sensitive"},
    };
    return kDefaults;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        try {
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!defaults().contains(key)) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    values_[key] = value;
    explicit_[key] = value;
}

std::string RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    return it->second;
}

std::optional<std::string> RunConfig::opt_str(const std::string& key) const {
    auto v = str(key);
    if (v.empty()) {
        return std::nullopt;
    }
    return v;
}

double RunConfig::real(const std::string& key) const {
    auto v = str(key);
    double out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

long long RunConfig::integer(const std::string& key) const {
    auto v = str(key);
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
    auto v = str(key);
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
    return out;
}

bool RunConfig::flag(const std::string& key) const {
    auto v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string RunConfig::effective_text() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        if (k == "jobs" || k == "out") {
            continue;
        }
        out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace objtrans
