#include "commands.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "objtrans/calibration.hpp"
#include "objtrans/dataset.hpp"
#include "objtrans/detector.hpp"
#include "objtrans/errors.hpp"
#include "objtrans/eval.hpp"
#include "objtrans/mock_detector.hpp"
#include "objtrans/object_transform.hpp"
#include "objtrans/png_io.hpp"
#include "objtrans/rng.hpp"
#include "objtrans/synthetic.hpp"
#include "objtrans/uq.hpp"

namespace objtrans::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

RunLog::RunLog(const fs::path& out_dir) {
    auto p = out_dir;
    p += ".run.log";
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    file_.open(p, std::ios::app);
}

void RunLog::line(const std::string& msg) {
    if (!file_) {
        return;
    }
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    file_ << buf << ' ' << msg << '\n';
    file_.flush();
}

namespace {

std::string fmt_num(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    f << text;
}

fs::path require_out(const RunConfig& cfg) {
    auto out = cfg.opt_str("out");
    if (!out) {
        throw ConfigError("no output directory (--out)");
    }
    return *out;
}

fs::path require_path(const RunConfig& cfg, const std::string& key, const std::string& flag) {
    auto v = cfg.opt_str(key);
    if (!v) {
        throw ConfigError("missing " + key + " (" + flag + ")");
    }
    return *v;
}

int jobs_of(const RunConfig& cfg) {
    auto j = cfg.integer("jobs");
    if (j < 1 || j > 256) {
        throw ConfigError("jobs must lie in [1,256]");
    }
    return static_cast<int>(j);
}

void prepare_out(const fs::path& out, const RunConfig& cfg) {
    fs::create_directories(out);
    write_text(out / "effective_config.txt", cfg.effective_text());
}

// Class ids from a list of names or numeric ids; "all" selects every class.
std::set<std::uint32_t> resolve_classes(const std::vector<std::string>& items, const DatasetHandle& ds) {
    std::set<std::uint32_t> out;
    for (const auto& item : items) {
        if (item == "all") {
            for (std::uint32_t c = 0; c < ds.class_names.size(); ++c) {
                out.insert(c);
            }
            continue;
        }
        auto it = std::find(ds.class_names.begin(), ds.class_names.end(), item);
        if (it != ds.class_names.end()) {
            out.insert(static_cast<std::uint32_t>(it - ds.class_names.begin()));
            continue;
        }
        std::uint32_t id = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), id);
        if (ec != std::errc() || ptr != item.data() + item.size() || id >= ds.class_names.size()) {
            throw ConfigError("unknown class '" + item + "'");
        }
        out.insert(id);
    }
    return out;
}

TransformSampler sampler_from(const RunConfig& cfg, const std::string& prefix) {
    TransformSampler s;
    s.seed = cfg.u64("seed");
    s.hue_range = cfg.real(prefix + ".hue_range");
    s.sat_range = {cfg.real(prefix + ".sat_lo"), cfg.real(prefix + ".sat_hi")};
    s.val_range = {cfg.real(prefix + ".val_lo"), cfg.real(prefix + ".val_hi")};
    s.validate();
    return s;
}

struct Thresholds {
    UqConfig uq;
    double conf = 0.25;
};

// UqConfig and the confidence threshold.
Thresholds thresholds_from(const RunConfig& cfg) {
    Thresholds t;
    auto& u = t.uq;
    u.k = static_cast<int>(cfg.integer("uq.k"));
    u.match_iou = cfg.real("uq.match_iou");
    u.weights = {cfg.real("uq.w_bbox"), cfg.real("uq.w_class")};
    u.u_threshold = cfg.real("uq.u_threshold");
    u.min_matched_for_bbox = static_cast<int>(cfg.integer("uq.min_matched_for_bbox"));
    u.bbox_penalty = cfg.real("uq.bbox_penalty");
    u.use_stddev = cfg.flag("uq.use_stddev");
    u.rerun_mode = rerun_mode_from_string(cfg.str("uq.rerun_mode"));
    u.crop_margin = cfg.real("uq.crop_margin");
    u.validate();
    t.conf = cfg.real("uq.conf");
    if (!(t.conf >= 0.0 && t.conf <= 1.0)) {
        throw ConfigError("uq.conf must lie in [0,1]");
    }
    if (!(u.u_threshold >= 0.0)) {
        throw ConfigError("uq.u_threshold must be >= 0");
    }
    return t;
}

std::unique_ptr<AdapterPool> make_pool(const RunConfig& cfg, std::size_t size) {
    auto cmd = cfg.opt_str("adapter.cmd");
    auto mock = cfg.opt_str("adapter.mock");
    if (cmd && mock) {
        throw ConfigError("set only one of adapter.cmd and adapter.mock");
    }
    if (cmd) {
        ProcessAdapterOptions opt;
        opt.command = *cmd;
        auto timeout = cfg.real("adapter.timeout_s");
        if (!(timeout > 0)) {
            throw ConfigError("adapter.timeout_s must be positive");
        }
        opt.timeout = std::chrono::milliseconds(static_cast<long long>(timeout * 1000));
        opt.inline_images = cfg.flag("adapter.inline_images");
        return std::make_unique<AdapterPool>(
            size, [opt](std::size_t) { return std::make_unique<ProcessAdapter>(opt); });
    }
    if (mock) {
        auto det = std::make_shared<const MockDetector>(MockDetectorSpec::load(*mock));
        return std::make_unique<AdapterPool>(size, [det](std::size_t) { return std::make_unique<MockAdapter>(det); });
    }
    throw ConfigError("no detector configured (--adapter-cmd or --mock)");
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct JoinedRecords {
    std::vector<ScoredRecord> records;
    std::size_t num_gt = 0;
    std::size_t images = 0;
    std::uint64_t content_hash = 0xcbf29ce484222325ULL;
};

// Reads UQ records, matches each image's detections against its labels, and
// recombines u_combined under the given weights.
JoinedRecords join_with_ground_truth(const fs::path& records_path, const DatasetHandle& ds, double iou,
                                     const CombineWeights& weights, bool use_stddev) {
    JoinedRecords out;
    auto text = read_file(records_path);
    out.content_hash = fnv1a64(text, out.content_hash);
    std::istringstream in(text);
    std::set<std::string> seen;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(records_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto rec = uq_record_from_json(j);
        if (!seen.insert(rec.image_id).second) {
            throw DataError(records_path.string() + ":" + std::to_string(lineno) + ": duplicate image " + rec.image_id);
        }
        auto split = ds.split_of(rec.image_id);
        if (!split) {
            throw DataError(records_path.string() + ":" + std::to_string(lineno) + ": image " + rec.image_id +
                            " is not in the dataset");
        }
        auto label_path = ds.label_path(*split, rec.image_id);
        auto gts = load_labels(ds, rec.image_id);
        if (fs::exists(label_path)) {
            out.content_hash = fnv1a64(read_file(label_path), out.content_hash);
        }
        std::vector<Detection> dets;
        for (const auto& d : rec.detections) {
            dets.push_back(d.anchor);
        }
        auto m = match_to_gt(dets, gts, iou);
        for (std::size_t i = 0; i < rec.detections.size(); ++i) {
            const auto& d = rec.detections[i];
            ScoredRecord r;
            r.image_id = rec.image_id;
            r.class_id = d.anchor.class_id;
            r.score = d.anchor.score;
            r.u_class = d.uncertainty.u_class;
            r.u_bbox = d.uncertainty.u_bbox;
            r.u_combined = weights.combine(r.u_bbox, r.u_class, use_stddev);
            r.bbox_var = d.uncertainty.bbox_var;
            r.verdict = m.verdicts[i];
            out.records.push_back(r);
        }
        out.num_gt += gts.size();
        ++out.images;
    }
    return out;
}

ordered_json counts_json(const Counts& c) {
    ordered_json j;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    auto r = c.ratio();
    if (std::isinf(r)) {
        j["ratio"] = "inf";
    } else {
        j["ratio"] = r;
    }
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

int cmd_augment(const RunConfig& cfg, Streams io) {
    auto out = require_out(cfg);
    auto ds = load_dataset(require_path(cfg, "dataset", "--dataset"));
    AugmentationPlan plan;
    auto n = cfg.integer("augment.transforms_per_image");
    if (n < 1 || n > 99) {
        throw ConfigError("augment.transforms_per_image must lie in [1,99]");
    }
    plan.transforms_per_image = static_cast<int>(n);
    plan.classes_hsv = resolve_classes(cfg.list("augment.classes"), ds);
    plan.skip_classes = resolve_classes(cfg.list("augment.skip_classes"), ds);
    if (auto split = cfg.opt_str("split")) {
        plan.splits = {*split};
    }
    auto sampler = sampler_from(cfg, "augment");
    int jobs = jobs_of(cfg);
    if (fs::exists(out) && fs::equivalent(out, ds.root)) {
        throw ConfigError("output directory must differ from the dataset");
    }

    RunLog log(out);
    log.line("augment start dataset=" + ds.root.string());
    auto report = generate_augmented_dataset(ds, plan, sampler, out, jobs);
    write_text(out / "effective_config.txt", cfg.effective_text());
    for (const auto& w : report.warnings) {
        io.err << "warning: " << w << '\n';
        log.line("warning: " + w);
    }
    io.out << "source images:       " << report.source_images << '\n'
           << "images written:      " << report.images_written << '\n'
           << "instances perturbed: " << report.instances_perturbed << '\n'
           << "instances skipped:   " << report.instances_skipped << '\n';
    log.line("augment done images_written=" + std::to_string(report.images_written));
    return 0;
}

int cmd_uq(const RunConfig& cfg, Streams io) {
    auto out = require_out(cfg);
    auto th = thresholds_from(cfg);
    auto sampler = sampler_from(cfg, "uq");
    int jobs = jobs_of(cfg);
    auto ds = load_dataset(require_path(cfg, "dataset", "--dataset"));
    auto split = cfg.opt_str("split").value_or("test");
    auto it = ds.splits.find(split);
    if (it == ds.splits.end()) {
        throw ConfigError("dataset has no split '" + split + "'");
    }
    auto pool = make_pool(cfg, static_cast<std::size_t>(jobs));

    prepare_out(out, cfg);
    RunLog log(out);
    log.line("uq start split=" + split + " images=" + std::to_string(it->second.size()));
    std::string text;
    std::size_t n_dets = 0;
    for (const auto& stem : it->second) {
        auto img = png::read_rgb(ds.image_path(split, stem));
        img.set_image_id(stem);
        std::vector<AnchorUncertainty> results;
        try {
            auto anchors = anchor_pass(pool->at(0), img, th.conf);
            results = run_tta(img, anchors, *pool, sampler, th.uq, th.conf);
        } catch (const AdapterError& e) {
            throw AdapterError("image " + stem + ": " + e.what());
        }
        n_dets += results.size();
        text += uq_record_to_json(stem, results).dump() + "\n";
        log.line("image " + stem + " detections=" + std::to_string(results.size()));
    }
    write_text(out / "uq.jsonl", text);
    io.out << "images:         " << it->second.size() << '\n'
           << "detections:     " << n_dets << '\n'
           << "detector calls: " << pool->total_calls() << '\n';
    log.line("uq done");
    return 0;
}

int cmd_eval(const RunConfig& cfg, Streams io) {
    auto out = require_out(cfg);
    auto th = thresholds_from(cfg);
    auto records_path = require_path(cfg, "eval.records", "--records");
    auto ds = load_dataset(require_path(cfg, "dataset", "--dataset"));
    auto iou = cfg.real("eval.iou");
    if (!(iou > 0 && iou < 1)) {
        throw ConfigError("eval.iou must lie in (0,1)");
    }
    auto bins = cfg.integer("eval.hist_bins");
    auto pr_points = cfg.integer("eval.pr_points");
    if (bins < 1 || pr_points < 2) {
        throw ConfigError("eval.hist_bins must be >= 1 and eval.pr_points >= 2");
    }

    auto joined = join_with_ground_truth(records_path, ds, iou, th.uq.weights, th.uq.use_stddev);
    const auto& recs = joined.records;
    prepare_out(out, cfg);
    RunLog log(out);
    log.line("eval start records=" + records_path.string());

    auto before = filtered_counts(recs, th.conf, std::nullopt);
    auto after = filtered_counts(recs, th.conf, th.uq.u_threshold);
    auto grid = linear_grid(0.0, 1.0, static_cast<std::size_t>(pr_points));

    ordered_json counts;
    counts["conf_threshold"] = th.conf;
    counts["u_threshold"] = th.uq.u_threshold;
    counts["weights"] = {th.uq.weights.w_bbox, th.uq.weights.w_class};
    counts["images"] = joined.images;
    counts["num_gt"] = joined.num_gt;
    counts["without_filter"] = counts_json(before);
    counts["with_filter"] = counts_json(after);
    counts["tp_retention"] = before.tp == 0 ? 1.0 : static_cast<double>(after.tp) / static_cast<double>(before.tp);
    counts["fp_removal"] =
        before.fp == 0 ? 0.0 : 1.0 - static_cast<double>(after.fp) / static_cast<double>(before.fp);

    std::string pr = "curve,threshold,precision,recall\n";
    if (joined.num_gt > 0) {
        auto c0 = pr_curve(recs, joined.num_gt, std::nullopt, grid);
        auto c1 = pr_curve(recs, joined.num_gt, th.uq.u_threshold, grid);
        for (const auto& [name, curve] : {std::pair{"without_filter", &c0}, std::pair{"with_filter", &c1}}) {
            for (const auto& p : curve->points) {
                pr += std::string(name) + "," + fmt_num(p.threshold) + "," + fmt_num(p.precision) + "," +
                      fmt_num(p.recall) + "\n";
            }
        }
        counts["auc_without_filter"] = c0.auc;
        counts["auc_with_filter"] = c1.auc;
    } else {
        counts["auc_without_filter"] = nullptr;
        counts["auc_with_filter"] = nullptr;
        io.err << "warning: no ground-truth boxes, PR curve skipped (recall undefined)\n";
    }

    auto sep = separation_stats(recs);
    std::string sep_csv = "metric,tp_mean,fp_mean,fp_over_tp\n";
    auto cell = [](const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); };
    for (const auto& row : sep.rows) {
        sep_csv += row.metric + "," + cell(row.tp_mean) + "," + cell(row.fp_mean) + "," + cell(row.ratio) + "\n";
    }
    counts["separation_notes"] = sep.notes;

    std::string hist = "bin_lo,bin_hi,tp_count,fp_count\n";
    for (const auto& b : uncertainty_histogram(recs, static_cast<std::size_t>(bins))) {
        hist += fmt_num(b.lo) + "," + fmt_num(b.hi) + "," + std::to_string(b.tp) + "," + std::to_string(b.fp) + "\n";
    }

    write_text(out / "counts.json", counts.dump(2) + "\n");
    write_text(out / "pr_curve.csv", pr);
    write_text(out / "separation.csv", sep_csv);
    write_text(out / "histogram.csv", hist);
    io.out << "without filter: TP=" << before.tp << " FP=" << before.fp << " TP/FP=" << fmt_num(before.ratio())
           << '\n'
           << "with filter:    TP=" << after.tp << " FP=" << after.fp << " TP/FP=" << fmt_num(after.ratio()) << '\n';
    log.line("eval done");
    return 0;
}

int cmd_calibrate(const RunConfig& cfg, Streams io) {
    auto out = require_out(cfg);
    auto th = thresholds_from(cfg);
    auto records_path = require_path(cfg, "calibrate.records", "--records");
    auto ds = load_dataset(require_path(cfg, "dataset", "--dataset"));
    CalibrationSpec spec;
    auto step = cfg.real("calibrate.weight_step");
    if (!(step > 0 && step <= 1)) {
        throw ConfigError("calibrate.weight_step must lie in (0,1]");
    }
    spec.weight_grid.clear();
    auto n_steps = static_cast<long long>(std::floor(1.0 / step + 1e-9));
    for (long long i = 0; i <= n_steps; ++i) {
        spec.weight_grid.push_back(std::min(1.0, static_cast<double>(i) * step));
    }
    auto q = cfg.integer("calibrate.quantiles");
    if (q < 2) {
        throw ConfigError("calibrate.quantiles must be >= 2");
    }
    spec.n_quantiles = static_cast<std::size_t>(q);
    spec.objective = calibration_objective_from_string(cfg.str("calibrate.objective"));
    spec.tp_retention_floor = cfg.real("calibrate.floor");
    spec.use_stddev = th.uq.use_stddev;
    spec.validate();
    auto iou = cfg.real("eval.iou");

    auto joined = join_with_ground_truth(records_path, ds, iou, th.uq.weights, th.uq.use_stddev);
    // only detections the deployed confidence threshold would keep
    std::vector<ScoredRecord> kept;
    for (const auto& r : joined.records) {
        if (r.score >= th.conf) {
            kept.push_back(r);
        }
    }
    prepare_out(out, cfg);
    RunLog log(out);
    log.line("calibrate start records=" + records_path.string());

    CalibrationResult res;
    try {
        res = calibrate(kept, spec);
    } catch (const InfeasibleCalibration& e) {
        const auto& b = e.best_infeasible();
        io.err << "calibration infeasible: " << e.what() << "\n  best point: w_bbox=" << fmt_num(b.weights.w_bbox)
               << " u_threshold=" << fmt_num(b.u_threshold) << " tp_retention=" << fmt_num(b.tp_retention)
               << " fp_removal=" << fmt_num(b.fp_removal) << '\n';
        return static_cast<int>(ExitCode::data);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    save_profile(out / "profile.json", res, hex64(joined.content_hash), cfg.u64("seed"));
    const auto& b = res.best;
    io.out << "w_bbox=" << fmt_num(b.weights.w_bbox) << " w_class=" << fmt_num(b.weights.w_class)
           << " u_threshold=" << fmt_num(b.u_threshold) << '\n'
           << "tp_retention=" << fmt_num(b.tp_retention) << " fp_removal=" << fmt_num(b.fp_removal)
           << " grid_points=" << res.grid_points << '\n';
    log.line("calibrate done");
    return 0;
}

int cmd_decompose(const RunConfig& cfg, Streams io) {
    auto out = require_out(cfg);
    MockDetectorSpec spec;
    if (auto mock = cfg.opt_str("decompose.mock")) {
        spec = MockDetectorSpec::load(*mock);
        if (spec.kind != MockKind::bernoulli) {
            throw ConfigError("decompose needs a bernoulli mock spec");
        }
    } else {
        spec.kind = MockKind::bernoulli;
        spec.seed = cfg.u64("seed");
        auto items = cfg.list("decompose.table");
        for (std::size_t i = 0; i < items.size(); ++i) {
            BernoulliEntry e;
            auto [ptr, ec] = std::from_chars(items[i].data(), items[i].data() + items[i].size(), e.p);
            if (ec != std::errc() || ptr != items[i].data() + items[i].size()) {
                throw ConfigError("decompose.table: expected a probability, got '" + items[i] + "'");
            }
            e.hue_shift = -180.0 + 360.0 * static_cast<double>(i) / static_cast<double>(items.size());
            spec.table.push_back(e);
        }
    }
    spec.validate();
    auto trials = cfg.integer("decompose.trials");
    if (trials < 1000) {
        throw ConfigError("decompose.trials must be >= 1000");
    }
    prepare_out(out, cfg);
    RunLog log(out);
    log.line("decompose start trials=" + std::to_string(trials));
    auto r = decompose_variance(spec, static_cast<std::size_t>(trials), cfg.u64("seed"));

    struct Row {
        const char* term;
        double analytic, mc, se;
    };
    Row rows[] = {{"total", r.analytic_total, r.mc_total, r.se_total},
                  {"noise", r.analytic_noise, r.mc_noise, r.se_noise},
                  {"effect", r.analytic_effect, r.mc_effect, r.se_effect}};
    std::string csv = "term,analytic,monte_carlo,std_error,z\n";
    ordered_json j;
    j["trials"] = r.trials;
    j["seed"] = cfg.u64("seed");
    j["table"] = ordered_json::array();
    for (const auto& e : spec.table) {
        j["table"].push_back({{"hue_shift", e.hue_shift}, {"p", e.p}, {"weight", e.weight}});
    }
    j["terms"] = ordered_json::object();
    io.out << "term      analytic      monte_carlo   std_error     z\n";
    for (const auto& row : rows) {
        double z = row.se > 0 ? (row.mc - row.analytic) / row.se : 0.0;
        csv += std::string(row.term) + "," + fmt_num(row.analytic) + "," + fmt_num(row.mc) + "," + fmt_num(row.se) +
               "," + fmt_num(z) + "\n";
        j["terms"][row.term] = {{"analytic", row.analytic}, {"monte_carlo", row.mc}, {"std_error", row.se}, {"z", z}};
        char line[128];
        std::snprintf(line, sizeof line, "%-9s %-13.6g %-13.6g %-13.3g %+.2f\n", row.term, row.analytic, row.mc,
                      row.se, z);
        io.out << line;
    }
    j["identity_residual"] = r.analytic_total - (r.analytic_noise + r.analytic_effect);
    write_text(out / "decomposition.csv", csv);
    write_text(out / "decomposition.json", j.dump(2) + "\n");
    log.line("decompose done");
    return 0;
}

int cmd_bench(const RunConfig& cfg, Streams io) {
    auto out = require_out(cfg);
    auto frames = cfg.integer("bench.frames");
    auto width = cfg.integer("bench.width");
    auto height = cfg.integer("bench.height");
    auto n_det = cfg.integer("bench.detections");
    if (frames < 1) {
        throw ConfigError("bench.frames must be >= 1");
    }
    if (width < 8 || height < 8 || width > 8192 || height > 8192) {
        throw ConfigError("bench.width and bench.height must lie in [8,8192]");
    }
    if (n_det < 0 || n_det > 1000) {
        throw ConfigError("bench.detections must lie in [0,1000]");
    }
    auto kind = mock_kind_from_string(cfg.str("bench.mock"));
    if (kind == MockKind::bernoulli) {
        throw ConfigError("bench.mock must be oracle_stable, fragile_fp or hue_sensitive");
    }
    auto th = thresholds_from(cfg);
    auto sampler = sampler_from(cfg, "uq");
    int jobs = jobs_of(cfg);
    auto seed = cfg.u64("seed");

    // Objects are painted near hue 0 so the hue_sensitive mock detects all of them.
    MockDetectorSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    spec.preferred_hue = 0.0;
    std::vector<ImageFrame> images;
    for (long long f = 0; f < frames; ++f) {
        auto id = "bench" + std::to_string(f);
        auto objs = random_objects(seed, id, static_cast<std::size_t>(n_det), 1, 0.05, 0.12);
        auto& planted = spec.scenes[id];
        for (auto& o : objs) {
            KeyedStream rng(seed, {fnv1a64(id), 0xbe, planted.size()});
            o.hue = rng.uniform(-20, 20);
            PlantedObject p;
            p.bbox = o.bbox;
            p.class_id = 0;
            p.ref_hue = o.hue;
            planted.push_back(p);
        }
        images.push_back(render_scene(static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height), id, seed,
                                      objs));
    }
    spec.validate();
    auto det = std::make_shared<const MockDetector>(spec);
    AdapterPool pool(static_cast<std::size_t>(jobs),
                     [det](std::size_t) { return std::make_unique<MockAdapter>(det); });

    prepare_out(out, cfg);
    RunLog log(out);
    log.line("bench start frames=" + std::to_string(frames));
    using clock = std::chrono::steady_clock;
    TtaTimings t;
    double anchor_s = 0;
    std::size_t anchors_total = 0;
    auto start = clock::now();
    for (const auto& img : images) {
        auto a0 = clock::now();
        auto anchors = anchor_pass(pool.at(0), img, th.conf);
        anchor_s += std::chrono::duration<double>(clock::now() - a0).count();
        anchors_total += anchors.size();
        run_tta(img, anchors, pool, sampler, th.uq, th.conf, &t);
    }
    double wall = std::chrono::duration<double>(clock::now() - start).count();

    auto per_frame_ms = [&](double s) { return 1000.0 * s / static_cast<double>(frames); };
    double detector_s = anchor_s + t.detect_s;
    double overhead_s = t.perturb_s + t.associate_s + t.score_s;
    ordered_json j;
    j["frames"] = frames;
    j["width"] = width;
    j["height"] = height;
    j["detections_per_frame"] = n_det;
    j["anchors_total"] = anchors_total;
    j["k"] = th.uq.k;
    j["mock"] = to_string(kind);
    j["jobs"] = jobs;
    j["detector_calls"] = pool.total_calls();
    j["wall_s"] = wall;
    j["per_frame_ms"] = {{"total", per_frame_ms(wall)},
                         {"detector", per_frame_ms(detector_s)},
                         {"non_detector", per_frame_ms(overhead_s)},
                         {"perturb", per_frame_ms(t.perturb_s)},
                         {"associate", per_frame_ms(t.associate_s)},
                         {"score", per_frame_ms(t.score_s)}};
    j["fps_including_detector"] = wall > 0 ? static_cast<double>(frames) / wall : 0.0;
    j["fps_excluding_detector"] = overhead_s > 0 ? static_cast<double>(frames) / overhead_s : 0.0;
    write_text(out / "bench.json", j.dump(2) + "\n");
    io.out << j.dump(2) << '\n';
    log.line("bench done");
    return 0;
}

}  // namespace objtrans::cli
