#include "objtrans/object_transform.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>

#include "objtrans/colorspace.hpp"
#include "objtrans/errors.hpp"
#include "objtrans/parallel.hpp"
#include "objtrans/png_io.hpp"
#include "objtrans/rng.hpp"

namespace objtrans {

namespace fs = std::filesystem;
using nlohmann::json;

TransformSampler TransformSampler::inference_defaults(std::uint64_t seed) {
    return {30.0, {0.7, 1.3}, {0.7, 1.3}, seed};
}

TransformSampler TransformSampler::training_defaults(std::uint64_t seed) {
    return {180.0, {0.5, 1.5}, {0.5, 1.5}, seed};
}

TransformSampler TransformSampler::identity(std::uint64_t seed) {
    return {0.0, {1.0, 1.0}, {1.0, 1.0}, seed};
}

void TransformSampler::validate() const {
    if (!(hue_range >= 0.0 && hue_range <= 180.0)) {
        throw ConfigError("hue range must lie in [0, 180]");
    }
    for (const auto* iv : {&sat_range, &val_range}) {
        if (!(iv->lo > 0.0 && iv->hi >= iv->lo)) {
            throw ConfigError("scale interval must satisfy 0 < lo <= hi");
        }
    }
}

HsvParams sample_params(const TransformSampler& sampler, const StreamKey& key) {
    KeyedStream rng(sampler.seed, {fnv1a64(key.image_id), key.instance_id, key.k});
    HsvParams p;
    p.hue_shift = rng.uniform(-sampler.hue_range, sampler.hue_range);
    p.sat_scale = rng.uniform(sampler.sat_range.lo, sampler.sat_range.hi);
    p.val_scale = rng.uniform(sampler.val_range.lo, sampler.val_range.hi);
    // -0.0 would break identity comparisons for collapsed ranges
    if (p.hue_shift == 0.0) {
        p.hue_shift = 0.0;
    }
    return p;
}

void perturb_region(ImageFrame& img, const InstanceMask& region, const HsvParams& params) {
    if (region.empty()) {
        throw std::invalid_argument("empty mask");
    }
    if (!region.fits(img.width(), img.height())) {
        throw std::out_of_range("mask exceeds image bounds");
    }
    for (const auto& s : region.spans()) {
        for (auto x = s.x_begin; x < s.x_end; ++x) {
            img.set(x, s.y, hsv_to_rgb(apply_hsv_params(rgb_to_hsv(img.at(x, s.y)), params)));
        }
    }
}

ImageFrame perturb_object(const ImageFrame& img, const InstanceMask& region, const HsvParams& params) {
    ImageFrame out = img;
    perturb_region(out, region, params);
    return out;
}

ImageFrame perturb_object(const ImageFrame& img, const BBox& region, const HsvParams& params) {
    return perturb_object(img, InstanceMask::from_bbox(region, img.width(), img.height(), img.image_id()), params);
}

bool AugmentationPlan::needs_masks() const {
    for (auto c : classes_hsv) {
        if (!skip_classes.contains(c)) {
            return true;
        }
    }
    return false;
}

std::string augmented_stem(const std::string& stem, int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_aug%02d", k);
    return stem + buf;
}

namespace {

struct SourceJob {
    std::string split;
    std::string stem;
};

struct SourceResult {
    std::vector<std::string> manifest_lines;
    std::size_t written = 0;
    std::size_t perturbed = 0;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SourceResult augment_one(const DatasetHandle& ds, const AugmentationPlan& plan, const TransformSampler& sampler,
                         const fs::path& out, const SourceJob& job) {
    SourceResult res;
    auto image = png::read_rgb(ds.image_path(job.split, job.stem));
    auto label_path = ds.label_path(job.split, job.stem);
    bool has_labels = fs::exists(label_path);
    std::vector<GroundTruthBox> labels;
    std::string label_bytes;
    if (has_labels) {
        labels = load_labels(label_path, ds.class_names.size());
        label_bytes = read_bytes(label_path);
    }

    std::vector<const InstanceMask*> targets;
    std::vector<InstanceMask> masks;
    bool any_eligible = std::any_of(labels.begin(), labels.end(),
                                    [&](const GroundTruthBox& g) { return plan.eligible(g.class_id); });
    if (any_eligible) {
        if (!fs::exists(ds.mask_path(job.split, job.stem))) {
            res.warnings.push_back(job.stem + ": no instance mask raster; eligible instances skipped");
        } else {
            masks = load_instance_masks(ds, job.stem);
        }
        std::map<std::uint32_t, const InstanceMask*> by_id;
        for (const auto& m : masks) {
            by_id[m.instance_id()] = &m;
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (!plan.eligible(labels[i].class_id)) {
                continue;
            }
            auto id = static_cast<std::uint32_t>(i + 1);
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                ++res.skipped;
                if (!masks.empty()) {
                    res.warnings.push_back(job.stem + ": label " + std::to_string(id) + " has no mask instance");
                }
                continue;
            }
            if (it->second->class_id() != labels[i].class_id) {
                ++res.skipped;
                res.warnings.push_back(job.stem + ": instance " + std::to_string(id) +
                                       " class differs between mask sidecar and label");
                continue;
            }
            if (!it->second->fits(image.width(), image.height())) {
                ++res.skipped;
                res.warnings.push_back(job.stem + ": instance " + std::to_string(id) + " exceeds image bounds");
                continue;
            }
            targets.push_back(it->second);
        }
    }

    for (int k = 0; k < plan.transforms_per_image; ++k) {
        ImageFrame copy = image;
        json instances = json::array();
        for (const auto* m : targets) {
            auto params = sample_params(sampler, {job.stem, m->instance_id(), static_cast<std::uint64_t>(k)});
            perturb_region(copy, *m, params);
            instances.push_back({{"instance_id", m->instance_id()},
                                 {"class_id", m->class_id()},
                                 {"hue_shift", params.hue_shift},
                                 {"sat_scale", params.sat_scale},
                                 {"val_scale", params.val_scale}});
            ++res.perturbed;
        }
        auto stem = augmented_stem(job.stem, k);
        png::write_rgb(out / "images" / job.split / (stem + ".png"), copy);
        if (has_labels) {
            std::ofstream lo(out / "labels" / job.split / (stem + ".txt"), std::ios::binary | std::ios::trunc);
            lo << label_bytes;
        }
        json rec = {{"out_image", "images/" + job.split + "/" + stem + ".png"},
                    {"src_image", "images/" + job.split + "/" + job.stem + ".png"},
                    {"instances", std::move(instances)}};
        res.manifest_lines.push_back(rec.dump());
        ++res.written;
    }
    return res;
}

}  // namespace

AugmentationReport generate_augmented_dataset(const DatasetHandle& dataset, const AugmentationPlan& plan,
                                              const TransformSampler& sampler, const fs::path& out, int jobs) {
    if (plan.transforms_per_image < 1) {
        throw ConfigError("transforms_per_image must be >= 1");
    }
    sampler.validate();
    if (plan.needs_masks() && !fs::is_directory(dataset.masks_dir())) {
        throw ConfigError("plan requires instance masks but " + dataset.masks_dir().string() + " does not exist");
    }

    std::vector<SourceJob> work;
    std::map<std::string, std::vector<std::string>> out_splits;
    for (const auto& split : plan.splits) {
        auto it = dataset.splits.find(split);
        if (it == dataset.splits.end()) {
            throw ConfigError("dataset has no split '" + split + "'");
        }
        auto& names = out_splits[split];
        for (const auto& stem : it->second) {
            work.push_back({split, stem});
            for (int k = 0; k < plan.transforms_per_image; ++k) {
                names.push_back(augmented_stem(stem, k));
            }
        }
    }

    write_dataset_skeleton(out, dataset.class_names, out_splits);

    std::vector<SourceResult> results(work.size());
    parallel_for(work.size(), jobs,
                 [&](std::size_t i) { results[i] = augment_one(dataset, plan, sampler, out, work[i]); });

    AugmentationReport report;
    report.source_images = work.size();
    std::ofstream manifest(out / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    for (auto& r : results) {
        for (const auto& line : r.manifest_lines) {
            manifest << line << '\n';
        }
        report.images_written += r.written;
        report.instances_perturbed += r.perturbed;
        report.instances_skipped += r.skipped;
        for (auto& w : r.warnings) {
            report.warnings.push_back(std::move(w));
        }
    }
    return report;
}

}  // namespace objtrans
