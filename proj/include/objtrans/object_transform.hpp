#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "objtrans/dataset.hpp"
#include "objtrans/image.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

struct Interval {
    double lo = 1.0;
    double hi = 1.0;
};

/// Uniform, component-independent distribution over HsvParams.
struct TransformSampler {
    double hue_range = 30.0;  // hue shift drawn from [-hue_range, hue_range)
    Interval sat_range{0.7, 1.3};
    Interval val_range{0.7, 1.3};
    std::uint64_t seed = 0;

    static TransformSampler inference_defaults(std::uint64_t seed);
    static TransformSampler training_defaults(std::uint64_t seed);
    static TransformSampler identity(std::uint64_t seed = 0);

    /// Throws ConfigError on negative or reversed ranges, hue_range > 180, or
    /// non-positive scale bounds. Collapsed ranges (lo == hi) are allowed.
    void validate() const;
};

struct StreamKey {
    std::string image_id;
    std::uint64_t instance_id = 0;
    std::uint64_t k = 0;
};

/// Deterministic in (sampler.seed, key); independent of call order.
HsvParams sample_params(const TransformSampler& sampler, const StreamKey& key);

/// Maps every pixel inside the region through RGB->HSV->params->RGB and leaves
/// every other pixel untouched. Throws std::invalid_argument("empty mask") on
/// an empty region and std::out_of_range when the region leaves the image.
ImageFrame perturb_object(const ImageFrame& img, const InstanceMask& region, const HsvParams& params);
ImageFrame perturb_object(const ImageFrame& img, const BBox& region, const HsvParams& params);

/// In-place variant used by the inference loop.
void perturb_region(ImageFrame& img, const InstanceMask& region, const HsvParams& params);

struct AugmentationPlan {
    int transforms_per_image = 14;
    std::set<std::uint32_t> classes_hsv;
    std::set<std::uint32_t> skip_classes;
    std::vector<std::string> splits{"train"};

    bool eligible(std::uint32_t class_id) const {
        return classes_hsv.contains(class_id) && !skip_classes.contains(class_id);
    }
    bool needs_masks() const;
};

struct AugmentationReport {
    std::size_t source_images = 0;
    std::size_t images_written = 0;
    std::size_t instances_perturbed = 0;
    std::size_t instances_skipped = 0;
    std::vector<std::string> warnings;
};

/// Output name for augmented copy k of a source stem.
std::string augmented_stem(const std::string& stem, int k);

/// Writes plan.transforms_per_image perturbed copies of every image in the
/// plan's splits under `out` (same layout as the input, masks omitted), copies
/// labels byte-for-byte, and writes out/manifest.jsonl. `jobs` worker threads
/// share the image list; output does not depend on it.
AugmentationReport generate_augmented_dataset(const DatasetHandle& dataset, const AugmentationPlan& plan,
                                              const TransformSampler& sampler, const std::filesystem::path& out,
                                              int jobs = 1);

}  // namespace objtrans
