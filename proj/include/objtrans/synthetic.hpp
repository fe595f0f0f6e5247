#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "objtrans/image.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

struct SyntheticObject {
    BBox bbox;
    std::uint32_t class_id = 0;
    double hue = 0.0;  // fill hue in degrees
    double sat = 0.8;
    double val = 0.8;
};

/// Per-pixel colored noise background with each object painted as a flat
/// rectangle of its HSV color. Later objects paint over earlier ones.
ImageFrame render_scene(std::uint32_t width, std::uint32_t height, const std::string& image_id, std::uint64_t seed,
                        std::span<const SyntheticObject> objects);

/// n random boxes with sides in [min_side, max_side] (fractions of the frame)
/// and random fill hues, keyed by (seed, image_id).
std::vector<SyntheticObject> random_objects(std::uint64_t seed, const std::string& image_id, std::size_t n,
                                            std::uint32_t num_classes, double min_side = 0.08,
                                            double max_side = 0.25);

}  // namespace objtrans
