#include "objtrans/synthetic.hpp"

#include "objtrans/colorspace.hpp"
#include "objtrans/rng.hpp"

namespace objtrans {

ImageFrame render_scene(std::uint32_t width, std::uint32_t height, const std::string& image_id, std::uint64_t seed,
                        std::span<const SyntheticObject> objects) {
    ImageFrame img(width, height, image_id);
    KeyedStream rng(seed, {fnv1a64(image_id), 0xb6});
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(rng.next_u64() >> 56);
    }
    for (const auto& o : objects) {
        auto color = hsv_to_rgb({wrap_hue(o.hue), o.sat, o.val});
        auto mask = InstanceMask::from_bbox(o.bbox, width, height);
        for (const auto& s : mask.spans()) {
            for (auto x = s.x_begin; x < s.x_end; ++x) {
                img.set(x, s.y, color);
            }
        }
    }
    return img;
}

std::vector<SyntheticObject> random_objects(std::uint64_t seed, const std::string& image_id, std::size_t n,
                                            std::uint32_t num_classes, double min_side, double max_side) {
    std::vector<SyntheticObject> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        KeyedStream rng(seed, {fnv1a64(image_id), 0x0b1, i});
        SyntheticObject o;
        o.bbox.w = rng.uniform(min_side, max_side);
        o.bbox.h = rng.uniform(min_side, max_side);
        o.bbox.cx = rng.uniform(o.bbox.w / 2, 1 - o.bbox.w / 2);
        o.bbox.cy = rng.uniform(o.bbox.h / 2, 1 - o.bbox.h / 2);
        o.class_id = num_classes == 0 ? 0 : static_cast<std::uint32_t>(rng.next_u64() % num_classes);
        o.hue = rng.uniform(0, 360);
        o.sat = rng.uniform(0.5, 0.95);
        o.val = rng.uniform(0.5, 0.95);
        out.push_back(o);
    }
    return out;
}

}  // namespace objtrans
