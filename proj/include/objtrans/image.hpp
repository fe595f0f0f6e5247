#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "objtrans/types.hpp"

namespace objtrans {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 8-bit RGB raster.
class ImageFrame {
public:
    ImageFrame() = default;
    ImageFrame(std::uint32_t width, std::uint32_t height, std::string image_id = {});
    ImageFrame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels,
               std::string image_id = {});

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    const std::string& image_id() const { return image_id_; }
    void set_image_id(std::string id) { image_id_ = std::move(id); }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    Rgb at(std::uint32_t x, std::uint32_t y) const {
        auto i = index(x, y);
        return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
    }
    void set(std::uint32_t x, std::uint32_t y, Rgb c) {
        auto i = index(x, y);
        pixels_[i] = c.r;
        pixels_[i + 1] = c.g;
        pixels_[i + 2] = c.b;
    }

    friend bool operator==(const ImageFrame&, const ImageFrame&) = default;

private:
    std::size_t index(std::uint32_t x, std::uint32_t y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }

    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::vector<std::uint8_t> pixels_;
    std::string image_id_;
};

/// Horizontal run [x_begin, x_end) on row y.
struct Span {
    std::uint32_t y = 0;
    std::uint32_t x_begin = 0;
    std::uint32_t x_end = 0;

    friend bool operator==(const Span&, const Span&) = default;
};

/// Pixel coverage of one object, stored as sorted, non-overlapping row spans.
class InstanceMask {
public:
    InstanceMask() = default;
    InstanceMask(std::string image_id, std::uint32_t instance_id, std::uint32_t class_id,
                 std::vector<Span> spans);

    /// Pixel rectangle covered by a normalized box on a width x height raster.
    /// Edges are rounded outward, so any box with positive extent covers at
    /// least one pixel.
    static InstanceMask from_bbox(const BBox& box, std::uint32_t width, std::uint32_t height,
                                  std::string image_id = {}, std::uint32_t instance_id = 0,
                                  std::uint32_t class_id = 0);

    const std::string& image_id() const { return image_id_; }
    std::uint32_t instance_id() const { return instance_id_; }
    std::uint32_t class_id() const { return class_id_; }
    const std::vector<Span>& spans() const { return spans_; }

    std::size_t pixel_count() const;
    bool empty() const { return spans_.empty(); }
    bool contains(std::uint32_t x, std::uint32_t y) const;
    bool fits(std::uint32_t width, std::uint32_t height) const;

private:
    std::string image_id_;
    std::uint32_t instance_id_ = 0;
    std::uint32_t class_id_ = 0;
    std::vector<Span> spans_;
};

}  // namespace objtrans
