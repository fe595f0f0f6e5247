#include "objtrans/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace objtrans {

ImageFrame::ImageFrame(std::uint32_t width, std::uint32_t height, std::string image_id)
    : ImageFrame(width, height, std::vector<std::uint8_t>(std::size_t{width} * height * 3, 0),
                 std::move(image_id)) {}

ImageFrame::ImageFrame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels,
                       std::string image_id)
    : width_(width), height_(height), pixels_(std::move(pixels)), image_id_(std::move(image_id)) {
    if (width_ == 0 || height_ == 0) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    if (pixels_.size() != std::size_t{width_} * height_ * 3) {
        throw std::invalid_argument("pixel buffer length must be width*height*3");
    }
}

InstanceMask::InstanceMask(std::string image_id, std::uint32_t instance_id, std::uint32_t class_id,
                           std::vector<Span> spans)
    : image_id_(std::move(image_id)), instance_id_(instance_id), class_id_(class_id) {
    std::erase_if(spans, [](const Span& s) { return s.x_end <= s.x_begin; });
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
        return a.y != b.y ? a.y < b.y : a.x_begin < b.x_begin;
    });
    // merge touching / overlapping runs on the same row
    for (const auto& s : spans) {
        if (!spans_.empty() && spans_.back().y == s.y && s.x_begin <= spans_.back().x_end) {
            spans_.back().x_end = std::max(spans_.back().x_end, s.x_end);
        } else {
            spans_.push_back(s);
        }
    }
}

InstanceMask InstanceMask::from_bbox(const BBox& box, std::uint32_t width, std::uint32_t height,
                                     std::string image_id, std::uint32_t instance_id,
                                     std::uint32_t class_id) {
    auto to_px = [](double v, std::uint32_t extent, bool up) {
        double scaled = v * extent;
        double r = up ? std::ceil(scaled - 1e-9) : std::floor(scaled + 1e-9);
        return static_cast<std::uint32_t>(std::clamp(r, 0.0, static_cast<double>(extent)));
    };
    auto x0 = to_px(box.x0(), width, false);
    auto x1 = to_px(box.x1(), width, true);
    auto y0 = to_px(box.y0(), height, false);
    auto y1 = to_px(box.y1(), height, true);
    if (x1 <= x0) {
        x0 = std::min(x0, width - 1);
        x1 = x0 + 1;
    }
    if (y1 <= y0) {
        y0 = std::min(y0, height - 1);
        y1 = y0 + 1;
    }
    std::vector<Span> spans;
    spans.reserve(y1 - y0);
    for (auto y = y0; y < y1; ++y) {
        spans.push_back({y, x0, x1});
    }
    return {std::move(image_id), instance_id, class_id, std::move(spans)};
}

std::size_t InstanceMask::pixel_count() const {
    std::size_t n = 0;
    for (const auto& s : spans_) {
        n += s.x_end - s.x_begin;
    }
    return n;
}

bool InstanceMask::contains(std::uint32_t x, std::uint32_t y) const {
    auto it = std::lower_bound(spans_.begin(), spans_.end(), y,
                               [](const Span& s, std::uint32_t row) { return s.y < row; });
    for (; it != spans_.end() && it->y == y; ++it) {
        if (x >= it->x_begin && x < it->x_end) {
            return true;
        }
    }
    return false;
}

bool InstanceMask::fits(std::uint32_t width, std::uint32_t height) const {
    return std::all_of(spans_.begin(), spans_.end(),
                       [&](const Span& s) { return s.y < height && s.x_end <= width; });
}

}  // namespace objtrans
