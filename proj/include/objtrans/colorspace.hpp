#pragma once

#include <cstdint>

#include "objtrans/image.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

/// Hexcone HSV. Hue in degrees [0, 360), saturation and value in [0, 1].
/// Achromatic colors (s == 0) carry hue 0.
struct HsvPixel {
    double h = 0.0;
    double s = 0.0;
    double v = 0.0;

    friend bool operator==(const HsvPixel&, const HsvPixel&) = default;
};

HsvPixel rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
inline HsvPixel rgb_to_hsv(Rgb c) { return rgb_to_hsv(c.r, c.g, c.b); }

/// Inverse conversion; channels are rounded half-up to the nearest integer.
/// RGB -> HSV -> RGB is the identity on every 8-bit color.
Rgb hsv_to_rgb(const HsvPixel& p);

/// h' = (h + hue_shift) mod 360, s' = clamp(s * sat_scale), v' = clamp(v * val_scale).
HsvPixel apply_hsv_params(const HsvPixel& p, const HsvParams& t);

/// Wraps any finite angle into [0, 360).
double wrap_hue(double degrees);

}  // namespace objtrans
