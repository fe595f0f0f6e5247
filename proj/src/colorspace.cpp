#include "objtrans/colorspace.hpp"

#include <algorithm>
#include <cmath>

namespace objtrans {

double wrap_hue(double degrees) {
    double h = std::fmod(degrees, 360.0);
    if (h < 0) {
        h += 360.0;
    }
    // fmod of a tiny negative value plus 360 can round up to exactly 360
    if (h >= 360.0) {
        h -= 360.0;
    }
    return h;
}

HsvPixel rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    double r = r8 / 255.0;
    double g = g8 / 255.0;
    double b = b8 / 255.0;
    double mx = std::max({r, g, b});
    double mn = std::min({r, g, b});
    double delta = mx - mn;

    HsvPixel out;
    out.v = mx;
    out.s = mx > 0 ? delta / mx : 0.0;
    if (delta <= 0) {
        out.h = 0.0;
        return out;
    }
    double h;
    if (mx == r) {
        h = 60.0 * ((g - b) / delta);
    } else if (mx == g) {
        h = 60.0 * ((b - r) / delta + 2.0);
    } else {
        h = 60.0 * ((r - g) / delta + 4.0);
    }
    out.h = wrap_hue(h);
    return out;
}

Rgb hsv_to_rgb(const HsvPixel& p) {
    double h = wrap_hue(p.h);
    double s = std::clamp(p.s, 0.0, 1.0);
    double v = std::clamp(p.v, 0.0, 1.0);

    double c = v * s;
    double hp = h / 60.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    double m = v - c;
    auto to8 = [](double u) {
        return static_cast<std::uint8_t>(std::clamp(std::floor(u * 255.0 + 0.5), 0.0, 255.0));
    };
    return {to8(r + m), to8(g + m), to8(b + m)};
}

HsvPixel apply_hsv_params(const HsvPixel& p, const HsvParams& t) {
    return {wrap_hue(p.h + t.hue_shift), std::clamp(p.s * t.sat_scale, 0.0, 1.0),
            std::clamp(p.v * t.val_scale, 0.0, 1.0)};
}

}  // namespace objtrans
