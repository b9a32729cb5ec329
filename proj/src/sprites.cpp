#include "blindnet/sprites.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blindnet {

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = h - std::floor(h);
    double i;
    double f = std::modf(h * 6.0, &i);
    double p = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    switch (static_cast<int>(i) % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

VehicleParams random_vehicle_params(Rng& rng) {
    VehicleParams p;
    p.hue = rng.uniform();
    p.saturation = rng.uniform(0.4, 0.95);
    p.value = rng.uniform(0.45, 0.95);
    p.cabin_frac = rng.uniform(0.35, 0.55);
    p.cabin_shift = rng.uniform(-0.15, 0.15);
    p.facing_left = rng.uniform() < 0.5;
    return p;
}

Sprite draw_car_sprite(const VehicleParams& p, int h, int w) {
    if (h < 4 || w < 6)
        throw std::invalid_argument("draw_car_sprite: minimum size is 4x6");
    Sprite s;
    s.patch = Image(3, h, w);
    s.alpha = Mask(h, w);

    double br, bg, bb;
    hsv_to_rgb(p.hue, p.saturation, p.value, br, bg, bb);
    const double win_v = std::min(1.0, p.value + 0.35);

    // normalized coordinates: u across length [0,1], t down height [0,1]
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double u = (x + 0.5) / w;
            if (p.facing_left) u = 1.0 - u;
            double t = (y + 0.5) / h;

            bool body = t >= 0.45 && t < 0.85;
            // cabin: trapezoid on top of the body
            double c0 = 0.5 + p.cabin_shift - p.cabin_frac / 2.0;
            double c1 = 0.5 + p.cabin_shift + p.cabin_frac / 2.0;
            double taper = (0.45 - t) * 0.35;  // narrows toward the roof
            bool cabin = t >= 0.12 && t < 0.45 && u >= c0 + taper && u < c1 - taper;
            // wheels: two dark discs on the lower edge
            double wy = 0.85, wr = 0.16;
            double dx1 = u - 0.22, dx2 = u - 0.78, dy = (t - wy) * 0.9;
            bool wheel = dx1 * dx1 + dy * dy < wr * wr || dx2 * dx2 + dy * dy < wr * wr;

            if (!(body || cabin || wheel)) continue;
            s.alpha.at(y, x) = 1;
            double r = br, g = bg, b = bb;
            if (wheel) {
                r = g = b = 0.08;
            } else if (cabin) {
                bool window = t > 0.18 && t < 0.40 && u > c0 + taper + 0.04 &&
                              u < c1 - taper - 0.04;
                if (window) {
                    r = 0.55 * win_v; g = 0.75 * win_v; b = win_v;
                } else {
                    r = br * 0.85; g = bg * 0.85; b = bb * 0.85;
                }
            }
            s.patch.at(0, y, x) = r;
            s.patch.at(1, y, x) = g;
            s.patch.at(2, y, x) = b;
        }
    }
    quantize8(s.patch);
    return s;
}

}  // namespace blindnet
