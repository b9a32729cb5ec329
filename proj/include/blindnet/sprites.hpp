#pragma once

#include "blindnet/image.hpp"
#include "blindnet/rng.hpp"

namespace blindnet {

// Parameterized vehicle silhouette; hue/shape vary per instance.
struct VehicleParams {
    double hue = 0.0;        // [0,1)
    double saturation = 0.7;
    double value = 0.8;
    double cabin_frac = 0.45;  // cabin length as a fraction of body length
    double cabin_shift = 0.0;  // [-0.2, 0.2], cabin position along the body
    bool facing_left = false;
};

VehicleParams random_vehicle_params(Rng& rng);

struct Sprite {
    Image patch;  // 3xHxW
    Mask alpha;   // opaque pixels; tight to the patch
};

// Side-view car drawn directly at the requested pixel size (h >= 4, w >= 6).
Sprite draw_car_sprite(const VehicleParams& p, int h, int w);

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace blindnet
