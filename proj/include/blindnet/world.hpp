#pragma once

#include "blindnet/image.hpp"
#include "blindnet/rng.hpp"
#include "blindnet/sprites.hpp"

#include <vector>

namespace blindnet {

// Planar camera pose, world frame, theta in (-pi, pi].
struct PoseLabel {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

double wrap_pi(double a);

struct Vehicle {
    double x = 0.0;
    double y = 0.0;
    int bay_id = 0;
    VehicleParams params;
};

// One floor of the carpark: fixed structure (walls with signage glyphs,
// pillars, bays) keyed by structure_seed; the vehicle population alone is
// keyed by day_seed and can be resampled without touching the structure.
struct CarparkWorld {
    uint64_t structure_seed = 0;
    uint64_t day_seed = 0;
    double width = 24.0;   // meters
    double depth = 12.0;
    std::vector<Vehicle> vehicles;
};

CarparkWorld make_world(uint64_t structure_seed, uint64_t day_seed,
                        double occupancy = 0.55);

bool is_valid_pose(const CarparkWorld& world, const PoseLabel& pose);
PoseLabel sample_valid_pose(const CarparkWorld& world, Rng& rng);

// Deterministic raycast rendering of the view from `pose`. When
// `with_vehicles` is false only structure is drawn. `vehicle_mask`, when
// given, receives exactly the pixels covered by vehicle sprites.
Image render_view(const CarparkWorld& world, const PoseLabel& pose, int size = 48,
                  bool with_vehicles = true, Mask* vehicle_mask = nullptr);

}  // namespace blindnet
