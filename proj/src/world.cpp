#include "blindnet/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace blindnet {

double wrap_pi(double a) {
    double w = std::remainder(a, 2.0 * M_PI);
    if (w <= -M_PI) w += 2.0 * M_PI;
    return w;
}

namespace {

constexpr double kPillarRadius = 0.28;
constexpr double kBayDepth = 2.0;
constexpr double kFov = 1.15;  // radians, ~66 deg

struct PillarSpec {
    double x, y;
    int id;
};

std::vector<PillarSpec> pillars(const CarparkWorld& w) {
    std::vector<PillarSpec> out;
    int id = 0;
    for (double x = 4.0; x < w.width - 1.0; x += 4.0)
        for (double y : {4.0, 8.0}) out.push_back({x, y, id++});
    return out;
}

// saturated signage color for ~1/3 of wall cells, concrete otherwise
void wall_cell_color(uint64_t structure_seed, int wall, int cell, double& r,
                     double& g, double& b) {
    uint64_t h = hash_combine(hash_combine(structure_seed, 0x57a11u + wall), cell);
    double pick = (h & 0xffff) / 65536.0;
    if (pick < 0.35) {
        double hue = ((h >> 16) & 0xffff) / 65536.0;
        hsv_to_rgb(hue, 0.85, 0.9, r, g, b);
    } else {
        double shade = 0.45 + 0.25 * (((h >> 32) & 0xff) / 255.0);
        r = g = b = shade;
    }
}

struct Hit {
    double dist = std::numeric_limits<double>::infinity();
    int wall = -1;       // 0..3 walls, 4 = pillar
    double along = 0.0;  // meters along the wall, or pillar id
    int pillar_id = -1;
};

Hit cast_ray(const CarparkWorld& w, double px, double py, double dx, double dy) {
    Hit best;
    // axis-aligned boundary walls: 0 south(y=0) 1 north(y=depth) 2 west(x=0) 3 east
    if (dy < 0.0) {
        double t = -py / dy;
        double x = px + t * dx;
        if (t > 0 && x >= 0 && x <= w.width && t < best.dist) best = {t, 0, x, -1};
    }
    if (dy > 0.0) {
        double t = (w.depth - py) / dy;
        double x = px + t * dx;
        if (t > 0 && x >= 0 && x <= w.width && t < best.dist) best = {t, 1, x, -1};
    }
    if (dx < 0.0) {
        double t = -px / dx;
        double y = py + t * dy;
        if (t > 0 && y >= 0 && y <= w.depth && t < best.dist) best = {t, 2, y, -1};
    }
    if (dx > 0.0) {
        double t = (w.width - px) / dx;
        double y = py + t * dy;
        if (t > 0 && y >= 0 && y <= w.depth && t < best.dist) best = {t, 3, y, -1};
    }
    for (const auto& p : pillars(w)) {
        double cx = p.x - px, cy = p.y - py;
        double proj = cx * dx + cy * dy;
        if (proj <= 0) continue;
        double d2 = cx * cx + cy * cy - proj * proj;
        double r2 = kPillarRadius * kPillarRadius;
        if (d2 > r2) continue;
        double t = proj - std::sqrt(r2 - d2);
        if (t > 0 && t < best.dist) best = {t, 4, 0.0, p.id};
    }
    return best;
}

}  // namespace

CarparkWorld make_world(uint64_t structure_seed, uint64_t day_seed,
                        double occupancy) {
    CarparkWorld w;
    w.structure_seed = structure_seed;
    w.day_seed = day_seed;
    int bay_id = 0;
    for (int row = 0; row < 2; ++row) {
        double y = row == 0 ? kBayDepth * 0.5 : w.depth - kBayDepth * 0.5;
        for (double x = 1.0; x < w.width; x += 2.0) {
            Rng rng = Rng::substream(day_seed, 0xbadcab, bay_id);
            if (rng.uniform() < occupancy) {
                Vehicle v;
                v.x = x + rng.uniform(-0.15, 0.15);
                v.y = y;
                v.bay_id = bay_id;
                v.params = random_vehicle_params(rng);
                w.vehicles.push_back(v);
            }
            ++bay_id;
        }
    }
    return w;
}

bool is_valid_pose(const CarparkWorld& world, const PoseLabel& pose) {
    if (pose.x < 1.0 || pose.x > world.width - 1.0) return false;
    if (pose.y < kBayDepth + 0.8 || pose.y > world.depth - kBayDepth - 0.8) return false;
    for (const auto& p : pillars(world)) {
        double dx = pose.x - p.x, dy = pose.y - p.y;
        if (dx * dx + dy * dy < 1.0) return false;
    }
    return true;
}

PoseLabel sample_valid_pose(const CarparkWorld& world, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        PoseLabel p;
        p.x = rng.uniform(1.0, world.width - 1.0);
        p.y = rng.uniform(kBayDepth + 0.8, world.depth - kBayDepth - 0.8);
        p.theta = wrap_pi(rng.uniform(-M_PI, M_PI));
        if (is_valid_pose(world, p)) return p;
    }
    throw std::runtime_error("sample_valid_pose: no valid pose found");
}

Image render_view(const CarparkWorld& world, const PoseLabel& pose, int size,
                  bool with_vehicles, Mask* vehicle_mask) {
    if (!is_valid_pose(world, pose))
        throw std::invalid_argument("render_view: pose outside the drivable region");
    Image img(3, size, size);
    if (vehicle_mask) *vehicle_mask = Mask(size, size);
    const double mid = size / 2.0;
    const double wall_scale = size * 0.58;  // px*m: slice half-height = scale/d
    std::vector<double> depth(size, std::numeric_limits<double>::infinity());

    for (int col = 0; col < size; ++col) {
        double ang_off = ((col + 0.5) / size - 0.5) * kFov;
        double ang = pose.theta + ang_off;
        Hit hit = cast_ray(world, pose.x, pose.y, std::cos(ang), std::sin(ang));
        double dperp = hit.dist * std::cos(ang_off);
        depth[col] = dperp;
        double hh = wall_scale / std::max(dperp, 0.1);
        double shade = 1.0 / (1.0 + 0.06 * hit.dist);

        double wr, wg, wb;
        if (hit.wall == 4) {
            uint64_t h = hash_combine(world.structure_seed, 0x9111a5 + hit.pillar_id);
            hsv_to_rgb((h & 0xffff) / 65536.0, 0.6, 0.75, wr, wg, wb);
        } else {
            wall_cell_color(world.structure_seed, hit.wall,
                            static_cast<int>(std::floor(hit.along)), wr, wg, wb);
        }

        for (int row = 0; row < size; ++row) {
            double r, g, b;
            double off = row + 0.5 - mid;
            if (off < -hh) {  // ceiling
                double f = 0.18 + 0.1 * (-off) / mid;
                r = g = b = f;
            } else if (off > hh) {  // floor
                double f = 0.30 + 0.25 * off / mid;
                r = f;
                g = f;
                b = f * 0.95;
            } else {
                double v = off / hh;  // -1 top of wall .. 1 bottom
                if (v > 0.72) {
                    // skirting stripe; alternates per wall for orientation cues
                    bool bright = (hit.wall % 2) == 0;
                    r = bright ? 0.85 : 0.2;
                    g = bright ? 0.75 : 0.2;
                    b = 0.1;
                } else if (v > -0.35 && v < 0.25) {
                    r = wr;
                    g = wg;
                    b = wb;
                } else {
                    r = g = b = 0.55;  // concrete
                }
                r *= shade;
                g *= shade;
                b *= shade;
            }
            img.at(0, row, col) = r;
            img.at(1, row, col) = g;
            img.at(2, row, col) = b;
        }
    }

    if (with_vehicles) {
        std::vector<const Vehicle*> order;
        for (const auto& v : world.vehicles) order.push_back(&v);
        std::sort(order.begin(), order.end(), [&](const Vehicle* a, const Vehicle* b) {
            double da = (a->x - pose.x) * (a->x - pose.x) + (a->y - pose.y) * (a->y - pose.y);
            double db = (b->x - pose.x) * (b->x - pose.x) + (b->y - pose.y) * (b->y - pose.y);
            return da > db;  // far first
        });
        for (const Vehicle* v : order) {
            double rx = v->x - pose.x, ry = v->y - pose.y;
            double d = std::hypot(rx, ry);
            if (d < 0.8) continue;
            double bearing = wrap_pi(std::atan2(ry, rx) - pose.theta);
            if (std::abs(bearing) > kFov * 0.62) continue;
            double dperp = d * std::cos(bearing);
            if (dperp < 0.3) continue;
            int hpx = std::clamp(static_cast<int>(std::lround(wall_scale * 2.0 / dperp)),
                                 4, size);
            int wpx = std::clamp(static_cast<int>(std::lround(hpx * 1.8)), 6, 2 * size);
            Sprite sp = draw_car_sprite(v->params, hpx, wpx);
            int ccol = static_cast<int>(std::lround((bearing / kFov + 0.5) * size));
            int bottom = static_cast<int>(std::lround(mid + wall_scale / dperp * 0.92));
            double shade = 1.0 / (1.0 + 0.05 * d);
            for (int sy = 0; sy < hpx; ++sy) {
                int row = bottom - hpx + sy;
                if (row < 0 || row >= size) continue;
                for (int sx = 0; sx < wpx; ++sx) {
                    int col = ccol - wpx / 2 + sx;
                    if (col < 0 || col >= size) continue;
                    if (!sp.alpha.at(sy, sx)) continue;
                    if (dperp >= depth[col] - 0.05) continue;  // behind wall/pillar
                    img.at(0, row, col) = sp.patch.at(0, sy, sx) * shade;
                    img.at(1, row, col) = sp.patch.at(1, sy, sx) * shade;
                    img.at(2, row, col) = sp.patch.at(2, sy, sx) * shade;
                    if (vehicle_mask) vehicle_mask->at(row, col) = 1;
                }
            }
        }
    }
    quantize8(img);
    return img;
}

}  // namespace blindnet
