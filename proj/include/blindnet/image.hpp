#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace blindnet {

// Planar CHW image, values in [0,1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t numel() const { return data.size(); }
};

// Binary mask, 0 or 1 per pixel.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t count_set() const;
    bool empty_region() const { return count_set() == 0; }
};

// Snaps values to the 8-bit grid so in-memory pixels match a PPM round trip.
void quantize8(Image& img);

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm(const std::string& path);

}  // namespace blindnet
