#include "blindnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace blindnet {

size_t Mask::count_set() const {
    return static_cast<size_t>(std::count(data.begin(), data.end(), uint8_t{1}));
}

static uint8_t to_byte(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

void quantize8(Image& img) {
    for (double& v : img.data) v = to_byte(v) / 255.0;
}

void write_ppm(const std::string& path, const Image& img) {
    if (img.channels != 3) throw std::invalid_argument("write_ppm: expected 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<size_t>(x) * 3 + c] = to_byte(img.at(c, y, x));
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

static void read_pnm_header(std::ifstream& f, const std::string& magic,
                            const std::string& path, int& w, int& h) {
    std::string tag;
    f >> tag;
    if (tag != magic) throw std::runtime_error(path + ": expected " + magic + " header");
    int maxval;
    f >> w >> h >> maxval;
    if (!f || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error(path + ": unsupported PNM header");
    f.get();  // single whitespace before raster
}

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    int w, h;
    read_pnm_header(f, "P6", path, w, h);
    Image img(3, h, w);
    std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!f) throw std::runtime_error("read_ppm: truncated raster in " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    return img;
}

void write_pgm(const std::string& path, const Mask& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<uint8_t> row(mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

Mask read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    int w, h;
    read_pnm_header(f, "P5", path, w, h);
    Mask mask(h, w);
    std::vector<uint8_t> row(w);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!f) throw std::runtime_error("read_pgm: truncated raster in " + path);
        for (int x = 0; x < w; ++x) {
            if (row[x] != 0 && row[x] != 255)
                throw std::runtime_error("read_pgm: non-binary mask value in " + path);
            mask.at(y, x) = row[x] ? 1 : 0;
        }
    }
    return mask;
}

}  // namespace blindnet
