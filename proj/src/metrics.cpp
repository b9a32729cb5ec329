#include "blindnet/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fs = std::filesystem;

namespace blindnet {

std::string region_name(Region r) {
    switch (r) {
        case Region::full: return "full";
        case Region::masked: return "masked";
        default: return "unmasked";
    }
}

MetricReport image_metrics(const Image& a, const Image& b, const Mask* mask,
                           Region region) {
    if (a.channels != b.channels || a.height != b.height || a.width != b.width)
        throw std::invalid_argument("image_metrics: image shapes differ");
    if (region != Region::full && !mask)
        throw std::invalid_argument("image_metrics: region requires a mask");
    if (mask && (mask->height != a.height || mask->width != a.width))
        throw std::invalid_argument("image_metrics: mask size does not match images");

    MetricReport rep;
    rep.region = region;
    double sum_abs = 0, sum_sq = 0;
    size_t count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (region == Region::masked && !mask->at(y, x)) continue;
            if (region == Region::unmasked && mask->at(y, x)) continue;
            for (int c = 0; c < a.channels; ++c) {
                double d = a.at(c, y, x) - b.at(c, y, x);
                sum_abs += std::abs(d);
                sum_sq += d * d;
                ++count;
            }
        }
    if (count == 0)
        throw std::invalid_argument("image_metrics: region selects zero pixels");
    rep.count = count;
    rep.l1 = sum_abs / count;
    rep.mse = sum_sq / count;
    rep.psnr = rep.mse == 0.0 ? std::numeric_limits<double>::infinity()
                              : -10.0 * std::log10(rep.mse);
    return rep;
}

namespace {

struct PairLatents {
    HierLatent clean, overlaid;
};

PairLatents encode_pair(const BlindNet& model, const OverlaySample& s) {
    Tape tape;
    PairLatents out;
    out.clean = model.encode_hier(tape, image_to_tensor(s.clean));
    out.overlaid = model.encode_hier(tape, image_to_tensor(s.overlaid));
    return out;
}

}  // namespace

double latent_blindness_gap(const BlindNet& model,
                            const std::vector<OverlaySample>& pairs) {
    if (pairs.empty())
        throw std::invalid_argument("latent_blindness_gap: empty evaluation set");
    double total = 0;
    for (const auto& s : pairs) {
        auto lat = encode_pair(model, s);
        const auto& a = lat.clean.e_concat;
        const auto& b = lat.overlaid.e_concat;
        double acc = 0;
        for (size_t i = 0; i < a->numel(); ++i) acc += std::abs(b->data[i] - a->data[i]);
        total += acc / static_cast<double>(a->numel());
    }
    return total / pairs.size();
}

double code_agreement(const BlindNet& model, const std::vector<OverlaySample>& pairs) {
    if (pairs.empty())
        throw std::invalid_argument("code_agreement: empty evaluation set");
    size_t agree = 0, total = 0;
    for (const auto& s : pairs) {
        auto lat = encode_pair(model, s);
        for (size_t i = 0; i < lat.clean.indices_bottom.size(); ++i) {
            agree += lat.clean.indices_bottom[i] == lat.overlaid.indices_bottom[i];
            ++total;
        }
    }
    return static_cast<double>(agree) / total;
}

std::vector<DecodeRow> blindness_decode_report(const BlindNet& model,
                                               const std::vector<OverlaySample>& pairs,
                                               const std::string& out_dir) {
    std::vector<DecodeRow> rows;
    if (pairs.empty()) return rows;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    int idx = 0;
    for (const auto& s : pairs) {
        Tape tape;
        auto lat = model.encode_hier(tape, image_to_tensor(s.overlaid));
        auto recon_t = model.decode(tape, lat.e_concat);
        Image recon = tensor_to_image(*recon_t);
        quantize8(recon);

        DecodeRow row;
        row.name = "pair_" + std::to_string(idx);
        row.full = image_metrics(recon, s.clean);
        if (s.mask.empty_region()) {
            row.empty_mask = true;
        } else {
            row.masked = image_metrics(recon, s.clean, &s.mask, Region::masked);
            row.unmasked = image_metrics(recon, s.clean, &s.mask, Region::unmasked);
        }
        if (!out_dir.empty()) {
            const int h = s.clean.height, w = s.clean.width;
            Image trip(3, h, 3 * w);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        trip.at(c, y, x) = s.overlaid.at(c, y, x);
                        trip.at(c, y, w + x) = recon.at(c, y, x);
                        trip.at(c, y, 2 * w + x) = s.clean.at(c, y, x);
                    }
            write_ppm((fs::path(out_dir) / (row.name + ".ppm")).string(), trip);
        }
        rows.push_back(std::move(row));
        ++idx;
    }
    return rows;
}

void write_decode_csv(const std::vector<DecodeRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_decode_csv: cannot open " + path);
    f << "name,region,l1,mse,psnr,count\n";
    auto emit = [&f](const std::string& name, const MetricReport& r) {
        f << name << "," << region_name(r.region) << "," << r.l1 << "," << r.mse << ","
          << r.psnr << "," << r.count << "\n";
    };
    for (const auto& row : rows) {
        emit(row.name, row.full);
        if (row.empty_mask) {
            f << row.name << ",masked,empty region,,,\n";
        } else {
            emit(row.name, *row.masked);
            emit(row.name, *row.unmasked);
        }
    }
}

}  // namespace blindnet
