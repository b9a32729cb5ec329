#pragma once

#include "blindnet/data.hpp"
#include "blindnet/image.hpp"
#include "blindnet/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace blindnet {

enum class Region { full, masked, unmasked };

std::string region_name(Region r);

struct MetricReport {
    double l1 = 0;
    double mse = 0;
    double psnr = 0;  // -10*log10(mse), peak 1.0; +inf when mse == 0
    Region region = Region::full;
    size_t count = 0;  // participating elements
};

// L1/MSE/PSNR between two [0,1] images over the selected region.
// Throws when the region selects zero pixels.
MetricReport image_metrics(const Image& a, const Image& b,
                           const Mask* mask = nullptr, Region region = Region::full);

// Latent gap as a metric: mean element-L1 between paired e_concat latents.
double latent_blindness_gap(const BlindNet& model,
                            const std::vector<OverlaySample>& pairs);

// Fraction of spatial positions whose bottom-level code index agrees across arms.
double code_agreement(const BlindNet& model, const std::vector<OverlaySample>& pairs);

struct DecodeRow {
    std::string name;
    bool empty_mask = false;
    std::optional<MetricReport> masked, unmasked;
    MetricReport full;
};

// Decodes each overlaid image through the model, writes triptychs
// (x_{c'}, reconstruction, x_c) when out_dir is nonempty, and scores the
// reconstruction against the CLEAN image.
std::vector<DecodeRow> blindness_decode_report(const BlindNet& model,
                                               const std::vector<OverlaySample>& pairs,
                                               const std::string& out_dir);

void write_decode_csv(const std::vector<DecodeRow>& rows, const std::string& path);

}  // namespace blindnet
