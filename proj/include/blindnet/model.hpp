#pragma once

#include "blindnet/codebook.hpp"
#include "blindnet/image.hpp"
#include "blindnet/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace blindnet {

struct BlindNetConfig {
    int image_size = 48;
    int in_channels = 3;
    int base_channels = 32;
    int bottom_codes = 128;   // K_b
    int bottom_dim = 32;      // D_b
    int top_codes = 64;       // K_t
    int top_dim = 32;         // D_t
    double beta = 0.25;       // commitment weight
    double ema_decay = 0.99;
    double laplace_eps = 1e-5;
    bool latent_loss_pre_quant = false;

    void validate() const;
    int bottom_res() const { return image_size / 4; }
    int top_res() const { return image_size / 8; }
    int concat_channels() const { return bottom_dim + top_dim; }
};

// Quantized hierarchical embedding of one image.
struct HierLatent {
    TensorPtr e_top;      // straight-through, [1,D_t,H/8,W/8]
    TensorPtr e_bottom;   // straight-through, [1,D_b,H/4,W/4]
    TensorPtr e_concat;   // [1,D_b+D_t,H/4,W/4]
    TensorPtr pre_bottom; // encoder output before quantization
    TensorPtr pre_top;
    std::vector<int> indices_top, indices_bottom;
    TensorPtr commit_loss;  // both levels summed
};

struct SiameseOutput {
    HierLatent latent_clean;
    HierLatent latent_overlaid;
    TensorPtr recon_clean;
    TensorPtr recon_overlaid;
};

TensorPtr image_to_tensor(const Image& img, bool requires_grad = false);
Image tensor_to_image(const Tensor& t);

// Two-level hierarchical VQ autoencoder. One parameter store; the Siamese
// arms are two forward passes over the same tensors, so weight sharing is
// structural rather than a synchronization concern.
class BlindNet {
public:
    BlindNetConfig cfg;
    std::map<std::string, TensorPtr> params;  // ordered; deterministic walks
    Codebook cb_bottom, cb_top;

    BlindNet(const BlindNetConfig& cfg, uint64_t seed);

    HierLatent encode_hier(Tape& tape, const TensorPtr& x) const;
    TensorPtr decode(Tape& tape, const TensorPtr& e_concat) const;
    SiameseOutput siamese_forward(Tape& tape, const TensorPtr& x_clean,
                                  const TensorPtr& x_overlaid) const;

    // EMA codebook maintenance from one encoded sample; call outside backward.
    void ema_from_latent(const HierLatent& latent);
    void reinit_dead(const HierLatent& latent, Rng& rng);

    std::vector<std::pair<std::string, TensorPtr>> parameters() const;
    void zero_grads();

private:
    TensorPtr p(const std::string& name) const;
    TensorPtr residual_block(Tape& tape, const TensorPtr& x,
                             const std::string& prefix) const;
};

}  // namespace blindnet
