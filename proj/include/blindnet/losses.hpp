#pragma once

#include "blindnet/image.hpp"
#include "blindnet/model.hpp"
#include "blindnet/tensor.hpp"

namespace blindnet {

struct LossWeights {
    double gamma_q = 1.0;  // weight of the commitment term inside the VQ loss
    double gamma_o = 1.0;  // weight of the Siamese reconstruction term
    double omega = 1.0;    // weight of the whole Siamese loss; 0 = non-blind
};

// Per-batch scalars, one CSV row per training step.
struct LossReport {
    double l_q = 0, l_r = 0, l_vq = 0, l_l = 0, l_o = 0, l_s = 0, total = 0;
    double lr = 0;
    long step = 0;
};

// Mean squared error over the pixels OUTSIDE the mask, normalized by the
// count of participating elements. The network gets nothing for what it
// paints inside the mask.
TensorPtr loss_masked_recon(Tape& t, const TensorPtr& target,
                            const TensorPtr& recon, const Mask& mask);

// Mean squared error between the clean image and the overlaid arm's
// reconstruction INSIDE the mask; zero when the mask is empty.
TensorPtr loss_siamese_recon(Tape& t, const TensorPtr& clean,
                             const TensorPtr& recon_overlaid, const Mask& mask);

// Element-mean L1 distance between the two arms' concatenated latents.
TensorPtr loss_latent(Tape& t, const HierLatent& clean, const HierLatent& overlaid,
                      bool pre_quant = false);

TensorPtr plain_mse(Tape& t, const TensorPtr& a, const TensorPtr& b);

struct TotalLoss {
    TensorPtr total;
    LossReport report;
};

// l_vq = l_r + gamma_q*l_q; l_s = l_l + gamma_o*l_o; total = l_vq + omega*l_s.
TotalLoss compose_total(Tape& t, const TensorPtr& l_r, const TensorPtr& l_q,
                        const TensorPtr& l_l, const TensorPtr& l_o,
                        const LossWeights& w);

}  // namespace blindnet
