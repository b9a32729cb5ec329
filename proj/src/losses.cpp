#include "blindnet/losses.hpp"

#include <stdexcept>

namespace blindnet {

namespace {

void check_mask(const TensorPtr& img, const Mask& mask, const char* op) {
    if (img->shape.size() != 4 || img->shape[0] != 1)
        throw std::invalid_argument(std::string(op) + ": expected [1,C,H,W] image");
    if (img->shape[2] != mask.height || img->shape[3] != mask.width)
        throw std::invalid_argument(std::string(op) + ": mask size " +
                                    std::to_string(mask.height) + "x" +
                                    std::to_string(mask.width) +
                                    " does not match image " + shape_str(img->shape));
    for (uint8_t v : mask.data)
        if (v != 0 && v != 1)
            throw std::invalid_argument(std::string(op) + ": mask is not binary");
}

// mask broadcast over channels, optionally complemented
TensorPtr mask_tensor(const TensorPtr& img, const Mask& mask, bool complement) {
    auto m = make_tensor(img->shape, false);
    const int c = img->shape[1], h = img->shape[2], w = img->shape[3];
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                bool set = mask.at(y, x) != 0;
                m->data[(static_cast<size_t>(ch) * h + y) * w + x] =
                    (complement ? !set : set) ? 1.0 : 0.0;
            }
    return m;
}

TensorPtr masked_sq_mean(Tape& t, const TensorPtr& a, const TensorPtr& b,
                         const Mask& mask, bool complement) {
    size_t region = complement ? mask.data.size() - mask.count_set() : mask.count_set();
    size_t count = region * a->shape[1];
    if (count == 0) return make_scalar(0.0);
    auto diff = ops::sub(t, a, b);
    auto masked = ops::mul(t, diff, mask_tensor(a, mask, complement));
    return ops::scale(t, ops::sum_sq(t, masked), 1.0 / static_cast<double>(count));
}

}  // namespace

TensorPtr loss_masked_recon(Tape& t, const TensorPtr& target, const TensorPtr& recon,
                            const Mask& mask) {
    check_mask(target, mask, "loss_masked_recon");
    if (target->shape != recon->shape)
        throw std::invalid_argument("loss_masked_recon: shape mismatch");
    return masked_sq_mean(t, target, recon, mask, true);
}

TensorPtr loss_siamese_recon(Tape& t, const TensorPtr& clean,
                             const TensorPtr& recon_overlaid, const Mask& mask) {
    check_mask(clean, mask, "loss_siamese_recon");
    if (clean->shape != recon_overlaid->shape)
        throw std::invalid_argument("loss_siamese_recon: shape mismatch");
    return masked_sq_mean(t, clean, recon_overlaid, mask, false);
}

TensorPtr loss_latent(Tape& t, const HierLatent& clean, const HierLatent& overlaid,
                      bool pre_quant) {
    TensorPtr a, b;
    if (pre_quant) {
        a = ops::concat_channels(t, clean.pre_bottom,
                                 ops::upsample_nearest2x(t, clean.pre_top));
        b = ops::concat_channels(t, overlaid.pre_bottom,
                                 ops::upsample_nearest2x(t, overlaid.pre_top));
    } else {
        a = clean.e_concat;
        b = overlaid.e_concat;
    }
    if (a->shape != b->shape)
        throw std::invalid_argument("loss_latent: latent shapes differ");
    auto diff = ops::sub(t, b, a);
    return ops::scale(t, ops::sum_abs(t, diff), 1.0 / static_cast<double>(a->numel()));
}

TensorPtr plain_mse(Tape& t, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("plain_mse: shape mismatch");
    auto diff = ops::sub(t, a, b);
    return ops::scale(t, ops::sum_sq(t, diff), 1.0 / static_cast<double>(a->numel()));
}

TotalLoss compose_total(Tape& t, const TensorPtr& l_r, const TensorPtr& l_q,
                        const TensorPtr& l_l, const TensorPtr& l_o,
                        const LossWeights& w) {
    auto l_vq = ops::add(t, l_r, ops::scale(t, l_q, w.gamma_q));
    auto l_s = ops::add(t, l_l, ops::scale(t, l_o, w.gamma_o));
    auto total = ops::add(t, l_vq, ops::scale(t, l_s, w.omega));
    TotalLoss out;
    out.total = total;
    out.report.l_r = l_r->data[0];
    out.report.l_q = l_q->data[0];
    out.report.l_vq = l_vq->data[0];
    out.report.l_l = l_l->data[0];
    out.report.l_o = l_o->data[0];
    out.report.l_s = l_s->data[0];
    out.report.total = total->data[0];
    return out;
}

}  // namespace blindnet
