#include "blindnet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace blindnet {

void BlindNetConfig::validate() const {
    if (image_size % 8 != 0)
        throw std::invalid_argument("BlindNetConfig: image_size must be divisible by 8");
    if (base_channels < 1 || bottom_dim < 1 || top_dim < 1 || bottom_codes < 2 ||
        top_codes < 2)
        throw std::invalid_argument("BlindNetConfig: invalid channel/codebook sizes");
}

TensorPtr image_to_tensor(const Image& img, bool requires_grad) {
    auto t = make_tensor({1, img.channels, img.height, img.width}, img.data,
                         requires_grad);
    return t;
}

Image tensor_to_image(const Tensor& t) {
    if (t.shape.size() != 4 || t.shape[0] != 1)
        throw std::invalid_argument("tensor_to_image: expected [1,C,H,W]");
    Image img(t.shape[1], t.shape[2], t.shape[3]);
    img.data = t.data;
    return img;
}

BlindNet::BlindNet(const BlindNetConfig& c, uint64_t seed) : cfg(c) {
    cfg.validate();
    const int C = cfg.base_channels;
    int layer = 0;
    auto conv_param = [&](const std::string& name, int f, int cin, int k) {
        Rng rng = Rng::substream(seed, 0xc0de, layer++);
        double std = std::sqrt(2.0 / (cin * k * k));
        auto w = make_tensor({f, cin, k, k}, true);
        for (auto& v : w->data) v = rng.normal() * std;
        params[name + ".w"] = w;
        params[name + ".b"] = make_tensor({f}, true);
    };
    // conv_transpose weights are [C_in, F, kh, kw]
    auto deconv_param = [&](const std::string& name, int cin, int f, int k) {
        Rng rng = Rng::substream(seed, 0xdec0de, layer++);
        double std = std::sqrt(2.0 / (cin * k * k));
        auto w = make_tensor({cin, f, k, k}, true);
        for (auto& v : w->data) v = rng.normal() * std;
        params[name + ".w"] = w;
        params[name + ".b"] = make_tensor({f}, true);
    };
    auto res_params = [&](const std::string& prefix, int ch) {
        conv_param(prefix + ".c1", ch, ch, 3);
        conv_param(prefix + ".c2", ch, ch, 3);
    };

    conv_param("eb.conv1", C, cfg.in_channels, 4);
    conv_param("eb.conv2", C, C, 4);
    res_params("eb.res1", C);
    res_params("eb.res2", C);
    conv_param("eb.out", cfg.bottom_dim, C, 3);

    conv_param("et.conv1", C, cfg.bottom_dim, 4);
    res_params("et.res1", C);
    conv_param("et.out", cfg.top_dim, C, 3);

    conv_param("dec.conv_in", C, cfg.concat_channels(), 3);
    res_params("dec.res1", C);
    res_params("dec.res2", C);
    deconv_param("dec.up1", C, C, 4);
    deconv_param("dec.up2", C, C, 4);
    conv_param("dec.out", cfg.in_channels, C, 3);

    Rng rb = Rng::substream(seed, 0xcb0, 0);
    Rng rt = Rng::substream(seed, 0xcb1, 0);
    cb_bottom = Codebook(cfg.bottom_codes, cfg.bottom_dim, rb);
    cb_top = Codebook(cfg.top_codes, cfg.top_dim, rt);
    for (Codebook* cb : {&cb_bottom, &cb_top}) {
        cb->decay = cfg.ema_decay;
        cb->laplace_eps = cfg.laplace_eps;
        cb->beta = cfg.beta;
    }
}

TensorPtr BlindNet::p(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end())
        throw std::logic_error("BlindNet: unknown parameter " + name);
    return it->second;
}

TensorPtr BlindNet::residual_block(Tape& t, const TensorPtr& x,
                                   const std::string& prefix) const {
    auto h = ops::relu(t, x);
    h = ops::conv2d(t, h, p(prefix + ".c1.w"), p(prefix + ".c1.b"), 1, 1);
    h = ops::relu(t, h);
    h = ops::conv2d(t, h, p(prefix + ".c2.w"), p(prefix + ".c2.b"), 1, 1);
    return ops::add(t, x, h);
}

HierLatent BlindNet::encode_hier(Tape& t, const TensorPtr& x) const {
    if (x->shape != std::vector<int>{1, cfg.in_channels, cfg.image_size, cfg.image_size} &&
        !(x->shape.size() == 4 && x->shape[1] == cfg.in_channels &&
          x->shape[2] % 8 == 0 && x->shape[3] % 8 == 0))
        throw std::invalid_argument("encode_hier: input shape " + shape_str(x->shape) +
                                    " does not match config");
    HierLatent lat;
    auto h = ops::conv2d(t, x, p("eb.conv1.w"), p("eb.conv1.b"), 2, 1);
    h = ops::relu(t, h);
    h = ops::conv2d(t, h, p("eb.conv2.w"), p("eb.conv2.b"), 2, 1);
    h = residual_block(t, h, "eb.res1");
    h = residual_block(t, h, "eb.res2");
    lat.pre_bottom = ops::conv2d(t, h, p("eb.out.w"), p("eb.out.b"), 1, 1);

    auto ht = ops::conv2d(t, lat.pre_bottom, p("et.conv1.w"), p("et.conv1.b"), 2, 1);
    ht = residual_block(t, ht, "et.res1");
    lat.pre_top = ops::conv2d(t, ht, p("et.out.w"), p("et.out.b"), 1, 1);

    auto qb = quantize(t, lat.pre_bottom, cb_bottom);
    auto qt = quantize(t, lat.pre_top, cb_top);
    lat.indices_bottom = qb.indices;
    lat.indices_top = qt.indices;
    lat.e_bottom = straight_through(t, lat.pre_bottom, qb.quantized);
    lat.e_top = straight_through(t, lat.pre_top, qt.quantized);
    lat.commit_loss = ops::add(t, qb.commit_loss, qt.commit_loss);
    lat.e_concat =
        ops::concat_channels(t, lat.e_bottom, ops::upsample_nearest2x(t, lat.e_top));
    return lat;
}

TensorPtr BlindNet::decode(Tape& t, const TensorPtr& e_concat) const {
    if (e_concat->shape.size() != 4 || e_concat->shape[1] != cfg.concat_channels())
        throw std::invalid_argument("decode: latent shape " + shape_str(e_concat->shape) +
                                    " does not match config");
    auto h = ops::conv2d(t, e_concat, p("dec.conv_in.w"), p("dec.conv_in.b"), 1, 1);
    h = residual_block(t, h, "dec.res1");
    h = residual_block(t, h, "dec.res2");
    h = ops::conv_transpose2d(t, h, p("dec.up1.w"), p("dec.up1.b"), 2, 1);
    h = ops::relu(t, h);
    h = ops::conv_transpose2d(t, h, p("dec.up2.w"), p("dec.up2.b"), 2, 1);
    h = ops::relu(t, h);
    h = ops::conv2d(t, h, p("dec.out.w"), p("dec.out.b"), 1, 1);
    return ops::sigmoid(t, h);
}

SiameseOutput BlindNet::siamese_forward(Tape& t, const TensorPtr& x_clean,
                                        const TensorPtr& x_overlaid) const {
    if (x_clean->shape != x_overlaid->shape)
        throw std::invalid_argument("siamese_forward: arm input shapes differ");
    SiameseOutput out;
    out.latent_clean = encode_hier(t, x_clean);
    out.latent_overlaid = encode_hier(t, x_overlaid);
    out.recon_clean = decode(t, out.latent_clean.e_concat);
    out.recon_overlaid = decode(t, out.latent_overlaid.e_concat);
    return out;
}

void BlindNet::ema_from_latent(const HierLatent& latent) {
    ema_update(cb_bottom, latent.pre_bottom, latent.indices_bottom);
    ema_update(cb_top, latent.pre_top, latent.indices_top);
}

void BlindNet::reinit_dead(const HierLatent& latent, Rng& rng) {
    auto threshold = [](const Codebook& cb) {
        double total = 0;
        for (double n : cb.ema_cluster_size) total += n;
        return 1e-3 * total / cb.K;
    };
    double tb = threshold(cb_bottom);
    if (tb > 0) reinit_dead_codes(cb_bottom, latent.pre_bottom, tb, rng);
    double tt = threshold(cb_top);
    if (tt > 0) reinit_dead_codes(cb_top, latent.pre_top, tt, rng);
}

std::vector<std::pair<std::string, TensorPtr>> BlindNet::parameters() const {
    return {params.begin(), params.end()};
}

void BlindNet::zero_grads() {
    for (auto& [name, t] : params) t->zero_grad();
}

}  // namespace blindnet
