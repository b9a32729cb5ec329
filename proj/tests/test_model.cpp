#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "blindnet/losses.hpp"
#include "blindnet/model.hpp"
#include "testutil.hpp"

#include <cmath>
#include <set>

using namespace blindnet;

namespace {

BlindNetConfig tiny_config() {
    BlindNetConfig cfg;
    cfg.image_size = 16;
    cfg.base_channels = 4;
    cfg.bottom_codes = 8;
    cfg.bottom_dim = 4;
    cfg.top_codes = 8;
    cfg.top_dim = 4;
    return cfg;
}

TensorPtr random_image(int size, Rng& rng) {
    auto t = make_tensor({1, 3, size, size}, false);
    for (auto& v : t->data) v = rng.uniform();
    return t;
}

}  // namespace

TEST_CASE("encoder produces the expected hierarchy of shapes") {
    BlindNetConfig cfg;  // 48x48 defaults
    BlindNet model(cfg, 3);
    Rng rng(10);
    auto x = random_image(48, rng);
    Tape tape;
    HierLatent lat = model.encode_hier(tape, x);
    CHECK(lat.e_bottom->shape == std::vector<int>{1, 32, 12, 12});
    CHECK(lat.e_top->shape == std::vector<int>{1, 32, 6, 6});
    CHECK(lat.e_concat->shape == std::vector<int>{1, 64, 12, 12});
    CHECK(lat.indices_bottom.size() == 12 * 12);
    CHECK(lat.indices_top.size() == 6 * 6);
    TensorPtr recon = model.decode(tape, lat.e_concat);
    CHECK(recon->shape == x->shape);
}

TEST_CASE("encoding is deterministic") {
    BlindNet model(tiny_config(), 5);
    Rng rng(11);
    auto x = random_image(16, rng);
    Tape t1, t2;
    HierLatent a = model.encode_hier(t1, x);
    HierLatent b = model.encode_hier(t2, x);
    CHECK(a.indices_bottom == b.indices_bottom);
    CHECK(a.indices_top == b.indices_top);
    CHECK(a.e_concat->data == b.e_concat->data);
}

TEST_CASE("decode is deterministic and bounded by the sigmoid") {
    BlindNet model(tiny_config(), 5);
    Rng rng(12);
    auto x = random_image(16, rng);
    Tape t1;
    HierLatent lat = model.encode_hier(t1, x);
    TensorPtr r1 = model.decode(t1, lat.e_concat);
    Tape t2;
    HierLatent lat2 = model.encode_hier(t2, x);
    TensorPtr r2 = model.decode(t2, lat2.e_concat);
    CHECK(r1->data == r2->data);
    for (double v : r1->data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("pixel perturbation only changes codes inside the sensitive region") {
    // Oracle: the set of bottom positions whose pre-quantization activations
    // move when one pixel moves. Code flips must stay inside that set, and
    // for a corner pixel the set must be a strict subset of the map.
    BlindNet model(tiny_config(), 7);
    Rng rng(13);
    auto x = random_image(16, rng);
    Tape t0;
    HierLatent base = model.encode_hier(t0, x);

    auto x2 = make_tensor(x->shape, x->data, false);
    x2->data[0] += 0.5;  // pixel (0,0), channel 0
    Tape t1;
    HierLatent pert = model.encode_hier(t1, x2);

    int hb = 4, wb = 4;  // 16/4
    std::set<int> sensitive;
    for (int yx = 0; yx < hb * wb; ++yx) {
        for (int c = 0; c < model.cfg.bottom_dim; ++c) {
            if (base.pre_bottom->data[c * hb * wb + yx] !=
                pert.pre_bottom->data[c * hb * wb + yx]) {
                sensitive.insert(yx);
                break;
            }
        }
    }
    CHECK(!sensitive.empty());
    for (int yx = 0; yx < hb * wb; ++yx)
        if (base.indices_bottom[yx] != pert.indices_bottom[yx])
            CHECK(sensitive.count(yx) == 1);
}

TEST_CASE("identical siamese inputs give identical latents and zero latent loss") {
    BlindNet model(tiny_config(), 21);
    Rng rng(14);
    auto x = random_image(16, rng);
    Tape tape;
    SiameseOutput out = model.siamese_forward(tape, x, x);
    CHECK(out.latent_clean.indices_bottom == out.latent_overlaid.indices_bottom);
    CHECK(out.latent_clean.indices_top == out.latent_overlaid.indices_top);
    CHECK(out.latent_clean.e_concat->data == out.latent_overlaid.e_concat->data);
    CHECK(out.recon_clean->data == out.recon_overlaid->data);
    TensorPtr ll = loss_latent(tape, out.latent_clean, out.latent_overlaid);
    CHECK(ll->data[0] == 0.0);
}

TEST_CASE("swapping the siamese arms swaps the outputs exactly") {
    BlindNet model(tiny_config(), 22);
    Rng rng(15);
    auto a = random_image(16, rng);
    auto b = random_image(16, rng);
    Tape t1, t2;
    SiameseOutput ab = model.siamese_forward(t1, a, b);
    SiameseOutput ba = model.siamese_forward(t2, b, a);
    CHECK(ab.recon_clean->data == ba.recon_overlaid->data);
    CHECK(ab.recon_overlaid->data == ba.recon_clean->data);
    CHECK(ab.latent_clean.indices_bottom == ba.latent_overlaid.indices_bottom);
    CHECK(ab.latent_overlaid.indices_bottom == ba.latent_clean.indices_bottom);
}

TEST_CASE("shared-parameter gradients are the sum of per-arm gradients") {
    BlindNet model(tiny_config(), 23);
    Rng rng(16);
    auto a = random_image(16, rng);
    auto b = random_image(16, rng);

    auto arm_loss = [&](Tape& t, const TensorPtr& x) {
        HierLatent lat = model.encode_hier(t, x);
        TensorPtr recon = model.decode(t, lat.e_concat);
        return ops::add(t, plain_mse(t, x, recon), lat.commit_loss);
    };

    auto grads_of = [&](const std::function<TensorPtr(Tape&)>& f) {
        model.zero_grads();
        Tape t;
        t.backward(f(t));
        std::map<std::string, std::vector<Scalar>> g;
        for (auto& [n, p] : model.params) g[n] = p->grad;
        return g;
    };

    auto ga = grads_of([&](Tape& t) { return arm_loss(t, a); });
    auto gb = grads_of([&](Tape& t) { return arm_loss(t, b); });
    auto gboth = grads_of([&](Tape& t) {
        return ops::add(t, arm_loss(t, a), arm_loss(t, b));
    });
    for (auto& [n, g] : gboth) {
        double worst = 0;
        for (size_t i = 0; i < g.size(); ++i)
            worst = std::max(worst, std::abs(g[i] - (ga[n][i] + gb[n][i])));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("end-to-end gradients match finite differences on the pre-quant path") {
    // Quantization is locally constant, so the finite-difference oracle runs
    // on the differentiable route: decode the concatenated pre-quantization
    // features. Checks a random subset of every parameter tensor.
    BlindNet model(tiny_config(), 24);
    Rng rng(17);
    auto x = random_image(16, rng);
    // Biases start at exactly zero, which parks ReLU-dead regions precisely
    // on the kink; jitter every parameter so the loss is differentiable at
    // the probe point.
    for (auto& [name, p] : model.params)
        for (auto& v : p->data) v += 0.01 * rng.normal();

    auto loss_fn = [&](Tape& t) {
        HierLatent lat = model.encode_hier(t, x);
        TensorPtr pre = ops::concat_channels(t, lat.pre_bottom,
                                             ops::upsample_nearest2x(t, lat.pre_top));
        TensorPtr recon = model.decode(t, pre);
        return ops::add(t, plain_mse(t, x, recon), lat.commit_loss);
    };

    model.zero_grads();
    {
        Tape t;
        t.backward(loss_fn(t));
    }
    const double h = 1e-5;
    double worst = 0;
    for (auto& [name, p] : model.params) {
        for (int probe = 0; probe < 3; ++probe) {
            size_t i = rng.uniform_int(static_cast<int>(p->numel()));
            double orig = p->data[i];
            Tape t1, t2;
            p->data[i] = orig + h;
            double up = loss_fn(t1)->data[0];
            p->data[i] = orig - h;
            double dn = loss_fn(t2)->data[0];
            p->data[i] = orig;
            double numeric = (up - dn) / (2 * h);
            double denom = std::max({std::abs(numeric), std::abs(p->grad[i]), 1e-8});
            worst = std::max(worst, std::abs(numeric - p->grad[i]) / denom);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("image round trip through tensors preserves values") {
    Rng rng(18);
    Image img(3, 16, 16);
    for (auto& v : img.data) v = rng.uniform();
    TensorPtr t = image_to_tensor(img);
    Image back = tensor_to_image(*t);
    CHECK(back.data == img.data);
    CHECK(back.height == 16);
    CHECK(back.width == 16);
}

TEST_CASE("config validation rejects sizes not divisible by 8") {
    BlindNetConfig cfg = tiny_config();
    cfg.image_size = 50;
    CHECK_THROWS(cfg.validate());
}
