#include "blindnet/codebook.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace blindnet {

Codebook::Codebook(int k, int d, Rng& rng, double init_scale) : K(k), D(d) {
    if (K < 2 || D < 1) throw std::invalid_argument("Codebook: need K >= 2, D >= 1");
    embeddings.resize(static_cast<size_t>(K) * D);
    for (Scalar& v : embeddings) v = rng.normal() * init_scale;
    ema_cluster_size.assign(K, 0.0);
    ema_embed_sum = embeddings;  // consistent with cluster size ~0 after smoothing
}

namespace {

struct SpatialView {
    int n, d, positions;      // positions per sample (H*W)
    size_t sample_stride;     // d * positions
};

SpatialView spatial_view(const TensorPtr& z, const Codebook& cb) {
    if (cb.K == 0) throw std::invalid_argument("quantize: empty codebook");
    SpatialView v{};
    if (z->shape.size() == 4) {
        v.n = z->shape[0];
        v.d = z->shape[1];
        v.positions = z->shape[2] * z->shape[3];
    } else if (z->shape.size() == 3) {
        v.n = 1;
        v.d = z->shape[0];
        v.positions = z->shape[1] * z->shape[2];
    } else {
        throw std::invalid_argument("quantize: input must be [N,D,H,W] or [D,H,W]");
    }
    if (v.d != cb.D)
        throw std::invalid_argument("quantize: channel axis " + std::to_string(v.d) +
                                    " != codebook D " + std::to_string(cb.D));
    v.sample_stride = static_cast<size_t>(v.d) * v.positions;
    return v;
}

}  // namespace

QuantizeResult quantize(Tape& t, const TensorPtr& z, const Codebook& cb) {
    SpatialView v = spatial_view(z, cb);
    QuantizeResult res;
    res.indices.resize(static_cast<size_t>(v.n) * v.positions);
    auto q = make_tensor(z->shape, false);

    for (int s = 0; s < v.n; ++s) {
        const Scalar* base = z->data.data() + s * v.sample_stride;
        for (int p = 0; p < v.positions; ++p) {
            int best = 0;
            Scalar best_d = std::numeric_limits<Scalar>::infinity();
            for (int k = 0; k < cb.K; ++k) {
                const Scalar* e = cb.row(k);
                Scalar dist = 0.0;
                for (int c = 0; c < v.d; ++c) {
                    Scalar diff = base[static_cast<size_t>(c) * v.positions + p] - e[c];
                    dist += diff * diff;
                }
                if (dist < best_d) {  // strict: ties resolve to the lowest index
                    best_d = dist;
                    best = k;
                }
            }
            res.indices[static_cast<size_t>(s) * v.positions + p] = best;
            const Scalar* e = cb.row(best);
            Scalar* qb = q->data.data() + s * v.sample_stride;
            for (int c = 0; c < v.d; ++c)
                qb[static_cast<size_t>(c) * v.positions + p] = e[c];
        }
    }
    res.quantized = q;
    auto diff = ops::sub(t, z, q);
    res.commit_loss =
        ops::scale(t, ops::sum_sq(t, diff), cb.beta / static_cast<Scalar>(z->numel()));
    return res;
}

TensorPtr straight_through(Tape& t, const TensorPtr& z, const TensorPtr& quantized) {
    if (z->shape != quantized->shape)
        throw std::invalid_argument("straight_through: shape mismatch " +
                                    shape_str(z->shape) + " vs " +
                                    shape_str(quantized->shape));
    auto out = make_tensor(z->shape, z->requires_grad);
    out->data = quantized->data;  // bit-exact forward copy
    if (out->requires_grad)
        t.record([z, out] {
            for (size_t i = 0; i < z->numel(); ++i) z->grad[i] += out->grad[i];
        });
    return out;
}

void ema_update(Codebook& cb, const TensorPtr& z, const std::vector<int>& indices) {
    SpatialView v = spatial_view(z, cb);
    if (indices.size() != static_cast<size_t>(v.n) * v.positions)
        throw std::invalid_argument("ema_update: index count does not match input");

    std::vector<Scalar> count(cb.K, 0.0);
    std::vector<Scalar> sum(static_cast<size_t>(cb.K) * cb.D, 0.0);
    for (int s = 0; s < v.n; ++s) {
        const Scalar* base = z->data.data() + s * v.sample_stride;
        for (int p = 0; p < v.positions; ++p) {
            int k = indices[static_cast<size_t>(s) * v.positions + p];
            count[k] += 1.0;
            Scalar* dst = sum.data() + static_cast<size_t>(k) * cb.D;
            for (int c = 0; c < v.d; ++c)
                dst[c] += base[static_cast<size_t>(c) * v.positions + p];
        }
    }

    Scalar total = 0.0;
    for (int k = 0; k < cb.K; ++k) {
        cb.ema_cluster_size[k] =
            cb.decay * cb.ema_cluster_size[k] + (1.0 - cb.decay) * count[k];
        total += cb.ema_cluster_size[k];
        for (int c = 0; c < cb.D; ++c) {
            size_t i = static_cast<size_t>(k) * cb.D + c;
            cb.ema_embed_sum[i] =
                cb.decay * cb.ema_embed_sum[i] + (1.0 - cb.decay) * sum[i];
        }
    }
    if (total <= 0.0) return;
    // Laplace smoothing keeps near-empty clusters from dividing by ~0.
    for (int k = 0; k < cb.K; ++k) {
        Scalar n_k = (cb.ema_cluster_size[k] + cb.laplace_eps) /
                     (total + cb.K * cb.laplace_eps) * total;
        for (int c = 0; c < cb.D; ++c)
            cb.embeddings[static_cast<size_t>(k) * cb.D + c] =
                cb.ema_embed_sum[static_cast<size_t>(k) * cb.D + c] / n_k;
    }
}

int reinit_dead_codes(Codebook& cb, const TensorPtr& z, double threshold, Rng& rng) {
    if (threshold <= 0.0) throw std::invalid_argument("reinit_dead_codes: threshold must be > 0");
    SpatialView v = spatial_view(z, cb);
    const size_t n_vectors = static_cast<size_t>(v.n) * v.positions;
    int reassigned = 0;
    for (int k = 0; k < cb.K; ++k) {
        if (cb.ema_cluster_size[k] >= threshold) continue;
        size_t pick = rng.uniform_int(n_vectors);
        int s = static_cast<int>(pick / v.positions);
        int p = static_cast<int>(pick % v.positions);
        const Scalar* base = z->data.data() + s * v.sample_stride;
        for (int c = 0; c < cb.D; ++c) {
            Scalar val = base[static_cast<size_t>(c) * v.positions + p];
            cb.embeddings[static_cast<size_t>(k) * cb.D + c] = val;
            cb.ema_embed_sum[static_cast<size_t>(k) * cb.D + c] = val;
        }
        cb.ema_cluster_size[k] = 1.0;
        ++reassigned;
    }
    return reassigned;
}

}  // namespace blindnet
