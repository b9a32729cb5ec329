#pragma once

#include "blindnet/rng.hpp"
#include "blindnet/tensor.hpp"

#include <vector>

namespace blindnet {

// K x D embedding table with EMA cluster statistics. The codebook never
// receives gradients; it learns only through ema_update.
struct Codebook {
    int K = 0;
    int D = 0;
    double decay = 0.99;
    double laplace_eps = 1e-5;
    double beta = 0.25;  // commitment weight

    std::vector<Scalar> embeddings;       // K*D, row-major
    std::vector<Scalar> ema_cluster_size; // K
    std::vector<Scalar> ema_embed_sum;    // K*D

    Codebook() = default;
    Codebook(int k, int d, Rng& rng, double init_scale = 0.1);

    const Scalar* row(int k) const { return embeddings.data() + static_cast<size_t>(k) * D; }
};

struct QuantizeResult {
    TensorPtr quantized;   // rows of the codebook, constant w.r.t. the tape
    std::vector<int> indices;  // one per spatial position, row-major [N][H][W]
    TensorPtr commit_loss; // beta * mean||z - sg(quantized)||^2
};

// Nearest-neighbor lookup over [N,D,H,W] (or [D,H,W]) input. Ties break to
// the lowest index.
QuantizeResult quantize(Tape& t, const TensorPtr& z, const Codebook& cb);

// Forward equals quantized; gradient passes through to z unchanged.
TensorPtr straight_through(Tape& t, const TensorPtr& z, const TensorPtr& quantized);

// EMA codebook maintenance; call once per batch, outside the tape.
void ema_update(Codebook& cb, const TensorPtr& z, const std::vector<int>& indices);

// Codes whose EMA cluster size fell below threshold are reseeded from z.
// Returns the number of codes reassigned.
int reinit_dead_codes(Codebook& cb, const TensorPtr& z, double threshold, Rng& rng);

}  // namespace blindnet
