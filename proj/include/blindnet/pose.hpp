#pragma once

#include "blindnet/model.hpp"
#include "blindnet/tensor.hpp"
#include "blindnet/world.hpp"

#include <map>
#include <string>
#include <vector>

namespace blindnet {

// Two fully connected layers over the flattened latent, with learned
// homoscedastic log-variances for the position and rotation tasks.
class PoseHead {
public:
    std::map<std::string, TensorPtr> params;

    PoseHead(int feat_dim, int hidden, uint64_t seed);

    struct Outputs {
        TensorPtr pos;       // [1,2] (x, y)
        TensorPtr cos_sin;   // [1,2] raw (cos, sin), renormalized at inference
        TensorPtr s_t, s_r;  // scalars
    };
    Outputs forward(Tape& t, const TensorPtr& feat) const;

    PoseLabel predict(const std::vector<Scalar>& feat) const;

    std::vector<std::pair<std::string, TensorPtr>> parameters() const {
        return {params.begin(), params.end()};
    }
    void zero_grads() {
        for (auto& [n, p] : params) p->zero_grad();
    }
    int feat_dim() const { return feat_dim_; }

private:
    int feat_dim_;
};

// L1 homoscedastic loss; angular residual wrapped into (-pi, pi].
TensorPtr homoscedastic_loss(Tape& t, const PoseHead::Outputs& pred,
                             const PoseLabel& gt);

// Frozen-encoder representation: flattened e_concat of one image.
std::vector<Scalar> encode_features(const BlindNet& model, const Image& img);

struct PoseErrors {
    double median_position = 0;  // meters
    double median_angle = 0;     // radians
    std::vector<double> position, angle;  // per sample
};

// Median of an even count is the lower-middle element.
PoseErrors evaluate_pose(const PoseHead& head,
                         const std::vector<std::vector<Scalar>>& features,
                         const std::vector<PoseLabel>& labels);

}  // namespace blindnet
