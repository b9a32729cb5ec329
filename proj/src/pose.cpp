#include "blindnet/pose.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blindnet {

PoseHead::PoseHead(int feat_dim, int hidden, uint64_t seed) : feat_dim_(feat_dim) {
    auto init = [&](const std::string& name, int out, int in, uint64_t stream) {
        Rng rng = Rng::substream(seed, stream, 0);
        double std = std::sqrt(2.0 / in);
        auto w = make_tensor({out, in}, true);
        for (auto& v : w->data) v = rng.normal() * std;
        params[name + ".w"] = w;
        params[name + ".b"] = make_tensor({out}, true);
    };
    init("fc1", hidden, feat_dim, 0x90e1);
    init("pos", 2, hidden, 0x90e2);
    init("rot", 2, hidden, 0x90e3);
    params["s_t"] = make_scalar(0.0, true);
    params["s_r"] = make_scalar(0.0, true);
}

PoseHead::Outputs PoseHead::forward(Tape& t, const TensorPtr& feat) const {
    if (feat->shape != std::vector<int>{1, feat_dim_})
        throw std::invalid_argument("PoseHead: feature shape " + shape_str(feat->shape) +
                                    " != [1," + std::to_string(feat_dim_) + "]");
    auto h = ops::relu(t, ops::linear(t, feat, params.at("fc1.w"), params.at("fc1.b")));
    Outputs o;
    o.pos = ops::linear(t, h, params.at("pos.w"), params.at("pos.b"));
    o.cos_sin = ops::linear(t, h, params.at("rot.w"), params.at("rot.b"));
    o.s_t = params.at("s_t");
    o.s_r = params.at("s_r");
    return o;
}

PoseLabel PoseHead::predict(const std::vector<Scalar>& feat) const {
    Tape t;
    auto f = make_tensor({1, feat_dim_}, feat, false);
    auto o = forward(t, f);
    PoseLabel p;
    p.x = o.pos->data[0];
    p.y = o.pos->data[1];
    p.theta = std::atan2(o.cos_sin->data[1], o.cos_sin->data[0]);
    return p;
}

TensorPtr homoscedastic_loss(Tape& t, const PoseHead::Outputs& pred,
                             const PoseLabel& gt) {
    auto gt_xy = make_tensor({1, 2}, {gt.x, gt.y});
    auto pos_res = ops::sum_abs(t, ops::sub(t, pred.pos, gt_xy));

    // split (cos, sin) with constant selector masks
    auto cos_t = ops::sum(t, ops::mul(t, pred.cos_sin, make_tensor({1, 2}, {1, 0})));
    auto sin_t = ops::sum(t, ops::mul(t, pred.cos_sin, make_tensor({1, 2}, {0, 1})));
    auto ang = ops::atan2(t, sin_t, cos_t);
    auto ang_err = ops::wrap_angle(t, ops::sub(t, ang, make_scalar(gt.theta)));
    auto ang_res = ops::sum_abs(t, ang_err);

    auto inv_st = ops::exp(t, ops::scale(t, pred.s_t, -1.0));
    auto inv_sr = ops::exp(t, ops::scale(t, pred.s_r, -1.0));
    auto term_t = ops::add(t, ops::mul(t, pos_res, inv_st), pred.s_t);
    auto term_r = ops::add(t, ops::mul(t, ang_res, inv_sr), pred.s_r);
    return ops::add(t, term_t, term_r);
}

std::vector<Scalar> encode_features(const BlindNet& model, const Image& img) {
    Tape tape;
    auto lat = model.encode_hier(tape, image_to_tensor(img));
    return lat.e_concat->data;
}

PoseErrors evaluate_pose(const PoseHead& head,
                         const std::vector<std::vector<Scalar>>& features,
                         const std::vector<PoseLabel>& labels) {
    if (features.empty() || features.size() != labels.size())
        throw std::invalid_argument("evaluate_pose: empty or mismatched trajectory");
    PoseErrors e;
    for (size_t i = 0; i < features.size(); ++i) {
        PoseLabel p = head.predict(features[i]);
        e.position.push_back(std::hypot(p.x - labels[i].x, p.y - labels[i].y));
        e.angle.push_back(std::abs(wrap_pi(p.theta - labels[i].theta)));
    }
    auto lower_median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[(v.size() - 1) / 2];
    };
    e.median_position = lower_median(e.position);
    e.median_angle = lower_median(e.angle);
    return e;
}

}  // namespace blindnet
