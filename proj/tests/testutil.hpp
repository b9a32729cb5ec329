#pragma once

#include "blindnet/rng.hpp"
#include "blindnet/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace blindnet::testutil {

// Builds a fresh graph around the given parameters and returns the scalar loss.
using LossFn = std::function<TensorPtr(Tape&, const std::vector<TensorPtr>&)>;

// Central finite differences, h = 1e-5, against one reverse-mode pass.
// Returns the worst relative error over all parameter elements.
inline double gradcheck(const LossFn& f, std::vector<TensorPtr> params,
                        double h = 1e-5) {
    Tape tape;
    for (auto& p : params) p->zero_grad();
    auto loss = f(tape, params);
    tape.backward(loss);

    double worst = 0.0;
    for (auto& p : params) {
        for (size_t i = 0; i < p->numel(); ++i) {
            double orig = p->data[i];
            Tape t1, t2;
            p->data[i] = orig + h;
            double up = f(t1, params)->data[0];
            p->data[i] = orig - h;
            double dn = f(t2, params)->data[0];
            p->data[i] = orig;
            double numeric = (up - dn) / (2.0 * h);
            double analytic = p->grad[i];
            double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
    }
    return worst;
}

inline TensorPtr random_tensor(std::vector<int> shape, Rng& rng,
                               bool requires_grad = true, double scale = 1.0) {
    auto t = make_tensor(std::move(shape), requires_grad);
    for (auto& v : t->data) v = rng.normal() * scale;
    return t;
}

}  // namespace blindnet::testutil
