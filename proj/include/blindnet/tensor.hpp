#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace blindnet {

// Training also runs in 64-bit; gradient checks need the headroom and the
// desk-scale networks are small enough not to care.
using Scalar = double;

// Raised when an op produces NaN/Inf, or when a loss goes non-finite.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Tensor {
    std::vector<int> shape;
    std::vector<Scalar> data;
    std::vector<Scalar> grad;  // allocated iff requires_grad
    bool requires_grad = false;

    size_t numel() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1; }
    void zero_grad() { grad.assign(grad.size(), 0.0); }
    int dim(int i) const { return shape[i]; }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<int> shape, std::vector<Scalar> data,
                      bool requires_grad = false);
TensorPtr make_scalar(Scalar v, bool requires_grad = false);

size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Append-only tape of recorded primitives; rebuilt every training step.
// backward() walks the nodes once, in reverse recording order.
class Tape {
public:
    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }
    void backward(const TensorPtr& loss);
    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

namespace ops {

TensorPtr add(Tape& t, TensorPtr a, TensorPtr b);
TensorPtr sub(Tape& t, TensorPtr a, TensorPtr b);
TensorPtr mul(Tape& t, TensorPtr a, TensorPtr b);
TensorPtr scale(Tape& t, TensorPtr a, Scalar c);
TensorPtr relu(Tape& t, TensorPtr a);
TensorPtr sigmoid(Tape& t, TensorPtr a);
TensorPtr exp(Tape& t, TensorPtr a);
TensorPtr sum(Tape& t, TensorPtr a);
TensorPtr mean(Tape& t, TensorPtr a);
TensorPtr sum_abs(Tape& t, TensorPtr a);   // L1
TensorPtr sum_sq(Tape& t, TensorPtr a);    // squared L2
// Wraps each element into (-pi, pi]; backward is the identity.
TensorPtr wrap_angle(Tape& t, TensorPtr a);
TensorPtr atan2(Tape& t, TensorPtr y, TensorPtr x);

// Forward copy with the graph cut; never requires grad.
TensorPtr stop_gradient(TensorPtr a);

// NCHW. weight [F,C,kh,kw], bias [F].
TensorPtr conv2d(Tape& t, TensorPtr input, TensorPtr weight, TensorPtr bias,
                 int stride, int pad);
// weight [C_in,F,kh,kw]; H_out = (H-1)*stride - 2*pad + kh.
TensorPtr conv_transpose2d(Tape& t, TensorPtr input, TensorPtr weight,
                           TensorPtr bias, int stride, int pad);
// input [N,In], weight [Out,In], bias [Out].
TensorPtr linear(Tape& t, TensorPtr input, TensorPtr weight, TensorPtr bias);
TensorPtr concat_channels(Tape& t, TensorPtr a, TensorPtr b);  // NCHW, dim 1
TensorPtr upsample_nearest2x(Tape& t, TensorPtr a);

}  // namespace ops

struct AdamState {
    long step = 0;
    Scalar lr = 1e-4;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
    std::vector<Scalar> m, v;
};

void adam_step(Tensor& param, AdamState& state);

inline double step_lr(int epoch, double base_lr, int step_size, double gamma) {
    if (step_size < 1) throw std::invalid_argument("step_lr: step_size must be >= 1");
    double lr = base_lr;
    for (int i = 0; i < epoch / step_size; ++i) lr *= gamma;
    return lr;
}

}  // namespace blindnet
