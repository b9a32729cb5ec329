#include "blindnet/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace blindnet {

using MatR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor shape has non-positive extent");
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream s;
    s << "[";
    for (size_t i = 0; i < shape.size(); ++i) s << (i ? "," : "") << shape[i];
    s << "]";
    return s.str();
}

static void check_finite(const char* op, const std::vector<Scalar>& v) {
    for (Scalar x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(op) + ": non-finite value produced");
}

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    size_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->data.assign(n, 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(n, 0.0);
    return t;
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<Scalar> data,
                      bool requires_grad) {
    size_t n = shape_numel(shape);
    if (n != data.size())
        throw std::invalid_argument("make_tensor: data length " +
                                    std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    check_finite("make_tensor", data);
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(n, 0.0);
    return t;
}

TensorPtr make_scalar(Scalar v, bool requires_grad) {
    return make_tensor({1}, {v}, requires_grad);
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss->is_scalar())
        throw std::invalid_argument("backward: loss must be a scalar tensor");
    if (!loss->requires_grad)
        throw std::invalid_argument("backward: loss does not require grad");
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

namespace ops {

static TensorPtr result_like(std::vector<int> shape,
                             std::initializer_list<TensorPtr> inputs) {
    bool rg = false;
    for (const auto& in : inputs) rg = rg || in->requires_grad;
    return make_tensor(std::move(shape), rg);
}

static void require_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->shape) + " vs " + shape_str(b->shape));
}

TensorPtr add(Tape& t, TensorPtr a, TensorPtr b) {
    require_same_shape("add", a, b);
    auto out = result_like(a->shape, {a, b});
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
    check_finite("add", out->data);
    if (out->requires_grad)
        t.record([a, b, out] {
            for (size_t i = 0; i < out->numel(); ++i) {
                if (a->requires_grad) a->grad[i] += out->grad[i];
                if (b->requires_grad) b->grad[i] += out->grad[i];
            }
        });
    return out;
}

TensorPtr sub(Tape& t, TensorPtr a, TensorPtr b) {
    require_same_shape("sub", a, b);
    auto out = result_like(a->shape, {a, b});
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] - b->data[i];
    check_finite("sub", out->data);
    if (out->requires_grad)
        t.record([a, b, out] {
            for (size_t i = 0; i < out->numel(); ++i) {
                if (a->requires_grad) a->grad[i] += out->grad[i];
                if (b->requires_grad) b->grad[i] -= out->grad[i];
            }
        });
    return out;
}

TensorPtr mul(Tape& t, TensorPtr a, TensorPtr b) {
    require_same_shape("mul", a, b);
    auto out = result_like(a->shape, {a, b});
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
    check_finite("mul", out->data);
    if (out->requires_grad)
        t.record([a, b, out] {
            for (size_t i = 0; i < out->numel(); ++i) {
                if (a->requires_grad) a->grad[i] += out->grad[i] * b->data[i];
                if (b->requires_grad) b->grad[i] += out->grad[i] * a->data[i];
            }
        });
    return out;
}

TensorPtr scale(Tape& t, TensorPtr a, Scalar c) {
    auto out = result_like(a->shape, {a});
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] * c;
    check_finite("scale", out->data);
    if (out->requires_grad)
        t.record([a, out, c] {
            for (size_t i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i] * c;
        });
    return out;
}

TensorPtr relu(Tape& t, TensorPtr a) {
    auto out = result_like(a->shape, {a});
    for (size_t i = 0; i < out->numel(); ++i)
        out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < out->numel(); ++i)
                if (a->data[i] > 0.0) a->grad[i] += out->grad[i];
        });
    return out;
}

TensorPtr sigmoid(Tape& t, TensorPtr a) {
    auto out = result_like(a->shape, {a});
    for (size_t i = 0; i < out->numel(); ++i)
        out->data[i] = 1.0 / (1.0 + std::exp(-a->data[i]));
    check_finite("sigmoid", out->data);
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < out->numel(); ++i) {
                Scalar s = out->data[i];
                a->grad[i] += out->grad[i] * s * (1.0 - s);
            }
        });
    return out;
}

TensorPtr exp(Tape& t, TensorPtr a) {
    auto out = result_like(a->shape, {a});
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = std::exp(a->data[i]);
    check_finite("exp", out->data);
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < out->numel(); ++i)
                a->grad[i] += out->grad[i] * out->data[i];
        });
    return out;
}

TensorPtr sum(Tape& t, TensorPtr a) {
    auto out = result_like({1}, {a});
    Scalar s = 0.0;
    for (Scalar v : a->data) s += v;
    out->data[0] = s;
    check_finite("sum", out->data);
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[0];
        });
    return out;
}

TensorPtr mean(Tape& t, TensorPtr a) {
    auto out = result_like({1}, {a});
    Scalar s = 0.0;
    for (Scalar v : a->data) s += v;
    Scalar inv = 1.0 / static_cast<Scalar>(a->numel());
    out->data[0] = s * inv;
    check_finite("mean", out->data);
    if (out->requires_grad)
        t.record([a, out, inv] {
            for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[0] * inv;
        });
    return out;
}

TensorPtr sum_abs(Tape& t, TensorPtr a) {
    auto out = result_like({1}, {a});
    Scalar s = 0.0;
    for (Scalar v : a->data) s += std::abs(v);
    out->data[0] = s;
    check_finite("sum_abs", out->data);
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < a->numel(); ++i) {
                Scalar v = a->data[i];
                Scalar sg = (v > 0.0) - (v < 0.0);
                a->grad[i] += out->grad[0] * sg;
            }
        });
    return out;
}

TensorPtr sum_sq(Tape& t, TensorPtr a) {
    auto out = result_like({1}, {a});
    Scalar s = 0.0;
    for (Scalar v : a->data) s += v * v;
    out->data[0] = s;
    check_finite("sum_sq", out->data);
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < a->numel(); ++i)
                a->grad[i] += out->grad[0] * 2.0 * a->data[i];
        });
    return out;
}

static Scalar wrap_scalar(Scalar v) {
    Scalar w = std::remainder(v, 2.0 * M_PI);  // [-pi, pi]
    if (w <= -M_PI) w += 2.0 * M_PI;
    return w;
}

TensorPtr wrap_angle(Tape& t, TensorPtr a) {
    auto out = result_like(a->shape, {a});
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = wrap_scalar(a->data[i]);
    check_finite("wrap_angle", out->data);
    if (out->requires_grad)
        t.record([a, out] {
            for (size_t i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i];
        });
    return out;
}

TensorPtr atan2(Tape& t, TensorPtr y, TensorPtr x) {
    require_same_shape("atan2", y, x);
    auto out = result_like(y->shape, {y, x});
    for (size_t i = 0; i < out->numel(); ++i)
        out->data[i] = std::atan2(y->data[i], x->data[i]);
    check_finite("atan2", out->data);
    if (out->requires_grad)
        t.record([y, x, out] {
            for (size_t i = 0; i < out->numel(); ++i) {
                Scalar d = x->data[i] * x->data[i] + y->data[i] * y->data[i];
                if (d == 0.0) continue;
                if (y->requires_grad) y->grad[i] += out->grad[i] * x->data[i] / d;
                if (x->requires_grad) x->grad[i] -= out->grad[i] * y->data[i] / d;
            }
        });
    return out;
}

TensorPtr stop_gradient(TensorPtr a) {
    auto out = std::make_shared<Tensor>();
    out->shape = a->shape;
    out->data = a->data;
    out->requires_grad = false;
    return out;
}

// ---- conv2d ----------------------------------------------------------------

struct ConvDims {
    int n, c, h, w, f, kh, kw, ho, wo;
};

static ConvDims conv_dims(const TensorPtr& input, const TensorPtr& weight,
                          const TensorPtr& bias, int stride, int pad) {
    if (input->shape.size() != 4 || weight->shape.size() != 4)
        throw std::invalid_argument("conv2d: input and weight must be 4-d");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
    ConvDims d{input->shape[0], input->shape[1], input->shape[2], input->shape[3],
               weight->shape[0], weight->shape[2], weight->shape[3], 0, 0};
    if (weight->shape[1] != d.c)
        throw std::invalid_argument("conv2d: weight channel axis " +
                                    std::to_string(weight->shape[1]) +
                                    " != input channel axis " + std::to_string(d.c));
    if (bias->shape != std::vector<int>{d.f})
        throw std::invalid_argument("conv2d: bias axis must equal filter count " +
                                    std::to_string(d.f));
    if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
        throw std::invalid_argument("conv2d: kernel exceeds padded spatial axes");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

static void im2col(const Scalar* x, const ConvDims& d, int stride, int pad,
                   MatR& cols) {
    // cols: [C*kh*kw, ho*wo]
    for (int c = 0; c < d.c; ++c)
        for (int u = 0; u < d.kh; ++u)
            for (int v = 0; v < d.kw; ++v) {
                int row = (c * d.kh + u) * d.kw + v;
                for (int oy = 0; oy < d.ho; ++oy) {
                    int iy = oy * stride + u - pad;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        int ix = ox * stride + v - pad;
                        Scalar val = 0.0;
                        if (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                            val = x[(static_cast<size_t>(c) * d.h + iy) * d.w + ix];
                        cols(row, oy * d.wo + ox) = val;
                    }
                }
            }
}

static void col2im_add(const MatR& cols, const ConvDims& d, int stride, int pad,
                       Scalar* dx) {
    for (int c = 0; c < d.c; ++c)
        for (int u = 0; u < d.kh; ++u)
            for (int v = 0; v < d.kw; ++v) {
                int row = (c * d.kh + u) * d.kw + v;
                for (int oy = 0; oy < d.ho; ++oy) {
                    int iy = oy * stride + u - pad;
                    if (iy < 0 || iy >= d.h) continue;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        int ix = ox * stride + v - pad;
                        if (ix < 0 || ix >= d.w) continue;
                        dx[(static_cast<size_t>(c) * d.h + iy) * d.w + ix] +=
                            cols(row, oy * d.wo + ox);
                    }
                }
            }
}

TensorPtr conv2d(Tape& t, TensorPtr input, TensorPtr weight, TensorPtr bias,
                 int stride, int pad) {
    ConvDims d = conv_dims(input, weight, bias, stride, pad);
    auto out = result_like({d.n, d.f, d.ho, d.wo}, {input, weight, bias});

    const int ckk = d.c * d.kh * d.kw;
    const int p = d.ho * d.wo;
    CMapR wmat(weight->data.data(), d.f, ckk);
    MatR cols(ckk, p);
    const size_t in_stride = static_cast<size_t>(d.c) * d.h * d.w;
    const size_t out_stride = static_cast<size_t>(d.f) * p;
    for (int n = 0; n < d.n; ++n) {
        im2col(input->data.data() + n * in_stride, d, stride, pad, cols);
        MapR omat(out->data.data() + n * out_stride, d.f, p);
        omat.noalias() = wmat * cols;
        for (int f = 0; f < d.f; ++f) omat.row(f).array() += bias->data[f];
    }
    check_finite("conv2d", out->data);

    if (out->requires_grad)
        t.record([input, weight, bias, out, d, stride, pad, ckk, p, in_stride,
                  out_stride] {
            CMapR wmat(weight->data.data(), d.f, ckk);
            MatR cols(ckk, p);
            MatR dcols(ckk, p);
            for (int n = 0; n < d.n; ++n) {
                CMapR gmat(out->grad.data() + n * out_stride, d.f, p);
                if (weight->requires_grad) {
                    im2col(input->data.data() + n * in_stride, d, stride, pad, cols);
                    MapR dwmat(weight->grad.data(), d.f, ckk);
                    dwmat.noalias() += gmat * cols.transpose();
                }
                if (bias->requires_grad)
                    for (int f = 0; f < d.f; ++f) bias->grad[f] += gmat.row(f).sum();
                if (input->requires_grad) {
                    dcols.noalias() = wmat.transpose() * gmat;
                    col2im_add(dcols, d, stride, pad,
                               input->grad.data() + n * in_stride);
                }
            }
        });
    return out;
}

// ---- conv_transpose2d ------------------------------------------------------

TensorPtr conv_transpose2d(Tape& t, TensorPtr input, TensorPtr weight,
                           TensorPtr bias, int stride, int pad) {
    if (input->shape.size() != 4 || weight->shape.size() != 4)
        throw std::invalid_argument("conv_transpose2d: input and weight must be 4-d");
    if (stride < 1) throw std::invalid_argument("conv_transpose2d: stride must be >= 1");
    const int n = input->shape[0], cin = input->shape[1];
    const int h = input->shape[2], w = input->shape[3];
    if (weight->shape[0] != cin)
        throw std::invalid_argument("conv_transpose2d: weight in-channel axis " +
                                    std::to_string(weight->shape[0]) +
                                    " != input channel axis " + std::to_string(cin));
    const int f = weight->shape[1], kh = weight->shape[2], kw = weight->shape[3];
    if (bias->shape != std::vector<int>{f})
        throw std::invalid_argument("conv_transpose2d: bias axis must equal " +
                                    std::to_string(f));
    const int ho = (h - 1) * stride - 2 * pad + kh;
    const int wo = (w - 1) * stride - 2 * pad + kw;
    if (ho <= 0 || wo <= 0)
        throw std::invalid_argument("conv_transpose2d: empty output spatial axes");

    auto out = result_like({n, f, ho, wo}, {input, weight, bias});
    const int fkk = f * kh * kw;
    const int p = h * w;
    CMapR wmat(weight->data.data(), cin, fkk);
    MatR cols(fkk, p);
    const size_t in_stride = static_cast<size_t>(cin) * p;
    const size_t out_stride = static_cast<size_t>(f) * ho * wo;

    auto scatter = [&](const MatR& src, Scalar* dst) {
        for (int ff = 0; ff < f; ++ff)
            for (int u = 0; u < kh; ++u)
                for (int v = 0; v < kw; ++v) {
                    int row = (ff * kh + u) * kw + v;
                    for (int i = 0; i < h; ++i) {
                        int oy = i * stride + u - pad;
                        if (oy < 0 || oy >= ho) continue;
                        for (int j = 0; j < w; ++j) {
                            int ox = j * stride + v - pad;
                            if (ox < 0 || ox >= wo) continue;
                            dst[(static_cast<size_t>(ff) * ho + oy) * wo + ox] +=
                                src(row, i * w + j);
                        }
                    }
                }
    };
    auto gather = [=](const Scalar* src, MatR& dst) {
        for (int ff = 0; ff < f; ++ff)
            for (int u = 0; u < kh; ++u)
                for (int v = 0; v < kw; ++v) {
                    int row = (ff * kh + u) * kw + v;
                    for (int i = 0; i < h; ++i) {
                        int oy = i * stride + u - pad;
                        for (int j = 0; j < w; ++j) {
                            int ox = j * stride + v - pad;
                            Scalar val = 0.0;
                            if (oy >= 0 && oy < ho && ox >= 0 && ox < wo)
                                val = src[(static_cast<size_t>(ff) * ho + oy) * wo + ox];
                            dst(row, i * w + j) = val;
                        }
                    }
                }
    };

    for (int s = 0; s < n; ++s) {
        CMapR xmat(input->data.data() + s * in_stride, cin, p);
        cols.noalias() = wmat.transpose() * xmat;
        Scalar* o = out->data.data() + s * out_stride;
        scatter(cols, o);
        for (int ff = 0; ff < f; ++ff)
            for (int q = 0; q < ho * wo; ++q)
                o[static_cast<size_t>(ff) * ho * wo + q] += bias->data[ff];
    }
    check_finite("conv_transpose2d", out->data);

    if (out->requires_grad)
        t.record([input, weight, bias, out, n, cin, h, w, f, kh, kw, ho, wo, fkk, p,
                  in_stride, out_stride, stride, pad, gather] {
            CMapR wmat(weight->data.data(), cin, fkk);
            MatR dcols(fkk, p);
            for (int s = 0; s < n; ++s) {
                gather(out->grad.data() + s * out_stride, dcols);
                if (input->requires_grad) {
                    MapR dxmat(input->grad.data() + s * in_stride, cin, p);
                    dxmat.noalias() += wmat * dcols;
                }
                if (weight->requires_grad) {
                    CMapR xmat(input->data.data() + s * in_stride, cin, p);
                    MapR dwmat(weight->grad.data(), cin, fkk);
                    dwmat.noalias() += xmat * dcols.transpose();
                }
                if (bias->requires_grad) {
                    const Scalar* g = out->grad.data() + s * out_stride;
                    for (int ff = 0; ff < f; ++ff)
                        for (int q = 0; q < ho * wo; ++q)
                            bias->grad[ff] += g[static_cast<size_t>(ff) * ho * wo + q];
                }
            }
        });
    return out;
}

TensorPtr linear(Tape& t, TensorPtr input, TensorPtr weight, TensorPtr bias) {
    if (input->shape.size() != 2 || weight->shape.size() != 2)
        throw std::invalid_argument("linear: input and weight must be 2-d");
    const int n = input->shape[0], in = input->shape[1];
    const int out_dim = weight->shape[0];
    if (weight->shape[1] != in)
        throw std::invalid_argument("linear: weight inner axis " +
                                    std::to_string(weight->shape[1]) +
                                    " != input feature axis " + std::to_string(in));
    if (bias->shape != std::vector<int>{out_dim})
        throw std::invalid_argument("linear: bias axis must equal " +
                                    std::to_string(out_dim));

    auto out = result_like({n, out_dim}, {input, weight, bias});
    CMapR x(input->data.data(), n, in);
    CMapR wmat(weight->data.data(), out_dim, in);
    MapR o(out->data.data(), n, out_dim);
    o.noalias() = x * wmat.transpose();
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < out_dim; ++c) o(r, c) += bias->data[c];
    check_finite("linear", out->data);

    if (out->requires_grad)
        t.record([input, weight, bias, out, n, in, out_dim] {
            CMapR g(out->grad.data(), n, out_dim);
            if (input->requires_grad) {
                CMapR wmat(weight->data.data(), out_dim, in);
                MapR dx(input->grad.data(), n, in);
                dx.noalias() += g * wmat;
            }
            if (weight->requires_grad) {
                CMapR x(input->data.data(), n, in);
                MapR dw(weight->grad.data(), out_dim, in);
                dw.noalias() += g.transpose() * x;
            }
            if (bias->requires_grad)
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < out_dim; ++c) bias->grad[c] += g(r, c);
        });
    return out;
}

TensorPtr concat_channels(Tape& t, TensorPtr a, TensorPtr b) {
    if (a->shape.size() != 4 || b->shape.size() != 4)
        throw std::invalid_argument("concat_channels: inputs must be 4-d");
    if (a->shape[0] != b->shape[0] || a->shape[2] != b->shape[2] ||
        a->shape[3] != b->shape[3])
        throw std::invalid_argument("concat_channels: non-channel axes differ: " +
                                    shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int n = a->shape[0], ca = a->shape[1], cb = b->shape[1];
    const int h = a->shape[2], w = a->shape[3];
    const size_t plane = static_cast<size_t>(h) * w;
    auto out = result_like({n, ca + cb, h, w}, {a, b});
    for (int s = 0; s < n; ++s) {
        std::copy(a->data.begin() + s * ca * plane, a->data.begin() + (s + 1) * ca * plane,
                  out->data.begin() + s * (ca + cb) * plane);
        std::copy(b->data.begin() + s * cb * plane, b->data.begin() + (s + 1) * cb * plane,
                  out->data.begin() + s * (ca + cb) * plane + ca * plane);
    }
    if (out->requires_grad)
        t.record([a, b, out, n, ca, cb, plane] {
            for (int s = 0; s < n; ++s) {
                const Scalar* g = out->grad.data() + s * (ca + cb) * plane;
                if (a->requires_grad) {
                    Scalar* ga = a->grad.data() + s * ca * plane;
                    for (size_t i = 0; i < ca * plane; ++i) ga[i] += g[i];
                }
                if (b->requires_grad) {
                    Scalar* gb = b->grad.data() + s * cb * plane;
                    for (size_t i = 0; i < cb * plane; ++i) gb[i] += g[ca * plane + i];
                }
            }
        });
    return out;
}

TensorPtr upsample_nearest2x(Tape& t, TensorPtr a) {
    if (a->shape.size() != 4)
        throw std::invalid_argument("upsample_nearest2x: input must be 4-d");
    const int n = a->shape[0], c = a->shape[1], h = a->shape[2], w = a->shape[3];
    auto out = result_like({n, c, 2 * h, 2 * w}, {a});
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < 2 * h; ++y)
                for (int x = 0; x < 2 * w; ++x)
                    out->data[((static_cast<size_t>(s) * c + ch) * 2 * h + y) * 2 * w + x] =
                        a->data[((static_cast<size_t>(s) * c + ch) * h + y / 2) * w + x / 2];
    if (out->requires_grad)
        t.record([a, out, n, c, h, w] {
            for (int s = 0; s < n; ++s)
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < 2 * h; ++y)
                        for (int x = 0; x < 2 * w; ++x)
                            a->grad[((static_cast<size_t>(s) * c + ch) * h + y / 2) * w + x / 2] +=
                                out->grad[((static_cast<size_t>(s) * c + ch) * 2 * h + y) * 2 * w + x];
        });
    return out;
}

}  // namespace ops

void adam_step(Tensor& param, AdamState& state) {
    if (!param.requires_grad || param.grad.size() != param.data.size())
        throw std::invalid_argument("adam_step: parameter has no gradient");
    if (state.m.empty()) {
        state.m.assign(param.data.size(), 0.0);
        state.v.assign(param.data.size(), 0.0);
    }
    if (state.m.size() != param.data.size())
        throw std::invalid_argument("adam_step: moment arrays do not match parameter");
    state.step += 1;
    const Scalar bc1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.step));
    const Scalar bc2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.step));
    for (size_t i = 0; i < param.data.size(); ++i) {
        Scalar g = param.grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        Scalar mhat = state.m[i] / bc1;
        Scalar vhat = state.v[i] / bc2;
        param.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace blindnet
