#pragma once

// Differentiable layer primitives: 3D convolution, 3D max-pooling,
// fully-connected, ReLU, Euclidean loss, and plain SGD. All math is
// double precision with explicit loops; sizes here are desk scale.

#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "aqa/tensor.hpp"

namespace aqa {

using Triple = std::array<std::size_t, 3>;

// ---------------------------------------------------------------------------
// conv3d: input [C,T,H,W], kernel [O,C,kt,kh,kw], bias [O] -> [O,T',H',W']
// out extent = floor((in + 2*pad - kernel)/stride) + 1, zero padding.
// ---------------------------------------------------------------------------

struct Conv3dLayer {
    Tensor kernel;  // [O,C,kt,kh,kw]
    Tensor bias;    // [O]
    Triple stride{1, 1, 1};
    Triple pad{0, 0, 0};
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t pad,
                                   std::size_t kernel, std::size_t stride) {
    std::size_t padded = in + 2 * pad;
    if (kernel > padded)
        throw std::invalid_argument("conv3d: kernel extent " + std::to_string(kernel) +
                                    " exceeds padded input " + std::to_string(padded));
    return (padded - kernel) / stride + 1;
}

inline void check_conv3d(const Tensor& input, const Conv3dLayer& l) {
    if (input.rank() != 4)
        throw std::invalid_argument("conv3d: input must be rank 4, got " +
                                    shape_str(input.shape));
    if (l.kernel.rank() != 5)
        throw std::invalid_argument("conv3d: kernel must be rank 5, got " +
                                    shape_str(l.kernel.shape));
    if (l.kernel.shape[1] != input.shape[0])
        throw std::invalid_argument("conv3d: kernel channels " +
                                    std::to_string(l.kernel.shape[1]) +
                                    " != input channels " + std::to_string(input.shape[0]));
    if (l.bias.size() != l.kernel.shape[0])
        throw std::invalid_argument("conv3d: bias length != output channels");
    for (int a = 0; a < 3; ++a)
        if (l.stride[std::size_t(a)] == 0)
            throw std::invalid_argument("conv3d: zero stride");
}

inline Tensor conv3d_forward(const Tensor& input, const Conv3dLayer& l) {
    check_conv3d(input, l);
    const std::size_t C = input.shape[0], T = input.shape[1], H = input.shape[2],
                      W = input.shape[3];
    const std::size_t O = l.kernel.shape[0], kt = l.kernel.shape[2],
                      kh = l.kernel.shape[3], kw = l.kernel.shape[4];
    const std::size_t oT = conv_out_extent(T, l.pad[0], kt, l.stride[0]);
    const std::size_t oH = conv_out_extent(H, l.pad[1], kh, l.stride[1]);
    const std::size_t oW = conv_out_extent(W, l.pad[2], kw, l.stride[2]);

    Tensor out({O, oT, oH, oW});
    const std::size_t kvol = kt * kh * kw;
    for (std::size_t o = 0; o < O; ++o) {
        const double* ker = &l.kernel.data[o * C * kvol];
        for (std::size_t ot = 0; ot < oT; ++ot)
            for (std::size_t oh = 0; oh < oH; ++oh)
                for (std::size_t ow = 0; ow < oW; ++ow) {
                    double acc = l.bias[o];
                    const long t0 = long(ot * l.stride[0]) - long(l.pad[0]);
                    const long h0 = long(oh * l.stride[1]) - long(l.pad[1]);
                    const long w0 = long(ow * l.stride[2]) - long(l.pad[2]);
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t dt = 0; dt < kt; ++dt) {
                            const long t = t0 + long(dt);
                            if (t < 0 || t >= long(T)) continue;
                            for (std::size_t dh = 0; dh < kh; ++dh) {
                                const long h = h0 + long(dh);
                                if (h < 0 || h >= long(H)) continue;
                                const double* in_row =
                                    &input.data[((c * T + std::size_t(t)) * H +
                                                 std::size_t(h)) * W];
                                const double* k_row =
                                    &ker[((c * kt + dt) * kh + dh) * kw];
                                for (std::size_t dw = 0; dw < kw; ++dw) {
                                    const long w = w0 + long(dw);
                                    if (w < 0 || w >= long(W)) continue;
                                    acc += in_row[std::size_t(w)] * k_row[dw];
                                }
                            }
                        }
                    out.at4(o, ot, oh, ow) = acc;
                }
    }
    return out;
}

struct Conv3dGrads {
    Tensor input;
    Tensor kernel;
    Tensor bias;
};

inline Conv3dGrads conv3d_backward(const Tensor& input, const Conv3dLayer& l,
                                   const Tensor& upstream) {
    check_conv3d(input, l);
    const std::size_t C = input.shape[0], T = input.shape[1], H = input.shape[2],
                      W = input.shape[3];
    const std::size_t O = l.kernel.shape[0], kt = l.kernel.shape[2],
                      kh = l.kernel.shape[3], kw = l.kernel.shape[4];
    const std::size_t oT = conv_out_extent(T, l.pad[0], kt, l.stride[0]);
    const std::size_t oH = conv_out_extent(H, l.pad[1], kh, l.stride[1]);
    const std::size_t oW = conv_out_extent(W, l.pad[2], kw, l.stride[2]);
    if (upstream.shape != std::vector<std::size_t>{O, oT, oH, oW})
        throw std::invalid_argument("conv3d_backward: upstream shape " +
                                    shape_str(upstream.shape) + " != forward output " +
                                    shape_str({O, oT, oH, oW}));

    Conv3dGrads g{Tensor(input.shape), Tensor(l.kernel.shape), Tensor(l.bias.shape)};
    const std::size_t kvol = kt * kh * kw;
    for (std::size_t o = 0; o < O; ++o) {
        const double* ker = &l.kernel.data[o * C * kvol];
        double* gker = &g.kernel.data[o * C * kvol];
        for (std::size_t ot = 0; ot < oT; ++ot)
            for (std::size_t oh = 0; oh < oH; ++oh)
                for (std::size_t ow = 0; ow < oW; ++ow) {
                    const double up = upstream.at4(o, ot, oh, ow);
                    if (up == 0.0) continue;
                    g.bias[o] += up;
                    const long t0 = long(ot * l.stride[0]) - long(l.pad[0]);
                    const long h0 = long(oh * l.stride[1]) - long(l.pad[1]);
                    const long w0 = long(ow * l.stride[2]) - long(l.pad[2]);
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t dt = 0; dt < kt; ++dt) {
                            const long t = t0 + long(dt);
                            if (t < 0 || t >= long(T)) continue;
                            for (std::size_t dh = 0; dh < kh; ++dh) {
                                const long h = h0 + long(dh);
                                if (h < 0 || h >= long(H)) continue;
                                const std::size_t in_base =
                                    ((c * T + std::size_t(t)) * H + std::size_t(h)) * W;
                                const std::size_t k_base =
                                    ((c * kt + dt) * kh + dh) * kw;
                                for (std::size_t dw = 0; dw < kw; ++dw) {
                                    const long w = w0 + long(dw);
                                    if (w < 0 || w >= long(W)) continue;
                                    g.kernel.data[o * C * kvol + k_base + dw] +=
                                        up * input.data[in_base + std::size_t(w)];
                                    g.input.data[in_base + std::size_t(w)] +=
                                        up * ker[k_base + dw];
                                }
                            }
                        }
                }
        (void)gker;
    }
    return g;
}

// ---------------------------------------------------------------------------
// maxpool3d: ties go to the first (row-major) maximal element.
// ---------------------------------------------------------------------------

struct Pool3dLayer {
    Triple window{2, 2, 2};
    Triple stride{2, 2, 2};
};

struct Pool3dResult {
    Tensor output;                    // [C,T',H',W']
    std::vector<std::size_t> argmax;  // flat input index per output element
};

inline Pool3dResult maxpool3d_forward(const Tensor& input, const Pool3dLayer& l) {
    if (input.rank() != 4)
        throw std::invalid_argument("maxpool3d: input must be rank 4");
    const std::size_t C = input.shape[0], T = input.shape[1], H = input.shape[2],
                      W = input.shape[3];
    const std::size_t oT = conv_out_extent(T, 0, l.window[0], l.stride[0]);
    const std::size_t oH = conv_out_extent(H, 0, l.window[1], l.stride[1]);
    const std::size_t oW = conv_out_extent(W, 0, l.window[2], l.stride[2]);

    Pool3dResult r{Tensor({C, oT, oH, oW}), {}};
    r.argmax.resize(r.output.size());
    std::size_t out_i = 0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ot = 0; ot < oT; ++ot)
            for (std::size_t oh = 0; oh < oH; ++oh)
                for (std::size_t ow = 0; ow < oW; ++ow, ++out_i) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t dt = 0; dt < l.window[0]; ++dt)
                        for (std::size_t dh = 0; dh < l.window[1]; ++dh)
                            for (std::size_t dw = 0; dw < l.window[2]; ++dw) {
                                const std::size_t t = ot * l.stride[0] + dt;
                                const std::size_t h = oh * l.stride[1] + dh;
                                const std::size_t w = ow * l.stride[2] + dw;
                                const std::size_t idx = ((c * T + t) * H + h) * W + w;
                                if (input.data[idx] > best) {
                                    best = input.data[idx];
                                    best_idx = idx;
                                }
                            }
                    r.output.data[out_i] = best;
                    r.argmax[out_i] = best_idx;
                }
    return r;
}

inline Tensor maxpool3d_backward(const Pool3dResult& fwd, const Tensor& upstream,
                                 const std::vector<std::size_t>& input_shape) {
    if (!upstream.same_shape(fwd.output))
        throw std::invalid_argument("maxpool3d_backward: upstream shape mismatch");
    Tensor grad(input_shape);
    for (std::size_t i = 0; i < fwd.argmax.size(); ++i)
        grad.data[fwd.argmax[i]] += upstream.data[i];
    return grad;
}

// ---------------------------------------------------------------------------
// Fully connected: y = W x + b, W [out,in].
// ---------------------------------------------------------------------------

struct FcLayer {
    Tensor weight;  // [out,in]
    Tensor bias;    // [out]
};

inline Tensor fc_forward(const Tensor& x, const FcLayer& l) {
    const std::size_t in = l.weight.shape[1], out = l.weight.shape[0];
    if (x.size() != in)
        throw std::invalid_argument("fc: input length " + std::to_string(x.size()) +
                                    " != weight columns " + std::to_string(in));
    if (l.bias.size() != out)
        throw std::invalid_argument("fc: bias length != weight rows");
    Tensor y({out});
    for (std::size_t o = 0; o < out; ++o) {
        double acc = l.bias[o];
        const double* row = &l.weight.data[o * in];
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x.data[i];
        y[o] = acc;
    }
    return y;
}

struct FcGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

inline FcGrads fc_backward(const Tensor& x, const FcLayer& l, const Tensor& upstream) {
    const std::size_t in = l.weight.shape[1], out = l.weight.shape[0];
    if (upstream.size() != out)
        throw std::invalid_argument("fc_backward: upstream length mismatch");
    FcGrads g{Tensor({in}), Tensor(l.weight.shape), Tensor({out})};
    for (std::size_t o = 0; o < out; ++o) {
        const double up = upstream[o];
        g.bias[o] = up;
        const double* row = &l.weight.data[o * in];
        double* grow = &g.weight.data[o * in];
        for (std::size_t i = 0; i < in; ++i) {
            grow[i] = up * x.data[i];
            g.input[i] += up * row[i];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// ReLU and Euclidean loss
// ---------------------------------------------------------------------------

inline Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& upstream) {
    if (!x.same_shape(upstream))
        throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (x.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

// loss = 1/2 sum (pred - target)^2, grad = pred - target
inline std::pair<double, Tensor> euclidean_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("euclidean_loss: shape mismatch " +
                                    shape_str(pred.shape) + " vs " +
                                    shape_str(target.shape));
    Tensor grad(pred.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        grad.data[i] = d;
        loss += 0.5 * d * d;
    }
    return {loss, grad};
}

// ---------------------------------------------------------------------------
// SGD: p <- p - lr * g. Rejects non-finite gradients, naming the layer.
// ---------------------------------------------------------------------------

inline void sgd_step(Tensor& params, const Tensor& grads, double lr,
                     const std::string& layer_name = "unnamed") {
    if (!params.same_shape(grads))
        throw std::invalid_argument("sgd_step: shape mismatch in layer " + layer_name);
    if (!grads.all_finite())
        throw std::runtime_error("sgd_step: non-finite gradient in layer " + layer_name);
    for (std::size_t i = 0; i < params.size(); ++i)
        params.data[i] -= lr * grads.data[i];
}

// ---------------------------------------------------------------------------
// Glorot-style init: uniform in [-a, a], a = sqrt(6/(fan_in+fan_out)).
// ---------------------------------------------------------------------------

inline void init_uniform_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                                Rng& rng) {
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-a, a);
}

}  // namespace aqa
