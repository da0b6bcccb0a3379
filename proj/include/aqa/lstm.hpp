#pragma once

// Single LSTM cell and sequence forward/backward (full-sequence BPTT).
// Gate order in the stacked matrices is i, f, g, o. Forget-gate bias is
// initialized to 1.

#include <vector>

#include "aqa/layers.hpp"
#include "aqa/tensor.hpp"

namespace aqa {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmParams {
    Tensor wx;  // [4H, D]
    Tensor wh;  // [4H, H]
    Tensor b;   // [4H]
    std::size_t hidden = 0;
    std::size_t input_dim = 0;

    static LstmParams init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
        LstmParams p;
        p.hidden = hidden;
        p.input_dim = input_dim;
        p.wx = Tensor({4 * hidden, input_dim});
        p.wh = Tensor({4 * hidden, hidden});
        p.b = Tensor({4 * hidden});
        init_uniform_glorot(p.wx, input_dim, hidden, rng);
        init_uniform_glorot(p.wh, hidden, hidden, rng);
        for (std::size_t j = 0; j < hidden; ++j) p.b[hidden + j] = 1.0;  // forget gate
        return p;
    }
};

struct LstmStepCache {
    Tensor x;               // input [D]
    Tensor h_prev, c_prev;  // [H]
    Tensor i, f, g, o;      // post-activation gates [H]
    Tensor c, h;            // new states [H]
};

struct LstmSequence {
    std::vector<LstmStepCache> steps;
    std::vector<Tensor> hidden;  // h_1..h_N
};

inline LstmStepCache lstm_cell_forward(const LstmParams& p, const Tensor& x,
                                       const Tensor& h_prev, const Tensor& c_prev) {
    const std::size_t H = p.hidden, D = p.input_dim;
    if (x.size() != D)
        throw std::invalid_argument("lstm: input dim " + std::to_string(x.size()) +
                                    " != expected " + std::to_string(D));
    LstmStepCache s{x, h_prev, c_prev,
                    Tensor({H}), Tensor({H}), Tensor({H}), Tensor({H}),
                    Tensor({H}), Tensor({H})};
    for (std::size_t gate = 0; gate < 4; ++gate)
        for (std::size_t j = 0; j < H; ++j) {
            const std::size_t row = gate * H + j;
            double acc = p.b[row];
            const double* wxr = &p.wx.data[row * D];
            for (std::size_t k = 0; k < D; ++k) acc += wxr[k] * x[k];
            const double* whr = &p.wh.data[row * H];
            for (std::size_t k = 0; k < H; ++k) acc += whr[k] * h_prev[k];
            switch (gate) {
                case 0: s.i[j] = sigmoid(acc); break;
                case 1: s.f[j] = sigmoid(acc); break;
                case 2: s.g[j] = std::tanh(acc); break;
                case 3: s.o[j] = sigmoid(acc); break;
            }
        }
    for (std::size_t j = 0; j < H; ++j) {
        s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.g[j];
        s.h[j] = s.o[j] * std::tanh(s.c[j]);
    }
    return s;
}

inline LstmSequence lstm_forward(const LstmParams& p, const std::vector<Tensor>& inputs) {
    LstmSequence seq;
    Tensor h({p.hidden}), c({p.hidden});
    for (const Tensor& x : inputs) {
        LstmStepCache s = lstm_cell_forward(p, x, h, c);
        h = s.h;
        c = s.c;
        seq.hidden.push_back(h);
        seq.steps.push_back(std::move(s));
    }
    return seq;
}

struct LstmGrads {
    Tensor wx, wh, b;
    std::vector<Tensor> inputs;  // dL/dx_t

    static LstmGrads zeros(const LstmParams& p) {
        return {Tensor(p.wx.shape), Tensor(p.wh.shape), Tensor(p.b.shape), {}};
    }
};

// dh_out[t] = dL/dh_t contributed directly by per-step losses (may be
// zero tensors for steps without a loss).
inline LstmGrads lstm_backward(const LstmParams& p, const LstmSequence& seq,
                               const std::vector<Tensor>& dh_out) {
    const std::size_t H = p.hidden, D = p.input_dim, N = seq.steps.size();
    if (dh_out.size() != N)
        throw std::invalid_argument("lstm_backward: per-step gradient count mismatch");
    LstmGrads g = LstmGrads::zeros(p);
    g.inputs.assign(N, Tensor({D}));

    Tensor dh_next({H}), dc_next({H});
    for (std::size_t t = N; t-- > 0;) {
        const LstmStepCache& s = seq.steps[t];
        Tensor dh = dh_out[t];
        for (std::size_t j = 0; j < H; ++j) dh[j] += dh_next[j];

        Tensor d_pre({4 * H});  // grads wrt pre-activation gate sums
        Tensor dc({H});
        for (std::size_t j = 0; j < H; ++j) {
            const double tc = std::tanh(s.c[j]);
            dc[j] = dh[j] * s.o[j] * (1.0 - tc * tc) + dc_next[j];
            d_pre[0 * H + j] = dc[j] * s.g[j] * s.i[j] * (1.0 - s.i[j]);
            d_pre[1 * H + j] = dc[j] * s.c_prev[j] * s.f[j] * (1.0 - s.f[j]);
            d_pre[2 * H + j] = dc[j] * s.i[j] * (1.0 - s.g[j] * s.g[j]);
            d_pre[3 * H + j] = dh[j] * std::tanh(s.c[j]) * s.o[j] * (1.0 - s.o[j]);
        }

        Tensor dh_prev({H});
        for (std::size_t row = 0; row < 4 * H; ++row) {
            const double dp = d_pre[row];
            if (dp == 0.0) continue;
            g.b[row] += dp;
            double* gwx = &g.wx.data[row * D];
            const double* wxr = &p.wx.data[row * D];
            for (std::size_t k = 0; k < D; ++k) {
                gwx[k] += dp * s.x[k];
                g.inputs[t][k] += dp * wxr[k];
            }
            double* gwh = &g.wh.data[row * H];
            const double* whr = &p.wh.data[row * H];
            for (std::size_t k = 0; k < H; ++k) {
                gwh[k] += dp * s.h_prev[k];
                dh_prev[k] += dp * whr[k];
            }
        }

        dh_next = std::move(dh_prev);
        for (std::size_t j = 0; j < H; ++j) dc_next[j] = dc[j] * s.f[j];
    }
    return g;
}

}  // namespace aqa
