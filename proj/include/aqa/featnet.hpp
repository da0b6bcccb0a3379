#pragma once

// Configurable toy 3D-conv feature network producing per-clip feature
// vectors, plus the normalized temporal clip average used by the
// SVR-on-averaged-features pipeline.

#include <cstdio>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqa/layers.hpp"
#include "aqa/tensor.hpp"
#include "aqa/videoclips.hpp"

namespace aqa {

enum class FeatNorm { l2, l1 };

struct FeatLayerCfg {
    enum class Kind { conv3d, relu, maxpool3d, fc } kind = Kind::relu;
    std::size_t out_channels = 0;  // conv3d / fc output size
    Triple kernel{3, 3, 3};
    Triple stride{1, 1, 1};
    Triple pad{0, 0, 0};
    Triple window{2, 2, 2};
};

struct FeatNetConfig {
    std::array<std::size_t, 4> input_shape{1, 16, 24, 24};  // C,T,H,W per clip
    std::vector<FeatLayerCfg> layers;
    FeatNorm norm = FeatNorm::l2;

    // conv(8,3x3x3,pad1) relu pool2 conv(16,3x3x3,pad1) relu pool2 fc(64) relu
    static FeatNetConfig default_config() {
        FeatNetConfig cfg;
        using K = FeatLayerCfg::Kind;
        cfg.layers = {
            {K::conv3d, 8, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {}},
            {K::relu, 0, {}, {}, {}, {}},
            {K::maxpool3d, 0, {}, {2, 2, 2}, {}, {2, 2, 2}},
            {K::conv3d, 16, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {}},
            {K::relu, 0, {}, {}, {}, {}},
            {K::maxpool3d, 0, {}, {2, 2, 2}, {}, {2, 2, 2}},
            {K::fc, 64, {}, {}, {}, {}},
            {K::relu, 0, {}, {}, {}, {}},
        };
        return cfg;
    }
};

struct FeatLayer {
    FeatLayerCfg::Kind kind;
    Conv3dLayer conv;
    Pool3dLayer pool;
    FcLayer fc;
};

struct ClipFeatures {
    std::vector<Tensor> features;  // one flat vector per clip, in clip order
    std::size_t feature_dim = 0;
    std::string source_id;
};

class FeatNet {
public:
    std::vector<FeatLayer> layers;
    FeatNetConfig config;
    std::size_t feature_dim = 0;
    std::uint64_t seed = 0;
    std::string config_hash;

    // Per-clip forward cache for backprop during warm-up training.
    struct Cache {
        std::vector<Tensor> inputs;           // input to each layer
        std::vector<Pool3dResult> pools;      // parallel, used for pool layers
        Tensor output;
    };

    Tensor forward(const Tensor& clip, Cache* cache = nullptr) const {
        Tensor x = clip;
        if (cache) {
            cache->inputs.clear();
            cache->pools.assign(layers.size(), {});
        }
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const FeatLayer& l = layers[i];
            if (cache) cache->inputs.push_back(x);
            switch (l.kind) {
                case FeatLayerCfg::Kind::conv3d:
                    x = conv3d_forward(x, l.conv);
                    break;
                case FeatLayerCfg::Kind::relu:
                    x = relu_forward(x);
                    break;
                case FeatLayerCfg::Kind::maxpool3d: {
                    Pool3dResult r = maxpool3d_forward(x, l.pool);
                    if (cache) cache->pools[i] = r;
                    x = std::move(r.output);
                    break;
                }
                case FeatLayerCfg::Kind::fc: {
                    const std::size_t n = x.size();
                    Tensor flat({n}, std::move(x.data));
                    x = fc_forward(flat, l.fc);
                    break;
                }
            }
        }
        if (cache) cache->output = x;
        return x;
    }

    struct Grads {
        std::vector<Conv3dGrads> conv;  // parallel to layers (unused slots empty)
        std::vector<FcGrads> fc;
    };

    // Backward through all layers; returns per-layer parameter grads.
    // `upstream` is dL/d(output). Grad wrt the clip itself is discarded.
    Grads backward(const Cache& cache, const Tensor& upstream) const {
        Grads g;
        g.conv.resize(layers.size());
        g.fc.resize(layers.size());
        Tensor up = upstream;
        for (std::size_t ri = layers.size(); ri-- > 0;) {
            const FeatLayer& l = layers[ri];
            const Tensor& in = cache.inputs[ri];
            switch (l.kind) {
                case FeatLayerCfg::Kind::conv3d: {
                    Conv3dGrads cg = conv3d_backward(in, l.conv, up);
                    up = std::move(cg.input);
                    cg.input = Tensor();
                    g.conv[ri] = std::move(cg);
                    break;
                }
                case FeatLayerCfg::Kind::relu:
                    up = relu_backward(in, up);
                    break;
                case FeatLayerCfg::Kind::maxpool3d:
                    up = maxpool3d_backward(cache.pools[ri], up, in.shape);
                    break;
                case FeatLayerCfg::Kind::fc: {
                    Tensor flat({in.size()}, std::vector<double>(in.data));
                    FcGrads fg = fc_backward(flat, l.fc, up);
                    up = Tensor(in.shape, std::move(fg.input.data));
                    fg.input = Tensor();
                    g.fc[ri] = std::move(fg);
                    break;
                }
            }
        }
        return g;
    }

    void apply_sgd(const Grads& g, double lr) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            FeatLayer& l = layers[i];
            if (l.kind == FeatLayerCfg::Kind::conv3d) {
                sgd_step(l.conv.kernel, g.conv[i].kernel, lr, "conv" + std::to_string(i));
                sgd_step(l.conv.bias, g.conv[i].bias, lr, "conv" + std::to_string(i));
            } else if (l.kind == FeatLayerCfg::Kind::fc) {
                sgd_step(l.fc.weight, g.fc[i].weight, lr, "fc" + std::to_string(i));
                sgd_step(l.fc.bias, g.fc[i].bias, lr, "fc" + std::to_string(i));
            }
        }
    }
};

namespace detail {

inline std::string hash_config(const FeatNetConfig& cfg, std::uint64_t seed) {
    std::string repr = std::to_string(seed);
    for (auto e : cfg.input_shape) repr += "," + std::to_string(e);
    for (const auto& l : cfg.layers) {
        repr += "|" + std::to_string(int(l.kind)) + ":" + std::to_string(l.out_channels);
        for (auto v : l.kernel) repr += "," + std::to_string(v);
        for (auto v : l.stride) repr += "," + std::to_string(v);
        for (auto v : l.pad) repr += "," + std::to_string(v);
        for (auto v : l.window) repr += "," + std::to_string(v);
    }
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : repr) {
        h ^= std::uint64_t(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace detail

// Shape-checks the configured chain end to end; throws naming the first
// failing layer. Initialization is Glorot uniform, biases zero.
inline FeatNet build_featnet(const FeatNetConfig& cfg, std::uint64_t seed) {
    FeatNet net;
    net.config = cfg;
    net.seed = seed;
    net.config_hash = detail::hash_config(cfg, seed);
    Rng rng(seed);

    std::vector<std::size_t> shape{cfg.input_shape[0], cfg.input_shape[1],
                                   cfg.input_shape[2], cfg.input_shape[3]};
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const FeatLayerCfg& lc = cfg.layers[i];
        FeatLayer layer;
        layer.kind = lc.kind;
        try {
            switch (lc.kind) {
                case FeatLayerCfg::Kind::conv3d: {
                    if (lc.out_channels == 0)
                        throw std::invalid_argument("conv3d needs out_channels > 0");
                    const std::size_t C = shape[0];
                    layer.conv.kernel = Tensor(
                        {lc.out_channels, C, lc.kernel[0], lc.kernel[1], lc.kernel[2]});
                    layer.conv.bias = Tensor({lc.out_channels});
                    layer.conv.stride = lc.stride;
                    layer.conv.pad = lc.pad;
                    const std::size_t kvol = lc.kernel[0] * lc.kernel[1] * lc.kernel[2];
                    init_uniform_glorot(layer.conv.kernel, C * kvol,
                                        lc.out_channels * kvol, rng);
                    shape = {lc.out_channels,
                             conv_out_extent(shape[1], lc.pad[0], lc.kernel[0], lc.stride[0]),
                             conv_out_extent(shape[2], lc.pad[1], lc.kernel[1], lc.stride[1]),
                             conv_out_extent(shape[3], lc.pad[2], lc.kernel[2], lc.stride[2])};
                    break;
                }
                case FeatLayerCfg::Kind::relu:
                    break;
                case FeatLayerCfg::Kind::maxpool3d:
                    layer.pool.window = lc.window;
                    layer.pool.stride = lc.stride;
                    shape = {shape[0],
                             conv_out_extent(shape[1], 0, lc.window[0], lc.stride[0]),
                             conv_out_extent(shape[2], 0, lc.window[1], lc.stride[1]),
                             conv_out_extent(shape[3], 0, lc.window[2], lc.stride[2])};
                    break;
                case FeatLayerCfg::Kind::fc: {
                    if (lc.out_channels == 0)
                        throw std::invalid_argument("fc needs out_channels > 0");
                    const std::size_t in = Tensor::numel(shape);
                    layer.fc.weight = Tensor({lc.out_channels, in});
                    layer.fc.bias = Tensor({lc.out_channels});
                    init_uniform_glorot(layer.fc.weight, in, lc.out_channels, rng);
                    shape = {lc.out_channels};
                    break;
                }
            }
        } catch (const std::exception& e) {
            throw std::invalid_argument("build_featnet: layer " + std::to_string(i) +
                                        ": " + e.what());
        }
        net.layers.push_back(std::move(layer));
    }
    net.feature_dim = Tensor::numel(shape);
    return net;
}

inline ClipFeatures extract_features(const FeatNet& net, const ClipSequence& clips) {
    ClipFeatures out;
    out.feature_dim = net.feature_dim;
    out.source_id = clips.source_id;
    for (const Tensor& clip : clips.clips) {
        Tensor f = net.forward(clip);
        const std::size_t n = f.size();
        out.features.push_back(Tensor({n}, std::move(f.data)));
    }
    return out;
}

// Elementwise mean over clips, then normalized (L2 by default). The
// all-zero mean maps to the zero vector.
inline Tensor aggregate_average(const ClipFeatures& feats, FeatNorm norm = FeatNorm::l2) {
    if (feats.features.empty())
        throw std::invalid_argument("aggregate_average: empty feature list");
    Tensor mean({feats.feature_dim});
    for (const Tensor& f : feats.features)
        for (std::size_t i = 0; i < f.size(); ++i) mean[i] += f[i];
    for (double& v : mean.data) v /= double(feats.features.size());
    double denom = 0.0;
    if (norm == FeatNorm::l2) {
        for (double v : mean.data) denom += v * v;
        denom = std::sqrt(denom);
    } else {
        for (double v : mean.data) denom += std::fabs(v);
    }
    if (denom > 0.0)
        for (double& v : mean.data) v /= denom;
    return mean;
}

// Fraction of exactly-zero entries across all clip vectors.
inline double feature_sparsity(const ClipFeatures& feats) {
    std::size_t zeros = 0, total = 0;
    for (const Tensor& f : feats.features) {
        total += f.size();
        for (double v : f.data)
            if (v == 0.0) ++zeros;
    }
    return total == 0 ? 0.0 : double(zeros) / double(total);
}

// ---------------------------------------------------------------------------
// Persistence: directory of AQTN tensors + manifest.json.
// ---------------------------------------------------------------------------

inline void save_featnet(const FeatNet& net, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = net.seed;
    manifest["config_hash"] = net.config_hash;
    manifest["feature_dim"] = net.feature_dim;
    manifest["norm"] = net.config.norm == FeatNorm::l2 ? "l2" : "l1";
    manifest["input_shape"] = net.config.input_shape;
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const FeatLayerCfg& lc = net.config.layers[i];
        nlohmann::json jl;
        switch (lc.kind) {
            case FeatLayerCfg::Kind::conv3d: {
                jl["kind"] = "conv3d";
                jl["out_channels"] = lc.out_channels;
                jl["kernel"] = lc.kernel;
                jl["stride"] = lc.stride;
                jl["pad"] = lc.pad;
                const std::string base = "layer" + std::to_string(i);
                save_aqtn(net.layers[i].conv.kernel, dir + "/" + base + "_kernel.aqtn");
                save_aqtn(net.layers[i].conv.bias, dir + "/" + base + "_bias.aqtn");
                break;
            }
            case FeatLayerCfg::Kind::relu:
                jl["kind"] = "relu";
                break;
            case FeatLayerCfg::Kind::maxpool3d:
                jl["kind"] = "maxpool3d";
                jl["window"] = lc.window;
                jl["stride"] = lc.stride;
                break;
            case FeatLayerCfg::Kind::fc: {
                jl["kind"] = "fc";
                jl["out_channels"] = lc.out_channels;
                const std::string base = "layer" + std::to_string(i);
                save_aqtn(net.layers[i].fc.weight, dir + "/" + base + "_weight.aqtn");
                save_aqtn(net.layers[i].fc.bias, dir + "/" + base + "_bias.aqtn");
                break;
            }
        }
        layers.push_back(jl);
    }
    manifest["layers"] = layers;
    std::ofstream os(dir + "/manifest.json");
    os << manifest.dump(2) << "\n";
}

inline FeatNet load_featnet(const std::string& dir) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw std::runtime_error("load_featnet: cannot open " + dir + "/manifest.json");
    nlohmann::json manifest = nlohmann::json::parse(is);

    FeatNetConfig cfg;
    auto in_shape = manifest.at("input_shape");
    for (std::size_t i = 0; i < 4; ++i) cfg.input_shape[i] = in_shape.at(i);
    cfg.norm = manifest.value("norm", "l2") == "l1" ? FeatNorm::l1 : FeatNorm::l2;
    for (const auto& jl : manifest.at("layers")) {
        FeatLayerCfg lc;
        const std::string kind = jl.at("kind");
        if (kind == "conv3d") {
            lc.kind = FeatLayerCfg::Kind::conv3d;
            lc.out_channels = jl.at("out_channels");
            for (std::size_t a = 0; a < 3; ++a) {
                lc.kernel[a] = jl.at("kernel").at(a);
                lc.stride[a] = jl.at("stride").at(a);
                lc.pad[a] = jl.at("pad").at(a);
            }
        } else if (kind == "relu") {
            lc.kind = FeatLayerCfg::Kind::relu;
        } else if (kind == "maxpool3d") {
            lc.kind = FeatLayerCfg::Kind::maxpool3d;
            for (std::size_t a = 0; a < 3; ++a) {
                lc.window[a] = jl.at("window").at(a);
                lc.stride[a] = jl.at("stride").at(a);
            }
        } else if (kind == "fc") {
            lc.kind = FeatLayerCfg::Kind::fc;
            lc.out_channels = jl.at("out_channels");
        } else {
            throw std::runtime_error("load_featnet: unknown layer kind " + kind);
        }
        cfg.layers.push_back(lc);
    }

    FeatNet net = build_featnet(cfg, manifest.at("seed"));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const std::string base = dir + "/layer" + std::to_string(i);
        if (net.layers[i].kind == FeatLayerCfg::Kind::conv3d) {
            net.layers[i].conv.kernel = load_aqtn(base + "_kernel.aqtn");
            net.layers[i].conv.bias = load_aqtn(base + "_bias.aqtn");
        } else if (net.layers[i].kind == FeatLayerCfg::Kind::fc) {
            net.layers[i].fc.weight = load_aqtn(base + "_weight.aqtn");
            net.layers[i].fc.bias = load_aqtn(base + "_bias.aqtn");
        }
    }
    return net;
}

}  // namespace aqa
