#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "aqa/featnet.hpp"
#include "aqa/gradcheck.hpp"

using namespace aqa;

namespace {

ClipSequence random_clips(std::size_t n, std::array<std::size_t, 4> shape,
                          std::uint64_t seed) {
    ClipSequence seq;
    seq.source_id = "clips";
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor c({shape[0], shape[1], shape[2], shape[3]});
        for (double& v : c.data) v = rng.uniform(-1.0, 1.0);
        seq.clips.push_back(std::move(c));
    }
    return seq;
}

}  // namespace

TEST_CASE("default config propagates to feature_dim 64") {
    FeatNet net = build_featnet(FeatNetConfig::default_config(), 5);
    CHECK(net.feature_dim == 64);
}

TEST_CASE("same seed gives bit-identical parameters") {
    FeatNet a = build_featnet(FeatNetConfig::default_config(), 9);
    FeatNet b = build_featnet(FeatNetConfig::default_config(), 9);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        CHECK(a.layers[i].conv.kernel.data == b.layers[i].conv.kernel.data);
        CHECK(a.layers[i].fc.weight.data == b.layers[i].fc.weight.data);
    }
    CHECK(a.config_hash == b.config_hash);
    FeatNet c = build_featnet(FeatNetConfig::default_config(), 10);
    CHECK(a.config_hash != c.config_hash);
}

TEST_CASE("inconsistent config rejected naming the failing layer") {
    FeatNetConfig cfg = FeatNetConfig::default_config();
    cfg.input_shape = {1, 2, 4, 4};  // too small for two pools
    CHECK_THROWS_WITH(build_featnet(cfg, 1),
                      Catch::Matchers::ContainsSubstring("layer"));
}

TEST_CASE("single fc-only config is a linear map of flattened clips") {
    FeatNetConfig cfg;
    cfg.input_shape = {1, 2, 2, 2};
    cfg.layers = {{FeatLayerCfg::Kind::fc, 3, {}, {}, {}, {}}};
    FeatNet net = build_featnet(cfg, 2);
    CHECK(net.feature_dim == 3);

    ClipSequence clips = random_clips(2, cfg.input_shape, 3);
    ClipFeatures f = extract_features(net, clips);
    // superposition: f(a+b) = f(a) + f(b) - f(0)
    Tensor sum({1, 2, 2, 2});
    for (std::size_t i = 0; i < sum.size(); ++i)
        sum.data[i] = clips.clips[0].data[i] + clips.clips[1].data[i];
    Tensor fs = net.forward(sum);
    Tensor f0 = net.forward(Tensor({1, 2, 2, 2}));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK_THAT(fs[j], Catch::Matchers::WithinAbs(
                              f.features[0][j] + f.features[1][j] - f0[j], 1e-10));
}

TEST_CASE("all-zero clip with zero biases gives zero features") {
    FeatNet net = build_featnet(FeatNetConfig::default_config(), 4);
    ClipSequence clips;
    clips.clips.push_back(Tensor({1, 16, 24, 24}));
    ClipFeatures f = extract_features(net, clips);
    for (double v : f.features[0].data) CHECK(v == 0.0);
}

TEST_CASE("feature extraction is per-clip independent and order-preserving") {
    FeatNet net = build_featnet(FeatNetConfig::default_config(), 6);
    ClipSequence clips = random_clips(3, {1, 16, 24, 24}, 8);
    ClipFeatures f = extract_features(net, clips);

    ClipSequence permuted;
    permuted.clips = {clips.clips[2], clips.clips[0], clips.clips[1]};
    ClipFeatures g = extract_features(net, permuted);
    CHECK(g.features[0].data == f.features[2].data);
    CHECK(g.features[1].data == f.features[0].data);
    CHECK(g.features[2].data == f.features[1].data);

    ClipSequence dropped;
    dropped.clips = {clips.clips[0], clips.clips[2]};
    ClipFeatures h = extract_features(net, dropped);
    CHECK(h.features[0].data == f.features[0].data);
    CHECK(h.features[1].data == f.features[2].data);
}

TEST_CASE("extract_features matches layer-by-layer oracle composition") {
    FeatNet net = build_featnet(FeatNetConfig::default_config(), 12);
    ClipSequence clips = random_clips(1, {1, 16, 24, 24}, 13);
    ClipFeatures f = extract_features(net, clips);

    // recompose by applying the primitives directly
    Tensor x = clips.clips[0];
    for (const FeatLayer& l : net.layers) {
        switch (l.kind) {
            case FeatLayerCfg::Kind::conv3d: x = conv3d_forward(x, l.conv); break;
            case FeatLayerCfg::Kind::relu: x = relu_forward(x); break;
            case FeatLayerCfg::Kind::maxpool3d:
                x = maxpool3d_forward(x, l.pool).output;
                break;
            case FeatLayerCfg::Kind::fc:
                {
                    const std::size_t n = x.size();
                    x = fc_forward(Tensor({n}, std::move(x.data)), l.fc);
                }
                break;
        }
    }
    REQUIRE(x.size() == f.features[0].size());
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK_THAT(f.features[0][i], Catch::Matchers::WithinAbs(x[i], 1e-10));
}

TEST_CASE("aggregate_average normalizes and is clip-order invariant") {
    ClipFeatures f;
    f.feature_dim = 2;
    f.features = {Tensor({2}, {1.0, 0.0}), Tensor({2}, {0.0, 1.0})};
    Tensor avg = aggregate_average(f);
    CHECK_THAT(avg[0], Catch::Matchers::WithinAbs(0.7071, 1e-4));
    CHECK_THAT(avg[1], Catch::Matchers::WithinAbs(0.7071, 1e-4));

    std::swap(f.features[0], f.features[1]);
    Tensor avg2 = aggregate_average(f);
    CHECK(avg.data == avg2.data);

    // N identical clips behave like one
    ClipFeatures one;
    one.feature_dim = 2;
    one.features = {Tensor({2}, {3.0, 4.0})};
    ClipFeatures many = one;
    many.features.push_back(Tensor({2}, {3.0, 4.0}));
    many.features.push_back(Tensor({2}, {3.0, 4.0}));
    CHECK(aggregate_average(one).data == aggregate_average(many).data);
    CHECK_THAT(aggregate_average(one)[0], Catch::Matchers::WithinAbs(0.6, 1e-12));

    CHECK_THROWS_AS(aggregate_average(ClipFeatures{}), std::invalid_argument);
}

TEST_CASE("aggregate_average output has unit L2 norm or is exactly zero") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        ClipFeatures f;
        f.feature_dim = 5;
        const std::size_t n = 1 + rng.index(6);
        for (std::size_t i = 0; i < n; ++i) {
            Tensor t({5});
            for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
            f.features.push_back(std::move(t));
        }
        Tensor avg = aggregate_average(f);
        double norm = 0.0;
        for (double v : avg.data) norm += v * v;
        CHECK_THAT(std::sqrt(norm), Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
    ClipFeatures zero;
    zero.feature_dim = 3;
    zero.features = {Tensor({3})};
    Tensor avg = aggregate_average(zero);
    for (double v : avg.data) CHECK(v == 0.0);
}

TEST_CASE("l1 normalization switch") {
    ClipFeatures f;
    f.feature_dim = 2;
    f.features = {Tensor({2}, {2.0, 2.0})};
    Tensor avg = aggregate_average(f, FeatNorm::l1);
    CHECK_THAT(avg[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(avg[1], Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("feature_sparsity counts exact zeros") {
    ClipFeatures f;
    f.feature_dim = 4;
    f.features = {Tensor({4}, {0.0, 0.0, 0.0, 0.0})};
    CHECK(feature_sparsity(f) == 1.0);
    f.features = {Tensor({4}, {1.0, 2.0, 3.0, 4.0})};
    CHECK(feature_sparsity(f) == 0.0);
    f.features = {Tensor({4}, {0.0, 2.0, 0.0, 4.0}), Tensor({4}, {1.0, 0.0, 3.0, 4.0})};
    CHECK(feature_sparsity(f) == 3.0 / 8.0);
}

TEST_CASE("featnet end-to-end gradients pass the finite-difference check") {
    // small net to keep the check fast
    FeatNetConfig cfg;
    cfg.input_shape = {1, 4, 6, 6};
    using K = FeatLayerCfg::Kind;
    cfg.layers = {
        {K::conv3d, 2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {}},
        {K::relu, 0, {}, {}, {}, {}},
        {K::maxpool3d, 0, {}, {2, 2, 2}, {}, {2, 2, 2}},
        {K::fc, 4, {}, {}, {}, {}},
    };
    FeatNet net = build_featnet(cfg, 21);
    ClipSequence clips = random_clips(1, cfg.input_shape, 22);
    Rng rng(23);
    Tensor target({4});
    for (double& v : target.data) v = rng.uniform(-1.0, 1.0);

    auto loss = [&] {
        Tensor out = net.forward(clips.clips[0]);
        const std::size_t n = out.size();
        return euclidean_loss(Tensor({n}, std::move(out.data)), target).first;
    };
    FeatNet::Cache cache;
    Tensor out = net.forward(clips.clips[0], &cache);
    const std::size_t odim = out.size();
    auto [lv, up] = euclidean_loss(Tensor({odim}, std::move(out.data)), target);
    (void)lv;
    FeatNet::Grads g = net.backward(cache, Tensor(cache.output.shape, std::move(up.data)));

    std::vector<Tensor*> params;
    std::vector<Tensor> analytic;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind == FeatLayerCfg::Kind::conv3d) {
            params.push_back(&net.layers[i].conv.kernel);
            analytic.push_back(g.conv[i].kernel);
            params.push_back(&net.layers[i].conv.bias);
            analytic.push_back(g.conv[i].bias);
        } else if (net.layers[i].kind == FeatLayerCfg::Kind::fc) {
            params.push_back(&net.layers[i].fc.weight);
            analytic.push_back(g.fc[i].weight);
            params.push_back(&net.layers[i].fc.bias);
            analytic.push_back(g.fc[i].bias);
        }
    }
    GradCheckReport r = grad_check("featnet", params, loss, analytic);
    CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("featnet save/load round trip") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "aqa_featnet_rt").string();
    FeatNet net = build_featnet(FeatNetConfig::default_config(), 33);
    save_featnet(net, dir);
    FeatNet loaded = load_featnet(dir);
    CHECK(loaded.feature_dim == net.feature_dim);
    REQUIRE(loaded.layers.size() == net.layers.size());

    ClipSequence clips = random_clips(1, {1, 16, 24, 24}, 34);
    Tensor a = net.forward(clips.clips[0]);
    Tensor b = loaded.forward(clips.clips[0]);
    // float32 storage: compare at float precision
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK_THAT(b[i], Catch::Matchers::WithinAbs(a[i], 1e-4));
    fs::remove_all(dir);
}
