#include <catch2/catch_amalgamated.hpp>

#include "aqa/gradcheck.hpp"
#include "aqa/layers.hpp"

using namespace aqa;

namespace {

// Naive seven-nested-loop cross-correlation reference, written against
// the output-shape contract only.
Tensor conv3d_reference(const Tensor& in, const Conv3dLayer& l) {
    const std::size_t C = in.shape[0], T = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::size_t O = l.kernel.shape[0], kt = l.kernel.shape[2],
                      kh = l.kernel.shape[3], kw = l.kernel.shape[4];
    const std::size_t oT = (T + 2 * l.pad[0] - kt) / l.stride[0] + 1;
    const std::size_t oH = (H + 2 * l.pad[1] - kh) / l.stride[1] + 1;
    const std::size_t oW = (W + 2 * l.pad[2] - kw) / l.stride[2] + 1;
    Tensor out({O, oT, oH, oW});
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t ot = 0; ot < oT; ++ot)
            for (std::size_t oh = 0; oh < oH; ++oh)
                for (std::size_t ow = 0; ow < oW; ++ow) {
                    double acc = l.bias[o];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t dt = 0; dt < kt; ++dt)
                            for (std::size_t dh = 0; dh < kh; ++dh)
                                for (std::size_t dw = 0; dw < kw; ++dw) {
                                    const long t = long(ot * l.stride[0] + dt) - long(l.pad[0]);
                                    const long h = long(oh * l.stride[1] + dh) - long(l.pad[1]);
                                    const long w = long(ow * l.stride[2] + dw) - long(l.pad[2]);
                                    double v = 0.0;
                                    if (t >= 0 && t < long(T) && h >= 0 && h < long(H) &&
                                        w >= 0 && w < long(W))
                                        v = in.at4(c, std::size_t(t), std::size_t(h),
                                                   std::size_t(w));
                                    acc += v *
                                           l.kernel.data[(((o * C + c) * kt + dt) * kh + dh) *
                                                             kw + dw];
                                }
                    out.at4(o, ot, oh, ow) = acc;
                }
    return out;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

}  // namespace

TEST_CASE("conv3d single-tap product") {
    Conv3dLayer l;
    l.kernel = Tensor({1, 1, 1, 1, 1}, {3.0});
    l.bias = Tensor({1}, {0.0});
    Tensor in({1, 1, 1, 1}, {2.0});
    Tensor out = conv3d_forward(in, l);
    CHECK(out.size() == 1);
    CHECK(out[0] == 6.0);
}

TEST_CASE("conv3d window sums of ones") {
    Conv3dLayer l;
    l.kernel = Tensor({1, 1, 2, 2, 2}, 1.0);
    l.bias = Tensor({1}, {0.0});
    Tensor in({1, 4, 4, 4}, 1.0);
    Tensor out = conv3d_forward(in, l);
    REQUIRE(out.shape == std::vector<std::size_t>{1, 3, 3, 3});
    for (double v : out.data) CHECK(v == 8.0);
}

TEST_CASE("conv3d matches naive reference on seeded random cases") {
    Rng rng(1001);
    Conv3dLayer l;
    l.kernel = random_tensor({4, 2, 3, 3, 3}, rng);
    l.bias = random_tensor({4}, rng);
    l.stride = {1, 2, 2};
    Tensor in = random_tensor({2, 8, 12, 12}, rng);
    Tensor got = conv3d_forward(in, l);
    Tensor want = conv3d_reference(in, l);
    REQUIRE(got.shape == want.shape);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK_THAT(got[i], Catch::Matchers::WithinAbs(want[i], 1e-10));
}

TEST_CASE("conv3d matches naive reference with padding") {
    Rng rng(2002);
    Conv3dLayer l;
    l.kernel = random_tensor({3, 1, 2, 3, 3}, rng);
    l.bias = random_tensor({3}, rng);
    l.pad = {1, 1, 1};
    Tensor in = random_tensor({1, 5, 7, 6}, rng);
    Tensor got = conv3d_forward(in, l);
    Tensor want = conv3d_reference(in, l);
    REQUIRE(got.shape == want.shape);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK_THAT(got[i], Catch::Matchers::WithinAbs(want[i], 1e-10));
}

TEST_CASE("conv3d output shape formula over randomized shapes") {
    Rng rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t C = 1 + rng.index(3), O = 1 + rng.index(3);
        const std::size_t T = 1 + rng.index(8), H = 1 + rng.index(8),
                          W = 1 + rng.index(8);
        Triple pad{rng.index(2), rng.index(2), rng.index(2)};
        Triple stride{1 + rng.index(2), 1 + rng.index(2), 1 + rng.index(2)};
        const std::size_t kt = 1 + rng.index(T + 2 * pad[0]);
        const std::size_t kh = 1 + rng.index(H + 2 * pad[1]);
        const std::size_t kw = 1 + rng.index(W + 2 * pad[2]);
        Conv3dLayer l;
        l.kernel = random_tensor({O, C, kt, kh, kw}, rng);
        l.bias = random_tensor({O}, rng);
        l.stride = stride;
        l.pad = pad;
        Tensor in = random_tensor({C, T, H, W}, rng);
        Tensor out = conv3d_forward(in, l);
        CHECK(out.shape[0] == O);
        CHECK(out.shape[1] == (T + 2 * pad[0] - kt) / stride[0] + 1);
        CHECK(out.shape[2] == (H + 2 * pad[1] - kh) / stride[1] + 1);
        CHECK(out.shape[3] == (W + 2 * pad[2] - kw) / stride[2] + 1);
        CHECK(out.all_finite());
    }
}

TEST_CASE("conv3d rejects shape mismatches") {
    Conv3dLayer l;
    l.kernel = Tensor({1, 2, 1, 1, 1}, 1.0);
    l.bias = Tensor({1});
    Tensor in({1, 2, 2, 2}, 1.0);
    CHECK_THROWS_AS(conv3d_forward(in, l), std::invalid_argument);

    l.kernel = Tensor({1, 1, 5, 1, 1}, 1.0);
    CHECK_THROWS_AS(conv3d_forward(in, l), std::invalid_argument);

    l.kernel = Tensor({1, 1, 1, 1, 1}, 1.0);
    Tensor up({2, 2, 2, 2});
    CHECK_THROWS_AS(conv3d_backward(in, l, up), std::invalid_argument);
}

TEST_CASE("conv3d backward trivial cases") {
    Conv3dLayer l;
    l.kernel = Tensor({1, 1, 1, 1, 1}, {3.0});
    l.bias = Tensor({1}, {0.0});
    Tensor in({1, 1, 1, 1}, {2.0});

    SECTION("zero upstream gives zero gradients") {
        Tensor up({1, 1, 1, 1}, {0.0});
        Conv3dGrads g = conv3d_backward(in, l, up);
        CHECK(g.input[0] == 0.0);
        CHECK(g.kernel[0] == 0.0);
        CHECK(g.bias[0] == 0.0);
    }
    SECTION("scalar chain rule") {
        Tensor up({1, 1, 1, 1}, {5.0});
        Conv3dGrads g = conv3d_backward(in, l, up);
        CHECK(g.kernel[0] == 2.0 * 5.0);
        CHECK(g.input[0] == 3.0 * 5.0);
        CHECK(g.bias[0] == 5.0);
    }
}

TEST_CASE("conv3d gradients match central finite differences") {
    Rng rng(555);
    for (int seed_trial = 0; seed_trial < 3; ++seed_trial) {
        Conv3dLayer l;
        l.kernel = random_tensor({2, 2, 2, 2, 2}, rng);
        l.bias = random_tensor({2}, rng);
        l.stride = {1, 1, 2};
        Tensor in = random_tensor({2, 3, 4, 4}, rng);
        Tensor target = random_tensor({2, 2, 3, 2}, rng);

        auto loss = [&] {
            return euclidean_loss(conv3d_forward(in, l), target).first;
        };
        auto [lv, up] = euclidean_loss(conv3d_forward(in, l), target);
        (void)lv;
        Conv3dGrads g = conv3d_backward(in, l, up);
        GradCheckReport r = grad_check(
            "conv3d", {&in, &l.kernel, &l.bias}, loss, {g.input, g.kernel, g.bias});
        CHECK(r.max_rel_error < 1e-6);
    }
}

TEST_CASE("maxpool3d constant input and first-index tie rule") {
    Pool3dLayer l;
    Tensor in({1, 2, 2, 2}, 3.5);
    Pool3dResult r = maxpool3d_forward(in, l);
    REQUIRE(r.output.size() == 1);
    CHECK(r.output[0] == 3.5);
    CHECK(r.argmax[0] == 0);  // first row-major element wins ties

    Tensor up({1, 1, 1, 1}, {2.0});
    Tensor g = maxpool3d_backward(r, up, in.shape);
    CHECK(g[0] == 2.0);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("maxpool3d gradients match finite differences away from kinks") {
    Rng rng(777);
    int done = 0;
    while (done < 3) {
        Pool3dLayer l;
        Tensor in = random_tensor({2, 4, 4, 4}, rng);
        // resample if any two window entries are within 1e-4 (tie kink)
        Pool3dResult fwd = maxpool3d_forward(in, l);
        bool near_kink = false;
        for (std::size_t i = 0; i < fwd.output.size() && !near_kink; ++i)
            for (std::size_t j = 0; j < in.size(); ++j)
                if (j != fwd.argmax[i] &&
                    std::fabs(in.data[j] - fwd.output.data[i]) < 1e-4) {
                    near_kink = true;
                    break;
                }
        if (near_kink) continue;
        ++done;

        Tensor target = random_tensor(fwd.output.shape, rng);
        auto loss = [&] {
            return euclidean_loss(maxpool3d_forward(in, l).output, target).first;
        };
        auto [lv, up] = euclidean_loss(fwd.output, target);
        (void)lv;
        Tensor g = maxpool3d_backward(fwd, up, in.shape);
        GradCheckReport r = grad_check("maxpool3d", {&in}, loss, {g});
        CHECK(r.max_rel_error < 1e-6);
    }
}

TEST_CASE("fc matches matrix-product oracle") {
    Rng rng(99);
    FcLayer l;
    l.weight = random_tensor({5, 7}, rng);
    l.bias = random_tensor({5}, rng);
    Tensor x = random_tensor({7}, rng);
    Tensor y = fc_forward(x, l);
    for (std::size_t o = 0; o < 5; ++o) {
        double want = l.bias[o];
        for (std::size_t i = 0; i < 7; ++i) want += l.weight.data[o * 7 + i] * x[i];
        CHECK_THAT(y[o], Catch::Matchers::WithinAbs(want, 1e-10));
    }
    CHECK_THROWS_AS(fc_forward(random_tensor({6}, rng), l), std::invalid_argument);
}

TEST_CASE("fc gradients are exact for a linear map") {
    Rng rng(1234);
    FcLayer l;
    l.weight = random_tensor({3, 4}, rng);
    l.bias = random_tensor({3}, rng);
    Tensor x = random_tensor({4}, rng);
    Tensor target = random_tensor({3}, rng);
    auto loss = [&] { return euclidean_loss(fc_forward(x, l), target).first; };
    auto [lv, up] = euclidean_loss(fc_forward(x, l), target);
    (void)lv;
    FcGrads g = fc_backward(x, l, up);
    GradCheckReport r =
        grad_check("fc", {&x, &l.weight, &l.bias}, loss, {g.input, g.weight, g.bias});
    CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("relu forward/backward") {
    Tensor x({3}, {-1.0, 0.0, 2.0});
    Tensor y = relu_forward(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
    Tensor up({3}, {1.0, 1.0, 1.0});
    Tensor g = relu_backward(x, up);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);
}

TEST_CASE("euclidean loss contract") {
    Tensor a({1}, {3.0}), b({1}, {1.0});
    auto [loss, grad] = euclidean_loss(a, b);
    CHECK(loss == 2.0);
    CHECK(grad[0] == 2.0);

    auto [zero_loss, zero_grad] = euclidean_loss(b, b);
    CHECK(zero_loss == 0.0);
    CHECK(zero_grad[0] == 0.0);

    CHECK_THROWS_AS(euclidean_loss(a, Tensor({2})), std::invalid_argument);

    // direct-sum oracle on seeded random vectors
    Rng rng(4242);
    Tensor p({20}), t({20});
    for (std::size_t i = 0; i < 20; ++i) {
        p[i] = rng.uniform(-5.0, 5.0);
        t[i] = rng.uniform(-5.0, 5.0);
    }
    auto [lv, gv] = euclidean_loss(p, t);
    double want = 0.0;
    for (std::size_t i = 0; i < 20; ++i) want += 0.5 * (p[i] - t[i]) * (p[i] - t[i]);
    CHECK_THAT(lv, Catch::Matchers::WithinAbs(want, 1e-12));
    (void)gv;
}

TEST_CASE("sgd step") {
    Tensor p({1}, {1.0});
    Tensor g({1}, {10.0});
    sgd_step(p, g, 0.0001, "layer0");
    CHECK_THAT(p[0], Catch::Matchers::WithinAbs(0.999, 1e-12));

    Tensor p2 = p;
    sgd_step(p2, g, 0.0, "layer0");
    CHECK(p2[0] == p[0]);

    Tensor bad({1}, {std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_WITH(sgd_step(p, bad, 0.1, "conv1"),
                      Catch::Matchers::ContainsSubstring("conv1"));
}

TEST_CASE("single sgd step decreases loss on a one-sample batch") {
    Rng rng(606);
    FcLayer l;
    l.weight = random_tensor({2, 3}, rng);
    l.bias = random_tensor({2}, rng);
    Tensor x = random_tensor({3}, rng);
    Tensor target = random_tensor({2}, rng);

    double lr = 0.1;
    const auto loss_at = [&](const FcLayer& layer) {
        return euclidean_loss(fc_forward(x, layer), target).first;
    };
    const double before = loss_at(l);
    for (int halvings = 0; halvings < 20; ++halvings) {
        FcLayer trial = l;
        auto [lv, up] = euclidean_loss(fc_forward(x, trial), target);
        (void)lv;
        FcGrads g = fc_backward(x, trial, up);
        sgd_step(trial.weight, g.weight, lr, "fc");
        sgd_step(trial.bias, g.bias, lr, "fc");
        if (loss_at(trial) < before) {
            SUCCEED();
            return;
        }
        lr *= 0.5;
    }
    FAIL("no learning rate in the halving schedule decreased the loss");
}

TEST_CASE("forward passes on finite inputs stay finite") {
    Rng rng(808);
    Conv3dLayer l;
    l.kernel = random_tensor({3, 2, 3, 3, 3}, rng, 10.0);
    l.bias = random_tensor({3}, rng, 10.0);
    l.pad = {1, 1, 1};
    Tensor in = random_tensor({2, 6, 8, 8}, rng, 100.0);
    CHECK(conv3d_forward(in, l).all_finite());
    CHECK(relu_forward(in).all_finite());
    CHECK(maxpool3d_forward(in, Pool3dLayer{}).output.all_finite());
}
