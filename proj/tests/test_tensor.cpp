#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "segqa/grad_check.hpp"
#include "segqa/losses.hpp"
#include "segqa/optim.hpp"
#include "segqa/rng.hpp"
#include "segqa/tensor.hpp"
#include "segqa/tensor_nn.hpp"

using namespace segqa;
using namespace segqa::ad;

using DTensor = Tensor<double>;

namespace {

DTensor rand_dtensor(Shape shape, uint64_t seed, double scale = 1.0, double keep_away = 0.0) {
    Rng rng(seed);
    DTensor t = DTensor::zeros(shape);
    for (auto& v : t.data()) {
        v = rng.normal() * scale;
        if (keep_away > 0 && std::fabs(v) < keep_away) v = v < 0 ? -keep_away : keep_away;
    }
    return t;
}

}  // namespace

TEST_CASE("matmul against identity and known product") {
    auto a = DTensor::from({2, 2}, {1, 2, 3, 4});
    auto eye = DTensor::from({2, 2}, {1, 0, 0, 1});
    auto c = matmul(a, eye);
    REQUIRE(c.data() == std::vector<double>{1, 2, 3, 4});

    auto b = DTensor::from({2, 3}, {1, 0, 2, 0, 1, 3});
    auto d = matmul(a, b);
    REQUIRE(d.data() == std::vector<double>{1, 2, 8, 3, 4, 18});
}

TEST_CASE("shape errors report both shapes") {
    auto a = DTensor::zeros({2, 3});
    auto b = DTensor::zeros({2, 3});
    try {
        matmul(a, b);
        FAIL("expected ShapeMismatchError");
    } catch (const ShapeMismatchError& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("(2,3)") != std::string::npos);
    }
    REQUIRE_THROWS_AS(add(DTensor::zeros({2, 3}), DTensor::zeros({4})), ShapeMismatchError);
}

TEST_CASE("softmax rows sum to one") {
    auto x = rand_dtensor({7, 5}, 3, 2.0);
    auto s = softmax(x, 1);
    for (int i = 0; i < 7; ++i) {
        double acc = 0;
        for (int j = 0; j < 5; ++j) acc += s.data()[size_t(i * 5 + j)];
        REQUIRE(acc == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("conv3d shape arithmetic for the 5x5x5 pipeline") {
    auto x = rand_dtensor({1, 1, 5, 5, 5}, 1);
    auto w1 = rand_dtensor({4, 1, 3, 3, 3}, 2);
    auto b1 = DTensor::zeros({4});
    auto y1 = conv3d(x, w1, b1);
    REQUIRE(y1.shape() == Shape{1, 4, 3, 3, 3});

    auto w2 = rand_dtensor({6, 4, 3, 3, 3}, 3);
    auto b2 = DTensor::zeros({6});
    auto y2 = conv3d(y1, w2, b2);
    REQUIRE(y2.shape() == Shape{1, 6, 1, 1, 1});
}

TEST_CASE("conv_transpose3d mirrors the encoder shapes") {
    auto x = rand_dtensor({2, 6, 1, 1, 1}, 4);
    auto w1 = rand_dtensor({6, 4, 3, 3, 3}, 5);
    auto y1 = conv_transpose3d(x, w1, DTensor::zeros({4}));
    REQUIRE(y1.shape() == Shape{2, 4, 3, 3, 3});
    auto w2 = rand_dtensor({4, 1, 3, 3, 3}, 6);
    auto y2 = conv_transpose3d(y1, w2, DTensor::zeros({1}));
    REQUIRE(y2.shape() == Shape{2, 1, 5, 5, 5});
}

TEST_CASE("conv_transpose3d is the adjoint of conv3d") {
    // <conv(x), y> == <x, convT(y)> with shared weights and no bias
    auto x = rand_dtensor({1, 2, 4, 4, 4}, 7);
    auto w = rand_dtensor({3, 2, 3, 3, 3}, 8);
    auto y = rand_dtensor({1, 3, 2, 2, 2}, 9);

    auto cx = conv3d(x, w, DTensor{});
    double lhs = 0;
    for (size_t i = 0; i < cx.data().size(); ++i) lhs += cx.data()[i] * y.data()[i];

    // the K x C x k^3 conv weight doubles as the (in=K, out=C) transposed
    // conv weight in the scatter formulation
    auto cty = conv_transpose3d(y, w, DTensor{});
    double rhs = 0;
    for (size_t i = 0; i < x.data().size(); ++i) rhs += x.data()[i] * cty.data()[i];
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-9));
}

TEST_CASE("loss values match analytic cases") {
    auto p = DTensor::from({1}, {0.5});
    auto t = DTensor::from({1}, {0.0});
    REQUIRE(smooth_l1(p, t, 1.0).item() == Catch::Approx(0.125));

    auto big = DTensor::from({1}, {2.0});
    REQUIRE(smooth_l1(big, t, 1.0).item() == Catch::Approx(1.5));  // |d| - beta/2

    auto logits = DTensor::zeros({3, 5});
    REQUIRE(cross_entropy(logits, {0, 3, 4}).item() == Catch::Approx(std::log(5.0)).margin(1e-9));

    auto v = rand_dtensor({4, 3}, 11);
    REQUIRE(cosine_similarity_loss(v, v).item() == Catch::Approx(0.0).margin(1e-6));

    auto a = DTensor::from({2}, {1.0, -2.0});
    auto b = DTensor::from({2}, {0.5, 0.0});
    REQUIRE(l1_loss(a, b).item() == Catch::Approx((0.5 + 2.0) / 2.0));

    REQUIRE_THROWS_AS(cross_entropy(logits, {0, 1, 9}), Error);
}

TEST_CASE("grad check: elementwise, broadcasting, matmul, transpose") {
    auto a = rand_dtensor({3, 4}, 21);
    auto b = rand_dtensor({3, 4}, 22, 1.0, 0.3);
    auto row = rand_dtensor({1, 4}, 23, 1.0, 0.3);
    auto col = rand_dtensor({3, 1}, 24, 1.0, 0.3);

    std::vector<DTensor> in1 = {a, b};
    REQUIRE(grad_check([](auto& xs) { return sum(mul(xs[0], xs[1])); }, in1) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return sum(add(xs[0], xs[1])); }, in1) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return sum(div(xs[0], xs[1])); }, in1) < 1e-5);

    std::vector<DTensor> in2 = {a, row};
    REQUIRE(grad_check([](auto& xs) { return sum(mul(xs[0], xs[1])); }, in2) < 1e-6);
    std::vector<DTensor> in3 = {a, col};
    REQUIRE(grad_check([](auto& xs) { return sum(div(xs[0], xs[1])); }, in3) < 1e-5);

    auto m1 = rand_dtensor({3, 4}, 25);
    auto m2 = rand_dtensor({4, 2}, 26);
    std::vector<DTensor> in4 = {m1, m2};
    REQUIRE(grad_check([](auto& xs) { return sum(tanh_op(matmul(xs[0], xs[1]))); }, in4) < 1e-6);
    std::vector<DTensor> in5 = {m1};
    REQUIRE(grad_check([](auto& xs) { return sum(mul(transpose(xs[0]), 2.0)); }, in5) < 1e-6);
}

TEST_CASE("grad check: activations away from kinks") {
    auto x = rand_dtensor({4, 5}, 31, 1.0, 0.05);
    std::vector<DTensor> in = {x};
    REQUIRE(grad_check([](auto& xs) { return sum(relu(xs[0])); }, in) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return sum(leaky_relu(xs[0], 0.05)); }, in) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return sum(tanh_op(xs[0])); }, in) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return sum(exp_op(mul(xs[0], 0.5))); }, in) < 1e-6);

    auto pos = rand_dtensor({4, 4}, 32);
    for (auto& v : pos.data()) v = std::fabs(v) + 0.5;
    std::vector<DTensor> inp = {pos};
    REQUIRE(grad_check([](auto& xs) { return sum(sqrt_op(xs[0])); }, inp) < 1e-6);
}

TEST_CASE("grad check: softmax and log_softmax") {
    auto x = rand_dtensor({5, 7}, 33, 1.5);
    auto w = rand_dtensor({5, 7}, 34);
    std::vector<DTensor> in = {x, w};
    REQUIRE(grad_check([](auto& xs) { return sum(mul(softmax(xs[0], 1), xs[1])); }, in) < 1e-5);
    REQUIRE(grad_check([](auto& xs) { return sum(mul(log_softmax(xs[0], 1), xs[1])); }, in) < 1e-5);
    REQUIRE(grad_check([](auto& xs) { return sum(mul(softmax(xs[0], 0), xs[1])); }, in) < 1e-5);
}

TEST_CASE("grad check: reductions and shape ops") {
    auto x = rand_dtensor({3, 4, 2}, 35);
    auto w = rand_dtensor({3, 1, 2}, 36);
    std::vector<DTensor> in = {x, w};
    REQUIRE(grad_check([](auto& xs) { return sum(mul(sum_axis(xs[0], 1), xs[1])); }, in) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return mean(mul(xs[0], 3.0)); }, in) < 1e-6);

    auto a = rand_dtensor({2, 6}, 37);
    std::vector<DTensor> in2 = {a};
    REQUIRE(grad_check([](auto& xs) { return sum(tanh_op(reshape(xs[0], {3, 4}))); }, in2) < 1e-6);
    REQUIRE(grad_check([](auto& xs) { return sum(slice(xs[0], 1, 1, 3)); }, in2) < 1e-6);

    auto b = rand_dtensor({2, 3}, 38);
    std::vector<DTensor> in3 = {a, b};
    REQUIRE(grad_check(
                [](auto& xs) {
                    return sum(tanh_op(concat(std::vector<DTensor>{xs[0], xs[1]}, 1)));
                },
                in3) < 1e-6);
}

TEST_CASE("grad check: gather and scatter rows") {
    auto x = rand_dtensor({5, 3}, 39);
    std::vector<int64_t> idx = {4, 0, 0, 2, 3, 1};
    std::vector<DTensor> in = {x};
    REQUIRE(grad_check([&](auto& xs) { return sum(tanh_op(gather_rows(xs[0], idx))); }, in) < 1e-6);

    auto y = rand_dtensor({6, 3}, 40);
    std::vector<DTensor> in2 = {y};
    REQUIRE(grad_check(
                [&](auto& xs) { return sum(tanh_op(scatter_add_rows(xs[0], idx, 5))); }, in2) < 1e-6);
}

TEST_CASE("grad check: dropout with a fixed mask") {
    auto x = rand_dtensor({6, 6}, 41);
    std::vector<DTensor> in = {x};
    REQUIRE(grad_check(
                [](auto& xs) { return sum(tanh_op(dropout(xs[0], 0.4, true, 777))); }, in) < 1e-6);

    // eval mode is the identity
    auto y = dropout(x, 0.9, false, 1);
    REQUIRE(y.data() == x.data());
}

TEST_CASE("grad check: batch_norm train and eval") {
    auto x = rand_dtensor({8, 3}, 42);
    auto gamma = rand_dtensor({3}, 43, 1.0, 0.2);
    auto beta = rand_dtensor({3}, 44);
    std::vector<DTensor> in = {x, gamma, beta};
    REQUIRE(grad_check(
                [](auto& xs) {
                    std::vector<double> rm(3, 0.0), rv(3, 1.0);
                    return sum(tanh_op(batch_norm(xs[0], xs[1], xs[2], rm, rv, true)));
                },
                in) < 1e-5);
    REQUIRE(grad_check(
                [](auto& xs) {
                    std::vector<double> rm = {0.1, -0.2, 0.3}, rv = {1.5, 0.7, 2.0};
                    return sum(tanh_op(batch_norm(xs[0], xs[1], xs[2], rm, rv, false)));
                },
                in) < 1e-5);
}

TEST_CASE("batch_norm eval uses running stats and is deterministic") {
    auto x = rand_dtensor({4, 2}, 45);
    auto gamma = DTensor::from({2}, {1.0, 2.0});
    auto beta = DTensor::from({2}, {0.5, -0.5});
    std::vector<double> rm = {0.0, 1.0}, rv = {1.0, 4.0};
    auto rm1 = rm;
    auto rv1 = rv;
    auto y1 = batch_norm(x, gamma, beta, rm1, rv1, false);
    auto rm2 = rm;
    auto rv2 = rv;
    auto y2 = batch_norm(x, gamma, beta, rm2, rv2, false);
    REQUIRE(y1.data() == y2.data());
    REQUIRE(rm1 == rm);  // eval does not touch running stats

    double expect = 1.0 * (x.data()[1] - 1.0) / std::sqrt(4.0 + 1e-5) * 2.0 - 0.5;
    REQUIRE(y1.data()[1] == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("grad check: conv3d and conv_transpose3d") {
    auto x = rand_dtensor({1, 2, 3, 3, 3}, 46, 0.7);
    auto w = rand_dtensor({3, 2, 2, 2, 2}, 47, 0.5);
    auto b = rand_dtensor({3}, 48, 0.3);
    std::vector<DTensor> in = {x, w, b};
    REQUIRE(grad_check(
                [](auto& xs) { return sum(tanh_op(conv3d(xs[0], xs[1], xs[2]))); }, in) < 1e-5);

    auto xt = rand_dtensor({1, 3, 2, 2, 2}, 49, 0.7);
    auto wt = rand_dtensor({3, 2, 2, 2, 2}, 50, 0.5);
    auto bt = rand_dtensor({2}, 51, 0.3);
    std::vector<DTensor> in2 = {xt, wt, bt};
    REQUIRE(grad_check(
                [](auto& xs) { return sum(tanh_op(conv_transpose3d(xs[0], xs[1], xs[2]))); }, in2) <
            1e-5);
}

TEST_CASE("grad check: losses") {
    auto p = rand_dtensor({6, 1}, 52, 0.8, 0.05);
    auto t = rand_dtensor({6, 1}, 53, 0.8, 0.05);
    std::vector<DTensor> in = {p};
    REQUIRE(grad_check([&](auto& xs) { return smooth_l1(xs[0], t, 1.0); }, in) < 1e-5);
    REQUIRE(grad_check([&](auto& xs) { return l1_loss(xs[0], t); }, in) < 1e-5);

    auto logits = rand_dtensor({5, 4}, 54, 1.2);
    std::vector<int> cls = {0, 3, 1, 2, 2};
    std::vector<DTensor> in2 = {logits};
    REQUIRE(grad_check([&](auto& xs) { return cross_entropy(xs[0], cls); }, in2) < 1e-5);

    auto v = rand_dtensor({5, 3}, 55, 1.0, 0.1);
    auto n = rand_dtensor({5, 3}, 56, 1.0, 0.1);
    std::vector<DTensor> in3 = {v};
    REQUIRE(grad_check([&](auto& xs) { return cosine_similarity_loss(xs[0], n); }, in3) < 1e-5);
}

TEST_CASE("backward linearity on random instances") {
    Rng rng(57);
    for (int trial = 0; trial < 5; ++trial) {
        auto x = rand_dtensor({4, 4}, 100 + uint64_t(trial));
        double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);

        auto x1 = DTensor::from(x.shape(), x.data());
        x1.set_requires_grad(true);
        auto combined = add(mul(sum(tanh_op(x1)), a), mul(sum(mul(x1, x1)), b));
        combined.backward();

        auto x2 = DTensor::from(x.shape(), x.data());
        x2.set_requires_grad(true);
        sum(tanh_op(x2)).backward();

        auto x3 = DTensor::from(x.shape(), x.data());
        x3.set_requires_grad(true);
        sum(mul(x3, x3)).backward();

        for (size_t i = 0; i < x.data().size(); ++i)
            REQUIRE(x1.grad()[i] ==
                    Catch::Approx(a * x2.grad()[i] + b * x3.grad()[i]).margin(1e-10));
    }
}

TEST_CASE("adamw first step and decoupled decay") {
    using FT = Tensor<float>;
    auto p = FT::from({1}, {1.0f});
    p.set_requires_grad(true);
    AdamW<float>::Config cfg;
    cfg.lr = 0.1f;
    cfg.weight_decay = 0.0f;
    AdamW<float> opt({p}, cfg);
    p.grad()[0] = 1.0f;
    opt.step();
    REQUIRE(p.data()[0] == Catch::Approx(0.9).margin(1e-4));

    // zero gradient, pure decay: parameter shrinks by (1 - lr wd) per step
    auto q = FT::from({1}, {1.0f});
    q.set_requires_grad(true);
    AdamW<float>::Config cfg2;
    cfg2.lr = 1e-3f;
    cfg2.weight_decay = 1e-3f;
    AdamW<float> opt2({q}, cfg2);
    q.zero_grad();
    float expect = 1.0f;
    for (int i = 0; i < 5; ++i) {
        opt2.step();
        expect *= (1.0f - 1e-3f * 1e-3f);
    }
    REQUIRE(q.data()[0] == Catch::Approx(expect).epsilon(1e-6));
}

TEST_CASE("adadelta makes progress on a quadratic") {
    using FT = Tensor<float>;
    auto p = FT::from({1}, {4.0f});
    p.set_requires_grad(true);
    Adadelta<float>::Config cfg;
    cfg.lr = 1.0f;
    Adadelta<float> opt({p}, cfg);
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        p.grad()[0] = 2.0f * p.data()[0];  // d/dp p^2
        opt.step();
    }
    REQUIRE(std::fabs(p.data()[0]) < 4.0f * 0.9f);
    REQUIRE(opt.step_count() == 200);
}

TEST_CASE("cosine schedule endpoints and monotonicity") {
    CosineSchedule sched{1e-3, 1e-5, 100};
    REQUIRE(sched.lr(0) == Catch::Approx(1e-3));
    REQUIRE(sched.lr(100) == Catch::Approx(1e-5));
    double prev = sched.lr(0);
    for (int t = 1; t <= 100; ++t) {
        double cur = sched.lr(t);
        REQUIRE(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("end-to-end composed gradient check") {
    // conv encoder -> relu -> flatten -> linear -> loss, all checked at once
    auto x = rand_dtensor({2, 1, 5, 5, 5}, 60, 0.5);
    auto w1 = rand_dtensor({2, 1, 3, 3, 3}, 61, 0.4);
    auto b1 = rand_dtensor({2}, 62, 0.2);
    auto w2 = rand_dtensor({2, 2, 3, 3, 3}, 63, 0.4);
    auto b2 = rand_dtensor({2}, 64, 0.2);
    auto lin = rand_dtensor({2, 1}, 65, 0.5);
    std::vector<DTensor> in = {x, w1, b1, w2, b2, lin};
    double err = grad_check(
        [](auto& xs) {
            auto h = relu(conv3d(xs[0], xs[1], xs[2]));
            h = relu(conv3d(h, xs[3], xs[4]));
            auto f = flatten_rows(h);
            auto y = tanh_op(matmul(f, xs[5]));
            return mean(mul(y, y));
        },
        in);
    REQUIRE(err < 1e-5);
}
