#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "escnet/core/rng.h"
#include "escnet/nn/adam.h"
#include "escnet/nn/layers.h"
#include "escnet/nn/ops.h"
#include "oracles.h"

using escnet::RngStream;
using escnet::nn::Padding;
using escnet::nn::PoolMode;
using escnet::nn::Tensor;
using escnet::nn::TensorT;

namespace {

template <typename T>
TensorT<T> random_tensor(escnet::nn::Shape shape, RngStream& rng, bool requires_grad = false) {
    auto t = TensorT<T>::zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = static_cast<T>(rng.normal());
    return t;
}

std::vector<double> widen(const std::vector<float>& v) {
    return std::vector<double>(v.begin(), v.end());
}

} // namespace

TEST_CASE("conv2d: 1x1 unit kernel is the identity") {
    RngStream rng(1);
    auto x = random_tensor<float>({1, 1, 4, 5}, rng);
    auto w = Tensor::from({1, 1, 1, 1}, {1.0f});
    auto y = escnet::nn::conv2d(x, w, 1, 1, Padding::same);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d: 3x3 ones kernel on constant input gives 9c in the interior") {
    const float c = 0.37f;
    auto x = Tensor::full({1, 1, 6, 7}, c);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0f);
    auto y = escnet::nn::conv2d(x, w, 1, 1, Padding::same);
    // interior position, away from the zero-padded border
    CHECK(y.data()[(2 * 7) + 3] == doctest::Approx(9.0f * c));
}

TEST_CASE("conv2d: matches naive oracle within 1e-6 on a random case (f64)") {
    RngStream rng(7);
    auto x = random_tensor<double>({1, 2, 5, 7}, rng);
    auto w = random_tensor<double>({4, 2, 3, 3}, rng);
    auto y = escnet::nn::conv2d(x, w, 1, 1, Padding::same);
    int fo = 0, to = 0;
    auto ref = oracle::conv2d_naive(x.data(), 1, 2, 5, 7, w.data(), 4, 3, 3, {}, 1, 1, true, fo, to);
    REQUIRE(y.size() == ref.size());
    for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-6);
}

TEST_CASE("conv2d: channel mismatch raises a shape error") {
    auto x = Tensor::zeros({1, 3, 4, 4});
    auto w = Tensor::zeros({2, 4, 3, 3});
    CHECK_THROWS_AS(escnet::nn::conv2d(x, w, 1, 1, Padding::same), escnet::ShapeError);
}

TEST_CASE("conv2d: property test against oracle over random shapes and strides") {
    RngStream rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(2));
        const int ci = 1 + static_cast<int>(rng.uniform_index(3));
        const int co = 1 + static_cast<int>(rng.uniform_index(4));
        const int kf = 1 + static_cast<int>(rng.uniform_index(3));
        const int kt = 1 + static_cast<int>(rng.uniform_index(3));
        const int fi = kf + static_cast<int>(rng.uniform_index(6));
        const int ti = kt + static_cast<int>(rng.uniform_index(8));
        const int sf = 1 + static_cast<int>(rng.uniform_index(2));
        const int st = 1 + static_cast<int>(rng.uniform_index(2));
        const bool same = rng.flip();
        auto x = random_tensor<float>({n, ci, fi, ti}, rng);
        auto w = random_tensor<float>({co, ci, kf, kt}, rng);
        auto y = escnet::nn::conv2d(x, w, sf, st, same ? Padding::same : Padding::valid);
        int fo = 0, to = 0;
        auto ref = oracle::conv2d_naive(widen(x.data()), n, ci, fi, ti, widen(w.data()), co, kf, kt, {},
                                        sf, st, same, fo, to);
        REQUIRE(y.size() == ref.size());
        for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-5);
    }
}

TEST_CASE("conv1d: k=1 weight-1 stride-1 is the identity") {
    RngStream rng(3);
    auto x = random_tensor<float>({1, 1, 9}, rng);
    auto w = Tensor::from({1, 1, 1}, {1.0f});
    auto y = escnet::nn::conv1d(x, w, 1, Padding::same);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv1d: same-padding stride arithmetic gives ceil(len/stride)") {
    auto x = Tensor::zeros({1, 1, 441 * 4});
    auto w = Tensor::zeros({1, 1, 128});
    auto y = escnet::nn::conv1d(x, w, 441, Padding::same);
    CHECK(y.dim(2) == 4);
}

TEST_CASE("conv1d: zero stride rejected") {
    auto x = Tensor::zeros({1, 1, 8});
    auto w = Tensor::zeros({1, 1, 3});
    CHECK_THROWS_AS(escnet::nn::conv1d(x, w, 0, Padding::same), escnet::ArgumentError);
}

TEST_CASE("conv1d: property test against oracle") {
    RngStream rng(13);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(2));
        const int ci = 1 + static_cast<int>(rng.uniform_index(3));
        const int co = 1 + static_cast<int>(rng.uniform_index(3));
        const int k = 1 + static_cast<int>(rng.uniform_index(5));
        const int li = k + static_cast<int>(rng.uniform_index(20));
        const int s = 1 + static_cast<int>(rng.uniform_index(4));
        const bool same = rng.flip();
        auto x = random_tensor<float>({n, ci, li}, rng);
        auto w = random_tensor<float>({co, ci, k}, rng);
        auto y = escnet::nn::conv1d(x, w, s, same ? Padding::same : Padding::valid);
        int lo = 0;
        auto ref = oracle::conv1d_naive(widen(x.data()), n, ci, li, widen(w.data()), co, k, s, same, lo);
        REQUIRE(y.size() == ref.size());
        for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-5);
    }
}

TEST_CASE("pool2d: (1,1) kernel is the identity") {
    RngStream rng(5);
    auto x = random_tensor<float>({1, 2, 3, 4}, rng);
    auto y = escnet::nn::pool2d(x, 1, 1, PoolMode::max);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("pool2d: max over [2,1] column picks the larger value") {
    auto x = Tensor::from({1, 1, 2, 1}, {3.0f, 7.0f});
    auto y = escnet::nn::pool2d(x, 2, 1, PoolMode::max);
    CHECK(y.data()[0] == 7.0f);
}

TEST_CASE("pool2d: avg matches naive oracle; property over random shapes") {
    RngStream rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(2));
        const int c = 1 + static_cast<int>(rng.uniform_index(3));
        const int pf = 1 + static_cast<int>(rng.uniform_index(3));
        const int pt = 1 + static_cast<int>(rng.uniform_index(3));
        const int f = pf * (1 + static_cast<int>(rng.uniform_index(4)));
        const int t = pt * (1 + static_cast<int>(rng.uniform_index(4)));
        auto x = random_tensor<float>({n, c, f, t}, rng);
        for (const bool max_mode : {false, true}) {
            auto y = escnet::nn::pool2d(x, pf, pt, max_mode ? PoolMode::max : PoolMode::avg);
            auto ref = oracle::pool2d_naive(widen(x.data()), n, c, f, t, pf, pt, max_mode);
            REQUIRE(y.size() == ref.size());
            for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-6);
        }
    }
}

TEST_CASE("pool2d: non-divisible extent raises a shape error") {
    auto x = Tensor::zeros({1, 1, 5, 4});
    CHECK_THROWS_AS(escnet::nn::pool2d(x, 2, 2, PoolMode::max), escnet::ShapeError);
}

TEST_CASE("batch_norm: standardized batch passes through with unit gamma") {
    RngStream rng(23);
    const int n = 4, c = 3, f = 5, t = 6;
    auto x = random_tensor<float>({n, c, f, t}, rng);
    // standardize each channel manually
    for (int ci = 0; ci < c; ++ci) {
        double sum = 0.0, sum_sq = 0.0;
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < f * t; ++i) {
                const double v = x.data()[(static_cast<size_t>(b) * c + ci) * f * t + i];
                sum += v;
                sum_sq += v * v;
            }
        const double mu = sum / (n * f * t);
        const double sd = std::sqrt(sum_sq / (n * f * t) - mu * mu);
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < f * t; ++i) {
                auto& v = x.data()[(static_cast<size_t>(b) * c + ci) * f * t + i];
                v = static_cast<float>((v - mu) / sd);
            }
    }
    auto bn = escnet::nn::BatchNorm<float>::make("bn", c);
    auto y = bn(x, true);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-3));
}

TEST_CASE("batch_norm: constant channel collapses to beta") {
    auto x = Tensor::full({2, 1, 3, 3}, 5.0f);
    auto bn = escnet::nn::BatchNorm<float>::make("bn", 1);
    bn.beta.data()[0] = 0.25f;
    auto y = bn(x, true);
    for (const float v : y.data()) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("batch_norm: output moments are 0/1 per channel") {
    RngStream rng(29);
    const int n = 6, c = 4, f = 7, t = 8;
    auto x = random_tensor<float>({n, c, f, t}, rng);
    for (auto& v : x.data()) v = v * 3.0f + 1.5f;
    auto bn = escnet::nn::BatchNorm<float>::make("bn", c);
    auto y = bn(x, true);
    for (int ci = 0; ci < c; ++ci) {
        double sum = 0.0, sum_sq = 0.0;
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < f * t; ++i) {
                const double v = y.data()[(static_cast<size_t>(b) * c + ci) * f * t + i];
                sum += v;
                sum_sq += v * v;
            }
        const double mu = sum / (n * f * t);
        const double var = sum_sq / (n * f * t) - mu * mu;
        CHECK(std::abs(mu) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batch_norm: batch of one in training mode is a configuration error") {
    auto x = Tensor::zeros({1, 2, 3, 3});
    auto bn = escnet::nn::BatchNorm<float>::make("bn", 2);
    CHECK_THROWS_AS(bn(x, true), escnet::ConfigError);
}

TEST_CASE("activations: relu and softmax basics") {
    auto x = Tensor::from({1, 2}, {-2.0f, 3.0f});
    auto y = escnet::nn::relu(x);
    CHECK(y.data()[0] == 0.0f);
    CHECK(y.data()[1] == 3.0f);

    auto z = escnet::nn::softmax_rows(Tensor::from({1, 2}, {0.0f, 0.0f}));
    CHECK(z.data()[0] == doctest::Approx(0.5f));
    CHECK(z.data()[1] == doctest::Approx(0.5f));

    auto big = escnet::nn::softmax_rows(Tensor::from({1, 2}, {1000.0f, 1000.0f}));
    CHECK(big.data()[0] == doctest::Approx(0.5f));
    CHECK(std::isfinite(big.data()[0]));
}

TEST_CASE("softmax: rows are distributions and shift-invariant") {
    RngStream rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + static_cast<int>(rng.uniform_index(8));
        auto x = random_tensor<float>({3, k}, rng);
        auto y = escnet::nn::softmax_rows(x);
        auto shifted = x.detach();
        for (auto& v : shifted.data()) v += 13.5f;
        auto y2 = escnet::nn::softmax_rows(shifted);
        for (int r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (int i = 0; i < k; ++i) {
                const float p = y.data()[static_cast<size_t>(r) * k + i];
                CHECK(p >= 0.0f);
                sum += p;
                CHECK(std::abs(p - y2.data()[static_cast<size_t>(r) * k + i]) < 1e-6);
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("mae_loss: exact values") {
    auto p = Tensor::from({1, 2}, {0.3f, 0.7f});
    CHECK(escnet::nn::mae_loss(p, p.detach()).item() == 0.0f);

    // uniform prediction vs one-hot over 10 classes: (0.9 + 9 * 0.1) / 10
    std::vector<float> uniform(10, 0.1f), onehot(10, 0.0f);
    onehot[4] = 1.0f;
    auto loss = escnet::nn::mae_loss(Tensor::from({1, 10}, uniform), Tensor::from({1, 10}, onehot));
    CHECK(loss.item() == doctest::Approx(0.18f));

    // duplicating the batch leaves the mean unchanged
    std::vector<float> u2, o2;
    for (int rep = 0; rep < 2; ++rep) {
        u2.insert(u2.end(), uniform.begin(), uniform.end());
        o2.insert(o2.end(), onehot.begin(), onehot.end());
    }
    auto loss2 = escnet::nn::mae_loss(Tensor::from({2, 10}, u2), Tensor::from({2, 10}, o2));
    CHECK(loss2.item() == doctest::Approx(loss.item()));
}

TEST_CASE("backward: gradient of sum of squares is 2x") {
    RngStream rng(37);
    auto x = random_tensor<float>({1, 6}, rng, true);
    auto loss = escnet::nn::sum_all(escnet::nn::mul(x, x));
    escnet::nn::backward(loss);
    for (size_t i = 0; i < x.size(); ++i) {
        CHECK(x.grad()[i] == doctest::Approx(2.0f * x.data()[i]).epsilon(1e-5));
    }
}

TEST_CASE("backward: detached branch contributes no gradient") {
    RngStream rng(41);
    auto x = random_tensor<float>({1, 4}, rng, true);
    auto detached = x.detach();
    auto loss = escnet::nn::sum_all(escnet::nn::mul(detached, detached));
    // loss does not depend on x through the graph
    x.zero_grad();
    escnet::nn::backward(loss);
    for (size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == 0.0f);
}

TEST_CASE("backward: rejects non-scalar losses") {
    auto x = Tensor::zeros({2, 2}, true);
    auto y = escnet::nn::relu(x);
    CHECK_THROWS_AS(escnet::nn::backward(y), escnet::ArgumentError);
}

TEST_CASE("mul_time: matches broadcast-multiply oracle exactly") {
    RngStream rng(43);
    auto x = random_tensor<float>({2, 3, 4, 6}, rng);
    auto a = random_tensor<float>({2, 6}, rng);
    auto y = escnet::nn::mul_time(x, a);
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 3; ++c)
            for (int f = 0; f < 4; ++f)
                for (int t = 0; t < 6; ++t) {
                    const size_t i = ((static_cast<size_t>(b) * 3 + c) * 4 + f) * 6 + t;
                    CHECK(y.data()[i] == x.data()[i] * a.data()[static_cast<size_t>(b) * 6 + t]);
                }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto p = Tensor::from({3}, {1.0f, -2.0f, 0.5f}, true);
    p.set_name("p");
    escnet::nn::Adam<float> opt({{"p", p}});
    p.zero_grad();
    opt.step(0.001f);
    CHECK(p.data()[0] == 1.0f);
    CHECK(p.data()[1] == -2.0f);
    CHECK(p.data()[2] == 0.5f);
}

TEST_CASE("adam: first-step magnitude is about lr for a constant gradient") {
    auto p = Tensor::from({1}, {0.0f}, true);
    escnet::nn::Adam<float> opt({{"p", p}});
    p.grad()[0] = 0.37f;
    opt.step(0.001f);
    CHECK(std::abs(p.data()[0] + 0.001f) < 1e-6); // moved by ~lr in -grad direction
}

TEST_CASE("adam: two steps match the scalar reference at f64") {
    auto p = TensorT<double>::from({1}, {0.5}, true);
    escnet::nn::Adam<double> opt({{"p", p}});
    oracle::ScalarAdam ref;
    double ref_p = 0.5;

    p.grad()[0] = 0.25;
    opt.step(0.01);
    ref_p = ref.update(ref_p, 0.25, 0.01);
    CHECK(std::abs(p.data()[0] - ref_p) < 1e-10);

    p.zero_grad();
    p.grad()[0] = -0.125;
    opt.step(0.01);
    ref_p = ref.update(ref_p, -0.125, 0.01);
    CHECK(std::abs(p.data()[0] - ref_p) < 1e-10);
}

TEST_CASE("adam: non-finite gradient reports the parameter by name") {
    auto p = Tensor::from({1}, {0.0f}, true);
    escnet::nn::Adam<float> opt({{"stage0.conv.w", p}});
    p.grad()[0] = std::numeric_limits<float>::quiet_NaN();
    try {
        opt.step(0.001f);
        FAIL("expected TrainingError");
    } catch (const escnet::TrainingError& e) {
        CHECK(std::string(e.what()).find("stage0.conv.w") != std::string::npos);
    }
}

TEST_CASE("determinism: identical seeds give bitwise-identical updates") {
    auto run = [] {
        RngStream rng(99);
        auto x = random_tensor<float>({4, 3, 8, 8}, rng);
        auto w = random_tensor<float>({2, 3, 3, 3}, rng, true);
        w.set_name("w");
        escnet::nn::Adam<float> opt({{"w", w}});
        std::vector<float> trace;
        for (int step = 0; step < 3; ++step) {
            opt.zero_grad();
            auto y = escnet::nn::conv2d(x, w, 1, 1, Padding::same);
            auto loss = escnet::nn::mae_loss(
                escnet::nn::relu(y), escnet::nn::TensorT<float>::full(y.shape(), 0.1f));
            escnet::nn::backward(loss);
            opt.step(0.01f);
        }
        return w.data();
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
