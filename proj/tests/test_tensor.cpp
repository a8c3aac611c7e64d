#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snasnet/tensor.hpp"

using namespace snasnet;

TEST_CASE("conv2d identity 1x1 kernel") {
    Tensor4 x(1, 1, 3, 3);
    for (size_t i = 0; i < x.size(); ++i) x.data[i] = 1.0f;
    ConvWeights w(1, 1, 1, 1, 0);
    w.at(0, 0, 0, 0) = 1.0f;
    Tensor4 y = conv2d(x, w);
    REQUIRE(y.same_shape(x));
    for (size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == 1.0f);
}

TEST_CASE("conv2d 2x2 input, all-ones 3x3 kernel, padding 1") {
    Tensor4 x(1, 1, 2, 2);
    x.at(0, 0, 0, 0) = 1.0f;
    x.at(0, 0, 0, 1) = 2.0f;
    x.at(0, 0, 1, 0) = 3.0f;
    x.at(0, 0, 1, 1) = 4.0f;
    ConvWeights w(1, 1, 3, 1, 1);
    for (auto& v : w.kernel) v = 1.0f;
    Tensor4 y = conv2d(x, w);
    // every position sees all four inputs
    for (size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == doctest::Approx(10.0f));
}

TEST_CASE("conv2d zero kernel annihilates") {
    Tensor4 x(2, 3, 4, 4);
    for (size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>(i % 7) - 3.0f;
    ConvWeights w(5, 3, 3, 1, 1);
    Tensor4 y = conv2d(x, w);
    for (float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d rejects channel mismatch") {
    Tensor4 x(1, 2, 4, 4);
    ConvWeights w(1, 3, 3, 1, 1);
    CHECK_THROWS_AS(conv2d(x, w), std::invalid_argument);
}

TEST_CASE("conv2d is linear") {
    Rng rng(42);
    ConvWeights w(4, 3, 3, 1, 1);
    he_init(w.kernel, 27, rng);
    Tensor4 x(2, 3, 5, 5), y(2, 3, 5, 5);
    for (auto& v : x.data) v = rng.gaussian();
    for (auto& v : y.data) v = rng.gaussian();
    const float a = 1.7f, b = -0.4f;
    Tensor4 combo(2, 3, 5, 5);
    for (size_t i = 0; i < combo.size(); ++i) combo.data[i] = a * x.data[i] + b * y.data[i];
    Tensor4 lhs = conv2d(combo, w);
    Tensor4 cx = conv2d(x, w), cy = conv2d(y, w);
    for (size_t i = 0; i < lhs.size(); ++i) {
        const float rhs = a * cx.data[i] + b * cy.data[i];
        CHECK(lhs.data[i] == doctest::Approx(rhs).epsilon(1e-5));
    }
}

TEST_CASE("conv2d backward matches finite differences") {
    Rng rng(7);
    ConvWeights w(2, 2, 3, 1, 1);
    he_init(w.kernel, 18, rng);
    Tensor4 x(1, 2, 4, 4);
    for (auto& v : x.data) v = rng.gaussian();

    // loss = sum of outputs
    Tensor4 y = conv2d(x, w);
    Tensor4 gout(y.n, y.c, y.h, y.w);
    for (auto& v : gout.data) v = 1.0f;
    std::vector<float> gk;
    Tensor4 gin = conv2d_backward(x, w, gout, gk);

    const float eps = 1e-3f;
    auto loss = [&](const Tensor4& xx, const ConvWeights& ww) {
        Tensor4 o = conv2d(xx, ww);
        double s = 0;
        for (float v : o.data) s += v;
        return s;
    };
    for (size_t i = 0; i < x.size(); i += 5) {
        Tensor4 xp = x;
        xp.data[i] += eps;
        Tensor4 xm = x;
        xm.data[i] -= eps;
        const double fd = (loss(xp, w) - loss(xm, w)) / (2 * eps);
        CHECK(gin.data[i] == doctest::Approx(fd).epsilon(1e-3));
    }
    for (size_t i = 0; i < w.kernel.size(); i += 3) {
        ConvWeights wp = w;
        wp.kernel[i] += eps;
        ConvWeights wm = w;
        wm.kernel[i] -= eps;
        const double fd = (loss(x, wp) - loss(x, wm)) / (2 * eps);
        CHECK(gk[i] == doctest::Approx(fd).epsilon(1e-3));
    }
}

TEST_CASE("avgpool2d constant invariance") {
    Tensor4 x(1, 2, 6, 6);
    for (auto& v : x.data) v = 5.0f;
    Tensor4 y = avgpool2d(x, 3, 1, 1);
    // interior positions keep the constant
    for (int ch = 0; ch < 2; ++ch)
        for (int i = 1; i < 5; ++i)
            for (int j = 1; j < 5; ++j)
                CHECK(y.at(0, ch, i, j) == doctest::Approx(5.0f));
}

TEST_CASE("avgpool2d 2x2 hand mean") {
    Tensor4 x(1, 1, 2, 2);
    x.at(0, 0, 0, 0) = 1.0f;
    x.at(0, 0, 0, 1) = 2.0f;
    x.at(0, 0, 1, 0) = 3.0f;
    x.at(0, 0, 1, 1) = 4.0f;
    Tensor4 y = avgpool2d(x, 2, 2, 0);
    REQUIRE(y.h == 1);
    REQUIRE(y.w == 1);
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(2.5f));
}

TEST_CASE("avgpool2d count-include-pad at 1x1 input") {
    Tensor4 x(1, 1, 1, 1);
    x.at(0, 0, 0, 0) = 9.0f;
    Tensor4 y = avgpool2d(x, 3, 1, 1);
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(1.0f)); // 9 / 9 under count-include-pad
}

TEST_CASE("avgpool2d rejects oversized window") {
    Tensor4 x(1, 1, 2, 2);
    CHECK_THROWS_AS(avgpool2d(x, 3, 1, 0), std::invalid_argument);
}

TEST_CASE("batchnorm normalizes batch statistics") {
    Rng rng(11);
    Tensor4 x(8, 2, 4, 4);
    for (int i = 0; i < 8; ++i)
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 4; ++y)
                for (int xx = 0; xx < 4; ++xx)
                    x.at(i, c, y, xx) = 3.0f + 2.0f * rng.gaussian();

    std::vector<float> gamma = {1.0f, 1.0f}, beta = {0.0f, 0.0f};
    Tensor4 y = batchnorm_batchstats(x, gamma, beta, 1e-5f);
    for (int c = 0; c < 2; ++c) {
        double sum = 0, sq = 0;
        for (int i = 0; i < 8; ++i)
            for (int yy = 0; yy < 4; ++yy)
                for (int xx = 0; xx < 4; ++xx) {
                    sum += y.at(i, c, yy, xx);
                    sq += y.at(i, c, yy, xx) * y.at(i, c, yy, xx);
                }
        const double mean = sum / 128.0;
        const double var = sq / 128.0 - mean * mean;
        CHECK(std::abs(mean) < 1e-4);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm constant input collapses to beta") {
    Tensor4 x(4, 1, 2, 2);
    for (auto& v : x.data) v = 7.0f;
    std::vector<float> gamma = {1.5f}, beta = {0.25f};
    Tensor4 y = batchnorm_batchstats(x, gamma, beta, 1e-5f);
    for (float v : y.data) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("batchnorm affine transform") {
    Rng rng(3);
    Tensor4 x(16, 1, 4, 4);
    for (auto& v : x.data) v = rng.gaussian();
    std::vector<float> gamma = {2.0f}, beta = {1.0f};
    Tensor4 y = batchnorm_batchstats(x, gamma, beta, 1e-6f);
    double sum = 0, sq = 0;
    for (float v : y.data) {
        sum += v;
        sq += double(v) * v;
    }
    const double mean = sum / y.size();
    const double std = std::sqrt(sq / y.size() - mean * mean);
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("batchnorm rejects batch of one") {
    Tensor4 x(1, 1, 2, 2);
    std::vector<float> g = {1.0f}, b = {0.0f};
    CHECK_THROWS_AS(batchnorm_batchstats(x, g, b, 1e-5f), std::invalid_argument);
}

TEST_CASE("batchnorm backward matches finite differences") {
    Rng rng(5);
    Tensor4 x(4, 2, 2, 2);
    for (auto& v : x.data) v = rng.gaussian();
    std::vector<float> gamma = {1.3f, 0.8f}, beta = {0.1f, -0.2f};

    auto loss = [&](const Tensor4& xx) {
        Tensor4 o = batchnorm_batchstats(xx, gamma, beta, 1e-5f);
        double s = 0;
        for (size_t i = 0; i < o.size(); ++i) s += o.data[i] * std::sin(0.1 * i);
        return s;
    };

    BnCache cache;
    Tensor4 o = batchnorm_batchstats(x, gamma, beta, 1e-5f, &cache);
    Tensor4 gout(o.n, o.c, o.h, o.w);
    for (size_t i = 0; i < gout.size(); ++i) gout.data[i] = static_cast<float>(std::sin(0.1 * i));
    std::vector<float> gg, gb;
    Tensor4 gin = batchnorm_backward(gout, cache, gamma, gg, gb);

    const float eps = 1e-3f;
    for (size_t i = 0; i < x.size(); i += 7) {
        Tensor4 xp = x;
        xp.data[i] += eps;
        Tensor4 xm = x;
        xm.data[i] -= eps;
        const double fd = (loss(xp) - loss(xm)) / (2 * eps);
        CHECK(gin.data[i] == doctest::Approx(fd).epsilon(5e-2).scale(1.0));
    }
}

TEST_CASE("linear identity and row sum") {
    Matrix x(1, 3);
    x.data = {1.0f, 2.0f, 3.0f};
    Matrix eye(3, 3);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
    std::vector<float> zero_bias(3, 0.0f);
    Matrix y = linear(x, eye, zero_bias);
    CHECK(y.data == x.data);

    Matrix ones(1, 3);
    ones.data = {1.0f, 1.0f, 1.0f};
    std::vector<float> b1(1, 0.0f);
    Matrix xr(1, 3);
    xr.data = {1.0f, 1.0f, 1.0f};
    Matrix s = linear(xr, ones, b1);
    CHECK(s.at(0, 0) == doctest::Approx(3.0f));
}

TEST_CASE("linear hand 2x2 product") {
    Matrix x(2, 2);
    x.data = {1.0f, 2.0f, 3.0f, 4.0f};
    Matrix w(2, 2);
    w.data = {5.0f, 6.0f, 7.0f, 8.0f}; // rows are output features
    std::vector<float> b = {0.5f, -0.5f};
    Matrix y = linear(x, w, b);
    CHECK(y.at(0, 0) == doctest::Approx(1 * 5 + 2 * 6 + 0.5));
    CHECK(y.at(0, 1) == doctest::Approx(1 * 7 + 2 * 8 - 0.5));
    CHECK(y.at(1, 0) == doctest::Approx(3 * 5 + 4 * 6 + 0.5));
    CHECK(y.at(1, 1) == doctest::Approx(3 * 7 + 4 * 8 - 0.5));
}

TEST_CASE("linear rejects dim mismatch") {
    Matrix x(1, 3);
    Matrix w(2, 4);
    std::vector<float> b(2, 0.0f);
    CHECK_THROWS_AS(linear(x, w, b), std::invalid_argument);
}

TEST_CASE("he_init determinism and statistics") {
    std::vector<float> a(100000), b(100000);
    Rng r1(123), r2(123);
    he_init(a, 100, r1);
    he_init(b, 100, r2);
    CHECK(a == b);

    double sum = 0, sq = 0;
    for (float v : a) {
        sum += v;
        sq += double(v) * v;
    }
    const double mean = sum / a.size();
    const double std = std::sqrt(sq / a.size() - mean * mean);
    const double target = std::sqrt(2.0 / 100.0);
    CHECK(std == doctest::Approx(target).epsilon(0.02));
    // mean within 3 standard errors of zero
    CHECK(std::abs(mean) < 3.0 * target / std::sqrt(static_cast<double>(a.size())));
}
