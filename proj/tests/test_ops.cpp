#include <doctest.h>

#include <random>

#include "irvf/ops.hpp"
#include "irvf/testing/oracles.hpp"

using namespace irvf;

TEST_CASE("conv2d: 1x1 identity kernel is the identity") {
    std::mt19937_64 gen(11);
    const TensorD x = oracles::random_tensor(gen, {3, 5, 6});
    const auto p = ConvParams<double>::identity_1x1(3);
    CHECK(max_abs_diff(conv2d(x, p), x) == 0.0);
}

TEST_CASE("conv2d: all-ones 3x3 kernel on a constant field") {
    const double c = 0.37, bias = 0.11;
    TensorD x({2, 6, 7}, c);
    auto p = ConvParams<double>::make(1, 2, 3, 1, 1);
    p.kernel.fill(1.0);
    p.bias.fill(bias);
    const TensorD y = conv2d(x, p);
    // interior pixels see the full window over both channels
    for (int yy = 1; yy < 5; ++yy) {
        for (int xx = 1; xx < 6; ++xx) {
            CHECK(y.at(0, yy, xx) == doctest::Approx(18 * c + bias).epsilon(1e-12));
        }
    }
    // corner sees a 2x2 window per channel
    CHECK(y.at(0, 0, 0) == doctest::Approx(8 * c + bias).epsilon(1e-12));
}

TEST_CASE("conv2d matches the six-loop oracle") {
    std::mt19937_64 gen(12);
    const TensorD x = oracles::random_tensor(gen, {2, 4, 4});
    auto p = ConvParams<double>::make(3, 2, 3, 1, 0);
    p.kernel = oracles::random_tensor(gen, {3, 2, 9});
    p.bias = oracles::random_tensor(gen, {3, 1, 1});
    CHECK(max_abs_diff(conv2d(x, p), oracles::conv2d(x, p.kernel, p.bias, 3, 1, 0)) < 1e-12);
}

TEST_CASE("conv2d oracle sweep over strides and paddings") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 25; ++trial) {
        const int in_c = 1 + static_cast<int>(gen() % 4);
        const int out_c = 1 + static_cast<int>(gen() % 4);
        const int k = (gen() % 2) ? 3 : 1;
        const int stride = 1 + static_cast<int>(gen() % 2);
        const int pad = (k == 3) ? static_cast<int>(gen() % 2) : 0;
        const int h = k + 2 + static_cast<int>(gen() % 12);
        const int w = k + 2 + static_cast<int>(gen() % 12);
        const TensorD x = oracles::random_tensor(gen, {in_c, h, w});
        auto p = ConvParams<double>::make(out_c, in_c, k, stride, pad);
        p.kernel = oracles::random_tensor(gen, {out_c, in_c, k * k});
        p.bias = oracles::random_tensor(gen, {out_c, 1, 1});
        CHECK(max_abs_diff(conv2d(x, p), oracles::conv2d(x, p.kernel, p.bias, k, stride, pad)) < 1e-12);
    }
}

TEST_CASE("conv2d names the offending axis on mismatch") {
    TensorD x({2, 4, 4});
    auto p = ConvParams<double>::make(1, 3, 3, 1, 1);
    CHECK_THROWS_WITH_AS(conv2d(x, p), doctest::Contains("channel axis"), std::invalid_argument);

    auto q = ConvParams<double>::make(1, 2, 3, 1, 0);
    TensorD tiny({2, 2, 2});
    CHECK_THROWS_AS(conv2d(tiny, q), std::invalid_argument);
}

TEST_CASE("softmax: symmetry, closed form, and unit sums") {
    TensorD equal({4, 3, 3}, 1.7);
    const TensorD y = softmax(equal);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(0.25).epsilon(1e-12));

    TensorD two({2, 1, 1});
    two.at(0, 0, 0) = 0.0;
    two.at(1, 0, 0) = std::log(3.0);
    const TensorD z = softmax(two);
    CHECK(z.at(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(z.at(1, 0, 0) == doctest::Approx(0.75).epsilon(1e-12));

    std::mt19937_64 gen(14);
    const TensorD x = oracles::random_tensor(gen, {8, 6, 5}, -4.0, 4.0);
    const TensorD s = softmax(x);
    for (int yy = 0; yy < x.h(); ++yy) {
        for (int xx = 0; xx < x.w(); ++xx) {
            double total = 0.0;
            for (int c = 0; c < x.c(); ++c) {
                total += s.at(c, yy, xx);
                CHECK(s.at(c, yy, xx) > 0.0);
                CHECK(s.at(c, yy, xx) < 1.0);
            }
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }
    CHECK(max_abs_diff(s, oracles::softmax_channels(x)) < 1e-12);
}

TEST_CASE("global average pool") {
    TensorD c1({2, 3, 3}, 0.42);
    auto v = global_average_pool(c1);
    CHECK(v[0] == doctest::Approx(0.42).epsilon(1e-12));

    TensorD half({1, 2, 2});
    half.at(0, 0, 0) = 0.0;
    half.at(0, 0, 1) = 1.0;
    half.at(0, 1, 0) = 0.0;
    half.at(0, 1, 1) = 1.0;
    CHECK(global_average_pool(half)[0] == doctest::Approx(0.5).epsilon(1e-12));

    std::mt19937_64 gen(15);
    const TensorD x = oracles::random_tensor(gen, {5, 7, 4});
    const auto got = global_average_pool(x);
    const auto want = oracles::gap(x);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    TensorD empty({2, 0, 3});
    CHECK_THROWS_AS(global_average_pool(empty), std::invalid_argument);
}

TEST_CASE("channel average pool and replication") {
    std::mt19937_64 gen(16);
    const TensorD single = oracles::random_tensor(gen, {1, 4, 4});
    CHECK(max_abs_diff(channel_average_pool(single), single) == 0.0);

    TensorD pm({2, 3, 3});
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) {
            pm.at(0, y, x) = 0.3 * y - 0.2 * x;
            pm.at(1, y, x) = -pm.at(0, y, x);
        }
    }
    const TensorD zero = channel_average_pool(pm);
    for (std::size_t i = 0; i < zero.size(); ++i) CHECK(std::abs(zero[i]) < 1e-15);

    const TensorD x = oracles::random_tensor(gen, {4, 8, 8});
    CHECK(max_abs_diff(channel_average_pool(x), oracles::channel_mean(x)) < 1e-12);

    const TensorD rep = replicate_channels(channel_average_pool(x), 4);
    CHECK(rep.c() == 4);
    for (int c = 1; c < 4; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int xx = 0; xx < 8; ++xx) CHECK(rep.at(c, y, xx) == rep.at(0, y, xx));
        }
    }
}

TEST_CASE("bilinear resize: constants, identity, and the 2x2 ramp") {
    TensorD c({2, 3, 5}, 0.77);
    const TensorD up = bilinear_resize(c, 7, 9);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(0.77).epsilon(1e-12));

    std::mt19937_64 gen(17);
    const TensorD x = oracles::random_tensor(gen, {3, 6, 6});
    CHECK(max_abs_diff(bilinear_resize(x, 6, 6), x) == 0.0);

    TensorD ramp({1, 2, 2});
    ramp.at(0, 0, 0) = 0.0;
    ramp.at(0, 0, 1) = 1.0;
    ramp.at(0, 1, 0) = 2.0;
    ramp.at(0, 1, 1) = 3.0;
    const TensorD r = bilinear_resize(ramp, 4, 4);
    const double expect[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                 {0.5, 0.75, 1.25, 1.5},
                                 {1.5, 1.75, 2.25, 2.5},
                                 {2.0, 2.25, 2.75, 3.0}};
    for (int yy = 0; yy < 4; ++yy) {
        for (int xx = 0; xx < 4; ++xx) {
            CHECK(r.at(0, yy, xx) == doctest::Approx(expect[yy][xx]).epsilon(1e-12));
        }
    }

    const TensorD big = oracles::random_tensor(gen, {2, 5, 9});
    CHECK(max_abs_diff(bilinear_resize(big, 11, 4), oracles::bilinear_resize(big, 11, 4)) < 1e-12);
}
