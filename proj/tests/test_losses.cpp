#include <doctest.h>

#include <random>

#include "irvf/gradcheck.hpp"
#include "irvf/losses.hpp"
#include "irvf/testing/oracles.hpp"

using namespace irvf;
using Id = Graph<double>::Id;

namespace {

TensorD rnd(std::mt19937_64& gen, Shape s, double lo = 0.0, double hi = 1.0) {
    return oracles::random_tensor(gen, s, lo, hi);
}

}  // namespace

TEST_CASE("l1 restoration: zero, constant offset, elementwise oracle") {
    std::mt19937_64 gen(111);
    const TensorD a = rnd(gen, {3, 6, 6});
    CHECK(l1_restoration(a, a) == 0.0);

    TensorD b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.1;
    CHECK(l1_restoration(b, a) == doctest::Approx(0.1).epsilon(1e-12));

    const TensorD c = rnd(gen, {3, 6, 6});
    double expect = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) expect += std::abs(a[i] - c[i]);
    expect /= static_cast<double>(a.size());
    CHECK(l1_restoration(a, c) == doctest::Approx(expect).epsilon(1e-12));

    CHECK_THROWS_AS(l1_restoration(a, TensorD({3, 6, 5}, 0.0)), std::invalid_argument);
}

TEST_CASE("sobel gradient: constants, unit step edge, oracle") {
    TensorD flat({2, 5, 5}, 0.42);
    const TensorD zero = sobel_gradient(flat);
    for (std::size_t i = 0; i < zero.size(); ++i) CHECK(zero[i] == 0.0);

    // vertical step of height 1 between columns 3 and 4
    TensorD step({1, 6, 8}, 0.0);
    for (int y = 0; y < 6; ++y) {
        for (int x = 4; x < 8; ++x) step.at(0, y, x) = 1.0;
    }
    const TensorD mag = sobel_gradient(step);
    for (int y = 1; y < 5; ++y) {
        CHECK(mag.at(0, y, 3) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(mag.at(0, y, 4) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(mag.at(0, y, 2) == 0.0);
    }

    std::mt19937_64 gen(112);
    const TensorD x = rnd(gen, {3, 9, 7});
    CHECK(max_abs_diff(sobel_gradient(x), oracles::sobel_mag(x)) < 1e-12);
}

TEST_CASE("gradient loss: exact-match zero, constant zero, composed oracle") {
    std::mt19937_64 gen(113);
    const TensorD gt = rnd(gen, {3, 8, 8});
    const TensorD ir_flat({1, 8, 8}, 0.5);  // zero gradients
    CHECK(gradient_loss(gt, ir_flat, gt) == 0.0);

    const TensorD cf({3, 8, 8}, 0.2);
    const TensorD cg({3, 8, 8}, 0.9);
    CHECK(gradient_loss(cf, ir_flat, cg) == 0.0);

    const TensorD fused = rnd(gen, {3, 8, 8});
    const TensorD ir = rnd(gen, {1, 8, 8});
    const TensorD gf = oracles::sobel_mag(fused);
    const TensorD gi = oracles::sobel_mag(ir);
    const TensorD gg = oracles::sobel_mag(gt);
    double expect = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                expect += std::abs(gf.at(c, y, x) - std::max(gi.at(0, y, x), gg.at(c, y, x)));
            }
        }
    }
    expect /= 64.0;
    CHECK(gradient_loss(fused, ir, gt) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("intensity loss: exact-match zero, saturated infrared, oracle") {
    std::mt19937_64 gen(114);
    const TensorD gt = rnd(gen, {3, 8, 8});
    const TensorD ir = rnd(gen, {1, 8, 8});

    TensorD best({3, 8, 8});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) best.at(c, y, x) = std::max(ir.at(0, y, x), gt.at(c, y, x));
        }
    }
    CHECK(intensity_loss(best, ir, gt) == 0.0);

    const TensorD ones({1, 8, 8}, 1.0);
    const TensorD fused = rnd(gen, {3, 8, 8});
    double expect = 0.0;
    for (std::size_t i = 0; i < fused.size(); ++i) expect += std::abs(fused[i] - 1.0);
    expect /= 64.0;
    CHECK(intensity_loss(fused, ones, gt) == doctest::Approx(expect).epsilon(1e-12));

    double oracle = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                oracle += std::abs(fused.at(c, y, x) - std::max(ir.at(0, y, x), gt.at(c, y, x)));
            }
        }
    }
    oracle /= 64.0;
    CHECK(intensity_loss(fused, ir, gt) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("max-argument order does not change the losses") {
    std::mt19937_64 gen(115);
    const TensorD fused = rnd(gen, {3, 8, 8});
    const TensorD ir = rnd(gen, {1, 8, 8});
    const TensorD gt = rnd(gen, {3, 8, 8});

    // swap the max arguments by hand and compare against the implementation
    double swapped = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                swapped += std::abs(fused.at(c, y, x) - std::max(gt.at(c, y, x), ir.at(0, y, x)));
            }
        }
    }
    swapped /= 64.0;
    CHECK(intensity_loss(fused, ir, gt) == doctest::Approx(swapped).epsilon(1e-12));
}

TEST_CASE("total loss: composition, alpha scaling, graph/plain agreement") {
    std::mt19937_64 gen(116);
    const TensorD fused = rnd(gen, {3, 8, 8});
    const TensorD dehazed = rnd(gen, {3, 8, 8});
    const TensorD ir = rnd(gen, {1, 8, 8});
    const TensorD gt = rnd(gen, {3, 8, 8});

    CHECK(total_loss(gt, gt, TensorD({1, 8, 8}, 0.0), gt, LossConfig{1.0}) ==
          doctest::Approx(0.0).epsilon(1e-15));

    const double li = intensity_loss(fused, ir, gt);
    const double lg = gradient_loss(fused, ir, gt);
    const double l1 = l1_restoration(dehazed, gt);
    for (double alpha : {0.0, 1.0, 2.0}) {
        CHECK(total_loss(fused, dehazed, ir, gt, LossConfig{alpha}) ==
              doctest::Approx(li + lg + alpha * l1).epsilon(1e-12));
    }

    // affine in alpha with slope l1
    const double t0 = total_loss(fused, dehazed, ir, gt, LossConfig{0.0});
    const double t2 = total_loss(fused, dehazed, ir, gt, LossConfig{2.0});
    CHECK((t2 - t0) / 2.0 == doctest::Approx(l1).epsilon(1e-12));

    CHECK_THROWS_AS(total_loss(fused, dehazed, ir, gt, LossConfig{-0.1}), std::invalid_argument);

    Graph<double> g;
    const auto out = total_loss_g(g, g.leaf(fused, false), g.leaf(dehazed, false),
                                  g.leaf(ir, false), g.leaf(gt, false), LossConfig{1.0});
    CHECK(g.scalar(out.total) ==
          doctest::Approx(total_loss(fused, dehazed, ir, gt, LossConfig{1.0})).epsilon(1e-12));
    CHECK(g.scalar(out.l1) == doctest::Approx(l1).epsilon(1e-12));
    CHECK(g.scalar(out.grad) == doctest::Approx(lg).epsilon(1e-12));
    CHECK(g.scalar(out.intensity) == doctest::Approx(li).epsilon(1e-12));
}

TEST_CASE("alpha=0 makes the total independent of the dehazed image") {
    std::mt19937_64 gen(117);
    const TensorD fused = rnd(gen, {3, 6, 6});
    const TensorD dehazed = rnd(gen, {3, 6, 6});
    const TensorD ir = rnd(gen, {1, 6, 6});
    const TensorD gt = rnd(gen, {3, 6, 6});

    Graph<double> g;
    const Id de = g.leaf(dehazed, true);
    const auto out = total_loss_g(g, g.leaf(fused, false), de, g.leaf(ir, false), g.leaf(gt, false),
                                  LossConfig{0.0});
    g.backward(out.total);
    for (std::size_t i = 0; i < dehazed.size(); ++i) CHECK(g.grad(de)[i] == 0.0);
}

TEST_CASE("loss gradients pass finite differences off the kinks") {
    // Every loss is piecewise linear in the images, so central differences are
    // exact as long as the step stays inside one linear piece. The ramps keep
    // all Sobel responses and residuals at least 0.04 from any kink while the
    // step moves values by at most 8e-3.
    const double eps = 1e-3;
    TensorD fused({3, 6, 6}), dehazed({3, 6, 6}), gt({3, 6, 6});
    const TensorD ir({1, 6, 6}, 0.1);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                fused.at(c, y, x) = 0.6 + 0.02 * (x + 2 * y) + 0.003 * c;
                gt.at(c, y, x) = 0.3 + 0.01 * (x + 2 * y) + 0.002 * c;
                dehazed.at(c, y, x) = gt.at(c, y, x) + 0.1 + 0.005 * x;
            }
        }
    }

    const double err_total = finite_diff_check_graph<double>(
        {fused, dehazed}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return total_loss_g(g, ids[0], ids[1], g.leaf(ir, false), g.leaf(gt, false),
                                LossConfig{1.3})
                .total;
        },
        eps);
    CHECK(err_total < 1e-4);

    const double err_grad = finite_diff_check_graph<double>(
        {fused}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return gradient_loss_g(g, ids[0], g.leaf(ir, false), g.leaf(gt, false));
        },
        eps);
    CHECK(err_grad < 1e-4);

    const double err_int = finite_diff_check_graph<double>(
        {fused}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return intensity_loss_g(g, ids[0], g.leaf(ir, false), g.leaf(gt, false));
        },
        eps);
    CHECK(err_int < 1e-4);

    const double err_l1 = finite_diff_check_graph<double>(
        {dehazed}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return l1_restoration_g(g, ids[0], g.leaf(gt, false));
        },
        eps);
    CHECK(err_l1 < 1e-4);
}

TEST_CASE("losses are non-negative and vanish only on zero residual") {
    std::mt19937_64 gen(119);
    const TensorD fused = rnd(gen, {3, 6, 6});
    const TensorD ir = rnd(gen, {1, 6, 6});
    const TensorD gt = rnd(gen, {3, 6, 6});
    CHECK(gradient_loss(fused, ir, gt) >= 0.0);
    CHECK(intensity_loss(fused, ir, gt) >= 0.0);
    CHECK(l1_restoration(fused, gt) >= 0.0);
    if (max_abs_diff(fused, gt) > 0.0) CHECK(l1_restoration(fused, gt) > 0.0);
}
