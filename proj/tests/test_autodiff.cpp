#include <doctest.h>

#include <random>

#include "irvf/gradcheck.hpp"
#include "irvf/graph.hpp"
#include "irvf/ops.hpp"
#include "irvf/testing/oracles.hpp"

using namespace irvf;
using Id = Graph<double>::Id;

namespace {

constexpr double kTol = 1e-4;
constexpr double kEps = 1e-6;

TensorD rnd(std::mt19937_64& gen, Shape s, double lo = -1.0, double hi = 1.0) {
    return oracles::random_tensor(gen, s, lo, hi);
}

}  // namespace

TEST_CASE("finite_diff_check: quadratic is exact under central differences") {
    std::vector<TensorD> params{TensorD({1, 1, 1}, 3.0)};
    std::vector<TensorD> analytic{TensorD({1, 1, 1}, 6.0)};
    auto f = [](const std::vector<TensorD>& p) { return p[0][0] * p[0][0]; };
    CHECK(finite_diff_check<double>(f, params, analytic, 1e-5) < 1e-8);

    // wrong analytic gradient must be caught
    std::vector<TensorD> bad{TensorD({1, 1, 1}, 5.5)};
    CHECK(finite_diff_check<double>(f, params, bad, 1e-5) > 1e-2);
}

TEST_CASE("finite_diff_check rejects bad inputs") {
    std::vector<TensorD> params{TensorD({1, 1, 1}, 1.0)};
    std::vector<TensorD> analytic{TensorD({1, 1, 1}, 1.0)};
    auto f = [](const std::vector<TensorD>& p) { return p[0][0]; };
    CHECK_THROWS_AS(finite_diff_check<double>(f, params, analytic, 0.0), std::invalid_argument);
    auto bad = [](const std::vector<TensorD>&) { return std::nan(""); };
    CHECK_THROWS_AS(finite_diff_check<double>(bad, params, analytic, 1e-5), std::runtime_error);
}

TEST_CASE("elementwise op gradients") {
    std::mt19937_64 gen(21);
    const TensorD a = rnd(gen, {3, 4, 5});
    const TensorD b = rnd(gen, {3, 4, 5}, 0.5, 1.5);

    auto check2 = [&](const char* what, auto make) {
        const double err = finite_diff_check_graph<double>(
            {a, b}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                return g.sum(make(g, ids[0], ids[1]));
            },
            kEps);
        INFO(what);
        CHECK(err < kTol);
    };
    check2("add", [](Graph<double>& g, Id x, Id y) { return g.add(x, y); });
    check2("sub", [](Graph<double>& g, Id x, Id y) { return g.sub(x, y); });
    check2("mul", [](Graph<double>& g, Id x, Id y) { return g.mul(x, y); });
    check2("div", [](Graph<double>& g, Id x, Id y) { return g.div(x, y); });
    check2("maximum", [](Graph<double>& g, Id x, Id y) { return g.maximum(x, y); });

    auto check1 = [&](const char* what, const TensorD& input, auto make) {
        const double err = finite_diff_check_graph<double>(
            {input}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                return g.sum(make(g, ids[0]));
            },
            kEps);
        INFO(what);
        CHECK(err < kTol);
    };
    check1("abs", a, [](Graph<double>& g, Id x) { return g.abs(x); });
    check1("gelu", a, [](Graph<double>& g, Id x) { return g.gelu(x); });
    check1("mul_scalar", a, [](Graph<double>& g, Id x) { return g.mul_scalar(x, -2.5); });
    check1("add_scalar", a, [](Graph<double>& g, Id x) { return g.add_scalar(x, 0.3); });
    check1("clamp", a, [](Graph<double>& g, Id x) { return g.clamp(x, -0.9, 0.9); });
}

TEST_CASE("broadcast gradients reduce correctly") {
    std::mt19937_64 gen(22);
    const TensorD x = rnd(gen, {3, 4, 4});
    const TensorD map = rnd(gen, {1, 4, 4}, 0.2, 0.8);
    const TensorD vec = rnd(gen, {3, 1, 1}, 0.5, 1.5);
    const TensorD sc = rnd(gen, {1, 1, 1}, 0.5, 1.5);

    for (const TensorD& other : {map, vec, sc}) {
        const double err = finite_diff_check_graph<double>(
            {x, other}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                return g.sum(g.mul(g.mul(ids[0], ids[1]), ids[0]));
            },
            kEps);
        CHECK(err < kTol);
    }
}

TEST_CASE("structured op gradients (softmax, pools, resize, norm, attention pieces)") {
    std::mt19937_64 gen(23);
    const TensorD x = rnd(gen, {4, 5, 6});
    const TensorD probe = rnd(gen, {4, 5, 6});

    // weight the output so the gradient is not uniform
    auto weighted = [&](auto make) {
        return [make, probe](Graph<double>& g, const std::vector<Id>& ids) {
            const Id w = g.leaf(probe, false);
            return g.sum(g.mul(make(g, ids), w));
        };
    };

    CHECK(finite_diff_check_graph<double>(
              {x}, weighted([](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.softmax_channels(ids[0]);
              }),
              kEps) < kTol);

    const TensorD probe_gap = rnd(gen, {4, 1, 1});
    CHECK(finite_diff_check_graph<double>(
              {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.global_average_pool(ids[0]), g.leaf(probe_gap, false)));
              },
              kEps) < kTol);

    const TensorD probe_cap = rnd(gen, {1, 5, 6});
    CHECK(finite_diff_check_graph<double>(
              {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.channel_mean(ids[0]), g.leaf(probe_cap, false)));
              },
              kEps) < kTol);

    const TensorD probe_rs = rnd(gen, {4, 9, 4});
    CHECK(finite_diff_check_graph<double>(
              {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.bilinear_resize(ids[0], 9, 4), g.leaf(probe_rs, false)));
              },
              kEps) < kTol);

    const TensorD gamma = rnd(gen, {4, 1, 1}, 0.5, 1.5);
    CHECK(finite_diff_check_graph<double>(
              {x, gamma}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.layer_norm(ids[0], ids[1], 1e-6), g.leaf(probe, false)));
              },
              kEps) < kTol);

    CHECK(finite_diff_check_graph<double>(
              {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.l2norm_spatial(ids[0], 1e-12), g.leaf(probe, false)));
              },
              kEps) < kTol);

    const TensorD q = rnd(gen, {3, 4, 4});
    const TensorD k = rnd(gen, {3, 4, 4});
    const TensorD v = rnd(gen, {3, 4, 4});
    const TensorD probe_at = rnd(gen, {3, 4, 4});
    CHECK(finite_diff_check_graph<double>(
              {q, k, v}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  const Id attn = g.plane_softmax(g.gram(ids[0], ids[1]));
                  return g.sum(g.mul(g.mixdown(attn, ids[2]), g.leaf(probe_at, false)));
              },
              kEps) < kTol);
}

TEST_CASE("conv and slicing gradients") {
    std::mt19937_64 gen(24);
    const TensorD x = rnd(gen, {2, 5, 5});
    const TensorD w = rnd(gen, {3, 2, 9}, -0.5, 0.5);
    const TensorD b = rnd(gen, {3, 1, 1}, -0.2, 0.2);

    // conv2d + sum, gradient w.r.t. input, weight and bias
    CHECK(finite_diff_check_graph<double>(
              {x, w, b}, [](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.abs(g.conv2d(ids[0], ids[1], ids[2], 3, 1, 1)));
              },
              kEps) < kTol);

    // strided, no bias
    CHECK(finite_diff_check_graph<double>(
              {x, w}, [](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.conv2d(ids[0], ids[1], Graph<double>::kNone, 3, 2, 1));
              },
              kEps) < kTol);

    const TensorD dw = rnd(gen, {2, 1, 9}, -0.5, 0.5);
    const TensorD db = rnd(gen, {2, 1, 1}, -0.2, 0.2);
    const TensorD probe_dw = rnd(gen, {2, 5, 5});
    CHECK(finite_diff_check_graph<double>(
              {x, dw, db}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.dwconv(ids[0], ids[1], ids[2], 3, 1), g.leaf(probe_dw, false)));
              },
              kEps) < kTol);

    const TensorD probe_sl = rnd(gen, {2, 5, 5});
    CHECK(finite_diff_check_graph<double>(
              {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  const Id cat = g.concat_channels(ids[0], g.mul_scalar(ids[0], 2.0));
                  return g.sum(g.mul(g.slice_channels(cat, 1, 2), g.leaf(probe_sl, false)));
              },
              kEps) < kTol);
}

TEST_CASE("haze primitive gradients (box, dark channel, gather, sobel)") {
    std::mt19937_64 gen(25);
    const TensorD x = rnd(gen, {1, 6, 7}, 0.1, 0.9);
    const TensorD probe = rnd(gen, {1, 6, 7});

    CHECK(finite_diff_check_graph<double>(
              {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.box_mean(ids[0], 2), g.leaf(probe, false)));
              },
              kEps) < kTol);

    const TensorD xc = rnd(gen, {3, 6, 6}, 0.0, 1.0);
    const TensorD probe_dc = rnd(gen, {1, 6, 6});
    CHECK(finite_diff_check_graph<double>(
              {xc}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.dark_channel(ids[0], 3), g.leaf(probe_dc, false)));
              },
              kEps) < kTol);

    const TensorD probe_gm = rnd(gen, {3, 1, 1});
    CHECK(finite_diff_check_graph<double>(
              {xc}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.gather_mean_spatial(ids[0], {1u, 5u, 17u}),
                                     g.leaf(probe_gm, false)));
              },
              kEps) < kTol);

    const TensorD probe_sb = rnd(gen, {3, 6, 6});
    CHECK(finite_diff_check_graph<double>(
              {xc}, [&](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.sum(g.mul(g.sobel_mag(ids[0]), g.leaf(probe_sb, false)));
              },
              kEps) < kTol);
}

TEST_CASE("graph forward equals plain kernels") {
    std::mt19937_64 gen(26);
    const TensorD x = rnd(gen, {3, 6, 6});
    auto p = ConvParams<double>::make(2, 3, 3, 1, 1);
    p.kernel = rnd(gen, {2, 3, 9});
    p.bias = rnd(gen, {2, 1, 1});

    Graph<double> g;
    const Id xi = g.leaf(x, false);
    const Id ci = g.conv2d(xi, g.leaf(p.kernel, false), g.leaf(p.bias, false), 3, 1, 1);
    CHECK(max_abs_diff(g.value(ci), conv2d(x, p)) == 0.0);

    const Id si = g.softmax_channels(xi);
    CHECK(max_abs_diff(g.value(si), softmax(x)) == 0.0);

    const Id ri = g.bilinear_resize(xi, 9, 5);
    CHECK(max_abs_diff(g.value(ri), bilinear_resize(x, 9, 5)) == 0.0);
}

TEST_CASE("L1 objective away from kinks") {
    std::mt19937_64 gen(27);
    const TensorD a = rnd(gen, {2, 4, 4}, 0.1, 0.9);
    TensorD b = rnd(gen, {2, 4, 4}, -0.9, -0.1);  // sign gap keeps |a-b| off zero
    CHECK(finite_diff_check_graph<double>(
              {a, b}, [](Graph<double>& g, const std::vector<Id>& ids) {
                  return g.mean(g.abs(g.sub(ids[0], ids[1])));
              },
              kEps) < kTol);
}

TEST_CASE("backward requires a scalar root") {
    Graph<double> g;
    const Id x = g.leaf(TensorD({2, 2, 2}, 1.0), true);
    CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}
