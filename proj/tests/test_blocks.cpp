#include <doctest.h>

#include <random>

#include "irvf/blocks.hpp"
#include "irvf/gradcheck.hpp"
#include "irvf/ops.hpp"
#include "irvf/testing/oracles.hpp"

using namespace irvf;
using Id = Graph<double>::Id;

namespace {

void zero_conv(ParamStore<double>& ps, const ConvRef& c) {
    ps.tensor(c.w).fill(0.0);
    ps.tensor(c.b).fill(0.0);
}

}  // namespace

TEST_CASE("transformer block preserves shape and is identity when projections are zeroed") {
    ParamStore<double> ps;
    Rng rng(41);
    const BlockRef blk = register_block(ps, rng, "blk", 6, 1, 2.66);

    std::mt19937_64 gen(42);
    const TensorD x = oracles::random_tensor(gen, {6, 7, 9});

    Graph<double> g;
    auto bound = ps.bind(g, false);
    const Id out = apply_block(g, bound, blk, g.leaf(x, false));
    CHECK(g.value(out).shape() == x.shape());

    zero_conv(ps, blk.attn_out);
    zero_conv(ps, blk.ffn_out);
    Graph<double> g2;
    bound = ps.bind(g2, false);
    const Id ident = apply_block(g2, bound, blk, g2.leaf(x, false));
    CHECK(max_abs_diff(g2.value(ident), x) == 0.0);
}

TEST_CASE("attention rows sum to one per head") {
    ParamStore<double> ps;
    Rng rng(43);
    const BlockRef blk = register_block(ps, rng, "blk", 8, 2, 2.0);

    std::mt19937_64 gen(44);
    const TensorD x = oracles::random_tensor(gen, {8, 6, 6});

    Graph<double> g;
    const auto bound = ps.bind(g, false);
    std::vector<Id> rows;
    apply_attention(g, bound, blk, g.leaf(x, false), 1e-6, 1e-12, &rows);
    REQUIRE(rows.size() == 2);
    for (const Id attn : rows) {
        const TensorD& m = g.value(attn);
        for (int r = 0; r < m.c(); ++r) {
            double s = 0.0;
            for (int cidx = 0; cidx < m.h(); ++cidx) s += m.at(r, cidx, 0);
            CHECK(std::abs(s - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("transformer block rejects channels not divisible by heads") {
    ParamStore<double> ps;
    Rng rng(45);
    CHECK_THROWS_AS(register_block(ps, rng, "bad", 16, 3, 2.66), std::invalid_argument);
}

TEST_CASE("transformer block gradient passes finite differences") {
    ParamStore<double> ps;
    Rng rng(46);
    const BlockRef blk = register_block(ps, rng, "blk", 4, 1, 2.0);

    std::mt19937_64 gen(47);
    const TensorD x = oracles::random_tensor(gen, {4, 5, 4});
    const TensorD probe = oracles::random_tensor(gen, {4, 5, 4});

    // gradient w.r.t. the input
    const double err_x = finite_diff_check_graph<double>(
        {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            const auto bound = ps.bind(g, false);
            return g.sum(g.mul(apply_block(g, bound, blk, ids[0]), g.leaf(probe, false)));
        },
        1e-6);
    CHECK(err_x < 1e-4);

    // gradient w.r.t. every block parameter
    std::vector<TensorD> params;
    for (int i = 0; i < ps.count(); ++i) params.push_back(ps.tensor(i));
    // the leaf ids align with store indices, so they act directly as the binding
    const double err_p = finite_diff_check_graph<double>(
        params, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(apply_block(g, ids, blk, g.leaf(x, false)), g.leaf(probe, false)));
        },
        1e-6);
    CHECK(err_p < 1e-4);
}

TEST_CASE("PEB keeps the feature shape and sees both inputs") {
    ParamStore<double> ps;
    Rng rng(48);
    const PebRef peb = register_peb(ps, rng, "peb", 5, 1, 2.66);

    std::mt19937_64 gen(49);
    const TensorD feat = oracles::random_tensor(gen, {5, 6, 7});
    const TensorD prompt = oracles::random_tensor(gen, {5, 6, 7});
    const TensorD probe = oracles::random_tensor(gen, {5, 6, 7});

    Graph<double> g;
    const auto bound = ps.bind(g, false);
    const Id out = apply_peb(g, bound, peb, g.leaf(feat, false), g.leaf(prompt, false));
    CHECK(g.value(out).shape() == feat.shape());

    // both inputs receive gradient
    Graph<double> g2;
    const auto bound2 = ps.bind(g2, false);
    const Id fi = g2.leaf(feat, true);
    const Id pi = g2.leaf(prompt, true);
    g2.backward(g2.sum(g2.mul(apply_peb(g2, bound2, peb, fi, pi), g2.leaf(probe, false))));
    double gf = 0.0, gp = 0.0;
    for (std::size_t i = 0; i < feat.size(); ++i) {
        gf += std::abs(g2.grad(fi)[i]);
        gp += std::abs(g2.grad(pi)[i]);
    }
    CHECK(gf > 1e-6);
    CHECK(gp > 1e-6);

    const double err = finite_diff_check_graph<double>(
        {feat, prompt}, [&](Graph<double>& g3, const std::vector<Id>& ids) {
            const auto b3 = ps.bind(g3, false);
            return g3.sum(g3.mul(apply_peb(g3, b3, peb, ids[0], ids[1]), g3.leaf(probe, false)));
        },
        1e-6);
    CHECK(err < 1e-4);
}

TEST_CASE("PEB with zero prompt and identity block depends on the feature alone") {
    ParamStore<double> ps;
    Rng rng(50);
    const PebRef peb = register_peb(ps, rng, "peb", 4, 1, 2.0);
    zero_conv(ps, peb.block.attn_out);
    zero_conv(ps, peb.block.ffn_out);

    std::mt19937_64 gen(51);
    const TensorD feat = oracles::random_tensor(gen, {4, 5, 5});
    const TensorD zero({4, 5, 5}, 0.0);

    Graph<double> g;
    const auto bound = ps.bind(g, false);
    const Id out = apply_peb(g, bound, peb, g.leaf(feat, false), g.leaf(zero, false));

    // expected: the out-projection applied to the feature half of the concat
    TensorD cat({8, 5, 5}, 0.0);
    std::copy(feat.data(), feat.data() + feat.size(), cat.data());
    const TensorD expect =
        oracles::conv2d(cat, ps.tensor(peb.out.w), ps.tensor(peb.out.b), 1, 1, 0);
    CHECK(max_abs_diff(g.value(out), expect) < 1e-12);
}
