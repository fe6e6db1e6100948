#include "irvf/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "irvf/blocks.hpp"
#include "irvf/gradcheck.hpp"
#include "irvf/haze.hpp"
#include "irvf/losses.hpp"
#include "irvf/metrics.hpp"
#include "irvf/model.hpp"
#include "irvf/scene.hpp"
#include "irvf/testing/oracles.hpp"

namespace irvf::selfcheck {

namespace {

using Id = Graph<double>::Id;
using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Worst {
    double err = 0.0;
    std::string where;

    void update(const std::string& name, double e) {
        if (e > err) {
            err = e;
            where = name;
        }
    }
};

// One full sweep over the layer types plus the training losses.
void gradient_sweep(std::uint64_t seed, Worst& worst) {
    std::mt19937_64 gen(seed);
    auto rnd = [&](Shape s, double lo = -1.0, double hi = 1.0) {
        return oracles::random_tensor(gen, s, lo, hi);
    };
    // probe magnitudes stay in [0.5, 1.5] so no gradient path is suppressed
    // into the harness's denominator floor by an unlucky near-zero weight
    auto rnd_probe = [&](Shape s) {
        TensorD t = oracles::random_tensor(gen, s, 0.5, 1.5);
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (gen() & 1u) t[i] = -t[i];
        }
        return t;
    };
    const double eps_linear = 1e-3;  // exact for (piecewise) linear objectives
    const double eps_smooth = 3e-5;  // noise/truncation balance for curved ones

    auto probe_check = [&](const std::string& name, std::vector<TensorD> inputs, auto make,
                           double eps) {
        const double err = finite_diff_check_graph<double>(
            inputs,
            [&](Graph<double>& g, const std::vector<Id>& ids) { return make(g, ids); }, eps);
        worst.update(name, err);
    };

    // conv layers
    {
        const TensorD x = rnd({2, 6, 6});
        const TensorD w = rnd({3, 2, 9}, -0.5, 0.5);
        const TensorD b = rnd({3, 1, 1}, -0.2, 0.2);
        const TensorD probe = rnd_probe({3, 6, 6});
        probe_check("conv3x3", {x, w, b}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.conv2d(ids[0], ids[1], ids[2], 3, 1, 1), g.leaf(probe, false)));
        }, eps_linear);

        const TensorD w1 = rnd({4, 2, 1}, -0.5, 0.5);
        const TensorD probe1 = rnd_probe({4, 3, 3});
        probe_check("conv1x1_stride2", {x, w1}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.conv2d(ids[0], ids[1], Graph<double>::kNone, 1, 2, 0),
                               g.leaf(probe1, false)));
        }, eps_linear);

        const TensorD dw = rnd({2, 1, 9}, -0.5, 0.5);
        const TensorD db = rnd({2, 1, 1}, -0.2, 0.2);
        const TensorD probed = rnd_probe({2, 6, 6});
        probe_check("depthwise3x3", {x, dw, db}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.dwconv(ids[0], ids[1], ids[2], 3, 1), g.leaf(probed, false)));
        }, eps_linear);
    }

    // softmax / pooling / resize / norms
    {
        const TensorD x = rnd({4, 5, 6});
        const TensorD probe = rnd_probe({4, 5, 6});
        probe_check("softmax_channels", {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.softmax_channels(ids[0]), g.leaf(probe, false)));
        }, eps_smooth);

        const TensorD pg = rnd_probe({4, 1, 1});
        probe_check("global_average_pool", {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.global_average_pool(ids[0]), g.leaf(pg, false)));
        }, eps_linear);

        const TensorD pc = rnd_probe({1, 5, 6});
        probe_check("channel_average_pool", {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.channel_mean(ids[0]), g.leaf(pc, false)));
        }, eps_linear);

        const TensorD pr = rnd_probe({4, 8, 9});
        probe_check("bilinear_resize", {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.bilinear_resize(ids[0], 8, 9), g.leaf(pr, false)));
        }, eps_linear);

        const TensorD gamma = rnd({4, 1, 1}, 0.5, 1.5);
        probe_check("layer_norm", {x, gamma}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.layer_norm(ids[0], ids[1], 1e-6), g.leaf(probe, false)));
        }, eps_smooth);

        probe_check("l2_normalize", {x}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.l2norm_spatial(ids[0], 1e-12), g.leaf(probe, false)));
        }, eps_smooth);
    }

    // attention and the gated feed-forward nonlinearity
    {
        const TensorD q = rnd({3, 4, 4});
        const TensorD k = rnd({3, 4, 4});
        const TensorD v = rnd({3, 4, 4});
        const TensorD tau = rnd({1, 1, 1}, 0.5, 1.5);
        const TensorD probe = rnd_probe({3, 4, 4});
        probe_check("channel_attention", {q, k, v, tau},
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        const Id qn = g.l2norm_spatial(ids[0], 1e-12);
                        const Id kn = g.l2norm_spatial(ids[1], 1e-12);
                        const Id attn = g.plane_softmax(g.mul(g.gram(qn, kn), ids[3]));
                        return g.sum(g.mul(g.mixdown(attn, ids[2]), g.leaf(probe, false)));
                    }, eps_smooth);

        const TensorD a = rnd({3, 4, 4});
        const TensorD b = rnd({3, 4, 4});
        probe_check("gelu_gate", {a, b}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.mul(g.gelu(ids[0]), ids[1]), g.leaf(probe, false)));
        }, eps_smooth);
    }

    // transformer block: input and full parameter set
    {
        ParamStore<double> ps;
        Rng prng(seed ^ 0x9e3779b97f4a7c15ull);
        const BlockRef blk = register_block(ps, prng, "blk", 4, 1, 2.0);
        const TensorD x = rnd({4, 5, 4});
        const TensorD probe = rnd_probe({4, 5, 4});
        probe_check("transformer_block_input", {x},
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        const auto bound = ps.bind(g, false);
                        return g.sum(g.mul(apply_block(g, bound, blk, ids[0]), g.leaf(probe, false)));
                    }, eps_smooth);

        std::vector<TensorD> params;
        for (int i = 0; i < ps.count(); ++i) params.push_back(ps.tensor(i));
        probe_check("transformer_block_params", params,
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        return g.sum(
                            g.mul(apply_block(g, ids, blk, g.leaf(x, false)), g.leaf(probe, false)));
                    }, eps_smooth);
    }

    // PEB and PGM wiring
    {
        ParamStore<double> ps;
        Rng prng(seed ^ 0x2545f4914f6cdd1dull);
        const PebRef peb = register_peb(ps, prng, "peb", 3, 1, 2.0);
        const PromptPoolRef pool = register_prompt_pool(ps, prng, "pgm", 3, 6);
        // O(1) pool values keep the finite-difference denominators healthy;
        // the tiny default init would push every gradient under the noise floor
        prng.fill_uniform(ps.tensor(pool.pool), -0.5, 0.5);
        const TensorD feat = rnd({3, 5, 5});
        const TensorD prompt = rnd({3, 5, 5});
        const TensorD probe = rnd_probe({3, 5, 5});
        probe_check("prompt_embed", {feat, prompt},
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        const auto bound = ps.bind(g, false);
                        return g.sum(
                            g.mul(apply_peb(g, bound, peb, ids[0], ids[1]), g.leaf(probe, false)));
                    }, eps_smooth);

        const TensorD fa = rnd({3, 5, 5});
        const TensorD fb = rnd({3, 5, 5});
        probe_check("prompt_generation", {fa, fb},
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        const auto bound = ps.bind(g, false);
                        return g.sum(
                            g.mul(apply_pgm(g, bound, pool, ids[0], ids[1]), g.leaf(probe, false)));
                    }, eps_smooth);
    }

    // haze blend and density estimation
    {
        const TensorD f_ir = rnd({3, 5, 5});
        const TensorD f_vi = rnd({3, 5, 5});
        const TensorD h = rnd({1, 5, 5}, 0.1, 0.9);
        const TensorD probe = rnd_probe({3, 5, 5});
        probe_check("haze_guided_blend", {f_ir, f_vi, h},
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        return g.sum(g.mul(Model<double>::haze_guided_blend(g, ids[0], ids[1], ids[2]),
                                           g.leaf(probe, false)));
                    }, eps_linear);

        // features in a narrow band keep the transmission clamp inactive
        const TensorD feats = rnd({2, 8, 8}, 0.45, 0.55);
        const TensorD ph = rnd_probe({1, 8, 8});
        HdeOptions opts;
        opts.window = 3;
        opts.gf_radius = 2;
        // 3e-6 balances dark-channel tie avoidance against difference noise
        probe_check("haze_density", {feats}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            const auto est = haze_density_g(g, ids[0], opts);
            return g.sum(g.mul(est.density, g.leaf(ph, false)));
        }, 3e-6);

        const TensorD guide = rnd({1, 7, 7}, 0.2, 0.8);
        const TensorD input = rnd({1, 7, 7}, 0.2, 0.8);
        const TensorD pgf = rnd_probe({1, 7, 7});
        probe_check("guided_filter", {guide, input},
                    [&](Graph<double>& g, const std::vector<Id>& ids) {
                        return g.sum(g.mul(guided_filter_g(g, ids[0], ids[1], 2, 1e-4),
                                           g.leaf(pgf, false)));
                    }, eps_smooth);

        const TensorD dark_in = rnd({3, 6, 6}, 0.0, 1.0);
        const TensorD pdc = rnd_probe({1, 6, 6});
        probe_check("dark_channel", {dark_in}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.dark_channel(ids[0], 3), g.leaf(pdc, false)));
        }, 1e-6);

        const TensorD sx = rnd({3, 6, 6});
        const TensorD psb = rnd_probe({3, 6, 6});
        probe_check("sobel_magnitude", {sx}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return g.sum(g.mul(g.sobel_mag(ids[0]), g.leaf(psb, false)));
        }, 1e-6);
    }

    // training losses: piecewise linear, checked on kink-separated ramps with
    // a step that stays inside one linear piece
    {
        const double off = 0.01 * static_cast<double>(gen() % 8);
        TensorD fused({3, 6, 6}), dehazed({3, 6, 6}), gt({3, 6, 6});
        const TensorD ir({1, 6, 6}, 0.1 + off * 0.1);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < 6; ++y) {
                for (int x = 0; x < 6; ++x) {
                    fused.at(c, y, x) = 0.6 + off + 0.02 * (x + 2 * y) + 0.003 * c;
                    gt.at(c, y, x) = 0.3 + 0.5 * off + 0.01 * (x + 2 * y) + 0.002 * c;
                    dehazed.at(c, y, x) = gt.at(c, y, x) + 0.1 + 0.005 * x;
                }
            }
        }
        const double eps_pl = 1e-3;
        probe_check("l1_restoration", {dehazed}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return l1_restoration_g(g, ids[0], g.leaf(gt, false));
        }, eps_pl);
        probe_check("gradient_loss", {fused}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return gradient_loss_g(g, ids[0], g.leaf(ir, false), g.leaf(gt, false));
        }, eps_pl);
        probe_check("intensity_loss", {fused}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return intensity_loss_g(g, ids[0], g.leaf(ir, false), g.leaf(gt, false));
        }, eps_pl);
        probe_check("total_loss", {fused, dehazed}, [&](Graph<double>& g, const std::vector<Id>& ids) {
            return total_loss_g(g, ids[0], ids[1], g.leaf(ir, false), g.leaf(gt, false),
                                LossConfig{1.5})
                .total;
        }, eps_pl);
    }
}

double histogram_entropy(const TensorD& img) {
    std::map<int, double> counts;
    for (std::size_t i = 0; i < img.size(); ++i) counts[static_cast<int>(img[i])] += 1.0;
    double h = 0.0;
    for (const auto& [level, c] : counts) {
        const double p = c / static_cast<double>(img.size());
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

CheckResult gradient_correctness(int seeds, double time_budget_s) {
    const auto t0 = Clock::now();
    Worst worst;
    for (int s = 0; s < seeds; ++s) gradient_sweep(1000 + static_cast<std::uint64_t>(s), worst);
    const double secs = elapsed(t0);

    CheckResult r;
    r.name = "gradient correctness";
    r.seconds = secs;
    std::ostringstream d;
    d << "max rel err " << worst.err << " (" << worst.where << "), " << seeds << " seeds, "
      << secs << "s";
    r.detail = d.str();
    r.pass = worst.err < 1e-4 && secs < time_budget_s;
    return r;
}

CheckResult tensor_op_oracles(int instances) {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(2024);
    double worst = 0.0;
    std::string where = "none";
    auto track = [&](const char* name, double err) {
        if (err > worst) {
            worst = err;
            where = name;
        }
    };

    for (int i = 0; i < instances; ++i) {
        const int c = 1 + static_cast<int>(gen() % 8);
        const int h = 4 + static_cast<int>(gen() % 29);
        const int w = 4 + static_cast<int>(gen() % 29);
        const TensorD x = oracles::random_tensor(gen, {c, h, w}, 0.0, 1.0);

        {
            const int oc = 1 + static_cast<int>(gen() % 4);
            const int k = (gen() % 2) ? 3 : 1;
            const int stride = 1 + static_cast<int>(gen() % 2);
            const int pad = k == 3 ? static_cast<int>(gen() % 2) : 0;
            const TensorD kw = oracles::random_tensor(gen, {oc, c, k * k});
            const TensorD kb = oracles::random_tensor(gen, {oc, 1, 1});
            const TensorD got = kernels::conv2d_fwd(x, kw, kb, k, stride, pad);
            track("conv2d", max_abs_diff(got, oracles::conv2d(x, kw, kb, k, stride, pad)));
        }
        track("softmax", max_abs_diff(kernels::softmax_channels_fwd(x), oracles::softmax_channels(x)));
        {
            const TensorD got = kernels::gap_fwd(x);
            const auto want = oracles::gap(x);
            double err = 0.0;
            for (int cc = 0; cc < c; ++cc) {
                err = std::max(err, std::abs(got[static_cast<std::size_t>(cc)] -
                                             want[static_cast<std::size_t>(cc)]));
            }
            track("global_average_pool", err);
            track("channel_average_pool",
                  max_abs_diff(kernels::channel_mean_fwd(x), oracles::channel_mean(x)));
        }
        {
            const int oh = 1 + static_cast<int>(gen() % 32);
            const int ow = 1 + static_cast<int>(gen() % 32);
            track("bilinear_resize",
                  max_abs_diff(kernels::bilinear_resize_fwd(x, oh, ow),
                               oracles::bilinear_resize(x, oh, ow)));
        }
        {
            const int window = 1 + 2 * static_cast<int>(gen() % 4);
            track("dark_channel",
                  max_abs_diff(kernels::dark_channel_fwd(x, window, nullptr),
                               oracles::dark_channel(x, window)));
        }
        {
            const TensorD guide = oracles::random_tensor(gen, {1, h, w}, 0.0, 1.0);
            const TensorD input = oracles::random_tensor(gen, {1, h, w}, 0.0, 1.0);
            const int radius = 1 + static_cast<int>(gen() % 4);
            track("guided_filter", max_abs_diff(guided_filter(guide, input, radius, 1e-4),
                                                oracles::guided_filter(guide, input, radius, 1e-4)));
        }
    }

    CheckResult r;
    r.name = "tensor-op oracle equivalence";
    r.seconds = elapsed(t0);
    std::ostringstream d;
    d << instances << " instances per op, max abs diff " << worst << " (" << where << ")";
    r.detail = d.str();
    r.pass = worst < 1e-9;
    return r;
}

CheckResult haze_physics_identities() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::ostringstream detail;

    std::mt19937_64 gen(77);
    const TensorD clear = oracles::random_tensor(gen, {3, 24, 24}, 0.0, 1.0);
    HazeParams<double> hp;
    hp.depth = oracles::random_tensor(gen, {1, 24, 24}, 0.0, 3.0);
    hp.atmospheric_light = {0.9, 0.8, 0.85};

    hp.beta = 0.0;
    if (!(synthesize_haze(clear, hp) == clear)) {
        pass = false;
        detail << "beta=0 not bit-identical; ";
    }

    hp.beta = 1.0;
    hp.depth = TensorD({1, 24, 24}, 1e9);
    const TensorD airlight = synthesize_haze(clear, hp);
    double amax = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < airlight.shape().plane(); ++i) {
            amax = std::max(amax, std::abs(airlight.plane(c)[i] -
                                           hp.atmospheric_light[static_cast<std::size_t>(c)]));
        }
    }
    if (amax > 1e-9) {
        pass = false;
        detail << "pure-airlight limit off by " << amax << "; ";
    }

    const std::vector<double> a{0.8, 0.8, 0.8};
    const TensorD t_zero = transmission_map(TensorD({3, 16, 16}, 0.0), a, 0.95, 3);
    const TensorD t_air = transmission_map(TensorD({3, 16, 16}, 0.8), a, 0.95, 3);
    double terr = 0.0;
    for (std::size_t i = 0; i < t_zero.size(); ++i) {
        terr = std::max(terr, std::abs(t_zero[i] - 1.0));
        terr = std::max(terr, std::abs(t_air[i] - 0.05));
    }
    if (terr > 1e-9) {
        pass = false;
        detail << "transmission closed forms off by " << terr << "; ";
    }

    CheckResult r;
    r.name = "haze physics identities";
    r.seconds = elapsed(t0);
    r.detail = pass ? "beta=0 bit-exact, airlight limit, T forms within 1e-9" : detail.str();
    r.pass = pass;
    return r;
}

CheckResult hde_fidelity(int scenes) {
    const auto t0 = Clock::now();
    Rng rng(2025);
    double worst_r = 1.0;
    double worst_t = 0.0;
    for (int i = 0; i < scenes; ++i) {
        const Scene s = make_scene(rng, 128, 128, depth_family(i));
        const auto ts = Clock::now();
        const auto est = haze_density(s.hazy, HdeOptions::image_resolution());
        worst_t = std::max(worst_t, elapsed(ts));
        worst_r = std::min(worst_r, pearson(est.density, s.haze_gt));
    }
    CheckResult r;
    r.name = "HDE fidelity";
    r.seconds = elapsed(t0);
    std::ostringstream d;
    d << scenes << " scenes at 3x128x128, min Pearson r " << worst_r << ", slowest scene "
      << worst_t << "s";
    r.detail = d.str();
    r.pass = worst_r >= 0.8 && worst_t < 1.0;
    return r;
}

CheckResult blend_identities() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(88);
    const TensorD f_ir = oracles::random_tensor(gen, {6, 9, 9});
    const TensorD f_vi = oracles::random_tensor(gen, {6, 9, 9});

    auto blend = [&](double h) {
        Graph<double> g;
        return g.value(Model<double>::haze_guided_blend(
            g, g.leaf(f_ir, false), g.leaf(f_vi, false), g.leaf(TensorD({1, 9, 9}, h), false)));
    };
    const TensorD b0 = blend(0.0);
    const TensorD b1 = blend(1.0);
    const TensorD bh = blend(0.5);

    bool pass = true;
    for (std::size_t i = 0; i < f_vi.size(); ++i) {
        if (b0[i] != 2.0 * f_vi[i]) pass = false;
        if (b1[i] != f_ir[i] + f_vi[i]) pass = false;
        if (bh[i] != 0.5 * f_ir[i] + 1.5 * f_vi[i]) pass = false;
    }
    CheckResult r;
    r.name = "blend identities";
    r.seconds = elapsed(t0);
    r.detail = "H=0 -> 2F_vi, H=1 -> F_ir_hat+F_vi, H=0.5 -> 0.5F_ir_hat+1.5F_vi, exact";
    r.pass = pass;
    return r;
}

CheckResult metric_sanity() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::ostringstream detail;

    std::mt19937_64 gen(99);
    TensorD f({1, 24, 24});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(gen() % 256);

    const double abf_same = q_abf(f, f, f);
    if (std::abs(abf_same - 1.0) > 1e-6) {
        pass = false;
        detail << "q_abf(F,F,F)=" << abf_same << "; ";
    }
    if (q_sf(TensorD({1, 16, 16}, 0.5)) != 0.0) {
        pass = false;
        detail << "q_sf(const)!=0; ";
    }

    const int n = 16;
    TensorD a({1, n, n}), b({1, n, n}), sum({1, n, n});
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            a.at(0, y, x) = (x % 2) ? 1.0 : -1.0;
            b.at(0, y, x) = (y % 2) ? 1.0 : -1.0;
            sum.at(0, y, x) = a.at(0, y, x) + b.at(0, y, x);
        }
    }
    const double scd = q_scd(sum, a, b);
    if (std::abs(scd - 2.0) > 1e-9) {
        pass = false;
        detail << "q_scd(A+B,A,B)=" << scd << "; ";
    }

    const double mi = q_mi(f, f, f);
    const double want = 2.0 * histogram_entropy(f);
    if (std::abs(mi - want) > 1e-9) {
        pass = false;
        detail << "q_mi vs entropy oracle off by " << std::abs(mi - want) << "; ";
    }

    CheckResult r;
    r.name = "metric sanity";
    r.seconds = elapsed(t0);
    r.detail = pass ? "q_abf=1 on identity, q_sf(const)=0, q_scd(A+B)=2, q_mi matches entropy"
                    : detail.str();
    r.pass = pass;
    return r;
}

std::vector<CheckResult> run_selftest() {
    std::vector<CheckResult> out;
    out.push_back(gradient_correctness());
    out.push_back(tensor_op_oracles());
    out.push_back(haze_physics_identities());
    out.push_back(hde_fidelity());
    out.push_back(blend_identities());
    out.push_back(metric_sanity());
    return out;
}

bool report(const std::vector<CheckResult>& results) {
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all &= r.pass;
    }
    return all;
}

}  // namespace irvf::selfcheck
