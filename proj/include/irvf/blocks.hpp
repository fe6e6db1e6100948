#pragma once

// Transformer building blocks: channel attention with learnable temperature,
// gated feed-forward, pre-norm residual wiring, and the prompt machinery
// (weight prediction, prompt generation, prompt embedding block).

#include <string>
#include <vector>

#include "irvf/graph.hpp"
#include "irvf/params.hpp"
#include "irvf/rng.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

// Indices into a ParamStore for one conv layer.
struct ConvRef {
    int w = -1;
    int b = -1;
    int k = 1;
    int stride = 1;
    int pad = 0;
    bool depthwise = false;
};

struct BlockRef {
    int ln1_gamma = -1;
    ConvRef qkv;      // 1x1, C -> 3C
    ConvRef qkv_dw;   // depthwise 3x3 on 3C
    int temperature = -1;  // (heads,1,1)
    ConvRef attn_out;      // 1x1, C -> C (zero => attention sublayer is a no-op)
    int ln2_gamma = -1;
    ConvRef ffn_expand;  // 1x1, C -> 2h
    ConvRef ffn_dw;      // depthwise 3x3 on 2h
    ConvRef ffn_out;     // 1x1, h -> C (zero => feed-forward sublayer is a no-op)
    int heads = 1;
    int hidden = 1;
};

struct PebRef {
    BlockRef block;  // runs at 2C
    ConvRef out;     // 1x1, 2C -> C
};

struct WeightNetRef {
    ConvRef conv;    // 3x3, C -> C
    ConvRef linear;  // 1x1 on (C,1,1), C -> C
};

struct PromptPoolRef {
    int pool = -1;  // (C, pool_size, pool_size)
    WeightNetRef weight_net;
    ConvRef fuse1;  // 1x1, C -> C
    ConvRef fuse2;  // 3x3, C -> C
};

namespace detail {

template <typename T>
ConvRef register_conv(ParamStore<T>& ps, Rng& rng, const std::string& name, int out_c, int in_c,
                      int k, int stride, int pad, bool zero_init = false) {
    ConvRef r;
    r.k = k;
    r.stride = stride;
    r.pad = pad;
    Tensor<T> w({out_c, in_c, k * k});
    Tensor<T> b({out_c, 1, 1});
    if (!zero_init) {
        const double bound = std::sqrt(1.0 / (static_cast<double>(in_c) * k * k));
        rng.fill_uniform(w, -bound, bound);
        rng.fill_uniform(b, -bound, bound);
    }
    r.w = ps.add(name + ".w", std::move(w));
    r.b = ps.add(name + ".b", std::move(b));
    return r;
}

template <typename T>
ConvRef register_dwconv(ParamStore<T>& ps, Rng& rng, const std::string& name, int c, int k, int pad) {
    ConvRef r;
    r.k = k;
    r.pad = pad;
    r.depthwise = true;
    Tensor<T> w({c, 1, k * k});
    Tensor<T> b({c, 1, 1});
    const double bound = std::sqrt(1.0 / (k * k));
    rng.fill_uniform(w, -bound, bound);
    rng.fill_uniform(b, -bound, bound);
    r.w = ps.add(name + ".w", std::move(w));
    r.b = ps.add(name + ".b", std::move(b));
    return r;
}

}  // namespace detail

template <typename T>
BlockRef register_block(ParamStore<T>& ps, Rng& rng, const std::string& name, int c, int heads,
                        double ffn_expansion) {
    if (heads < 1 || c % heads != 0) {
        throw std::invalid_argument("transformer block '" + name + "': channels " + std::to_string(c) +
                                    " not divisible by heads " + std::to_string(heads));
    }
    BlockRef b;
    b.heads = heads;
    b.hidden = std::max(1, static_cast<int>(c * ffn_expansion));
    b.ln1_gamma = ps.add(name + ".ln1.gamma", Tensor<T>({c, 1, 1}, T(1)));
    b.qkv = detail::register_conv(ps, rng, name + ".attn.qkv", 3 * c, c, 1, 1, 0);
    b.qkv_dw = detail::register_dwconv(ps, rng, name + ".attn.qkv_dw", 3 * c, 3, 1);
    b.temperature = ps.add(name + ".attn.temperature", Tensor<T>({heads, 1, 1}, T(1)));
    b.attn_out = detail::register_conv(ps, rng, name + ".attn.out", c, c, 1, 1, 0);
    b.ln2_gamma = ps.add(name + ".ln2.gamma", Tensor<T>({c, 1, 1}, T(1)));
    b.ffn_expand = detail::register_conv(ps, rng, name + ".ffn.expand", 2 * b.hidden, c, 1, 1, 0);
    b.ffn_dw = detail::register_dwconv(ps, rng, name + ".ffn.dw", 2 * b.hidden, 3, 1);
    b.ffn_out = detail::register_conv(ps, rng, name + ".ffn.out", c, b.hidden, 1, 1, 0);
    return b;
}

template <typename T>
PebRef register_peb(ParamStore<T>& ps, Rng& rng, const std::string& name, int c, int heads,
                    double ffn_expansion) {
    PebRef p;
    p.block = register_block(ps, rng, name + ".block", 2 * c, heads, ffn_expansion);
    p.out = detail::register_conv(ps, rng, name + ".out", c, 2 * c, 1, 1, 0);
    return p;
}

template <typename T>
PromptPoolRef register_prompt_pool(ParamStore<T>& ps, Rng& rng, const std::string& name, int c,
                                   int pool_size) {
    PromptPoolRef r;
    Tensor<T> pool({c, pool_size, pool_size});
    rng.fill_uniform(pool, -0.02, 0.02);
    r.pool = ps.add(name + ".pool", std::move(pool));
    r.weight_net.conv = detail::register_conv(ps, rng, name + ".wnet.conv", c, c, 3, 1, 1);
    r.weight_net.linear = detail::register_conv(ps, rng, name + ".wnet.linear", c, c, 1, 1, 0);
    r.fuse1 = detail::register_conv(ps, rng, name + ".fuse1", c, c, 1, 1, 0);
    r.fuse2 = detail::register_conv(ps, rng, name + ".fuse2", c, c, 3, 1, 1);
    return r;
}

// ---------------------------------------------------------------------------
// Forward application. `bound` maps ParamStore indices to graph leaves.
// ---------------------------------------------------------------------------

template <typename T>
using BoundIds = std::vector<typename Graph<T>::Id>;

template <typename T>
typename Graph<T>::Id apply_conv(Graph<T>& g, const BoundIds<T>& bound, const ConvRef& c,
                                 typename Graph<T>::Id x) {
    if (c.depthwise) return g.dwconv(x, bound[c.w], bound[c.b], c.k, c.pad);
    return g.conv2d(x, bound[c.w], bound[c.b], c.k, c.stride, c.pad);
}

template <typename T>
typename Graph<T>::Id apply_attention(Graph<T>& g, const BoundIds<T>& bound, const BlockRef& b,
                                      typename Graph<T>::Id x, T ln_eps, T l2_eps,
                                      std::vector<typename Graph<T>::Id>* attn_rows = nullptr) {
    const int c = g.value(x).c();
    const auto y = g.layer_norm(x, bound[b.ln1_gamma], ln_eps);
    auto qkv = apply_conv(g, bound, b.qkv, y);
    qkv = apply_conv(g, bound, b.qkv_dw, qkv);
    const auto q = g.slice_channels(qkv, 0, c);
    const auto k = g.slice_channels(qkv, c, c);
    const auto v = g.slice_channels(qkv, 2 * c, c);

    const int ch = c / b.heads;
    typename Graph<T>::Id attended = Graph<T>::kNone;
    for (int h = 0; h < b.heads; ++h) {
        const auto qh = b.heads == 1 ? q : g.slice_channels(q, h * ch, ch);
        const auto kh = b.heads == 1 ? k : g.slice_channels(k, h * ch, ch);
        const auto vh = b.heads == 1 ? v : g.slice_channels(v, h * ch, ch);
        const auto qn = g.l2norm_spatial(qh, l2_eps);
        const auto kn = g.l2norm_spatial(kh, l2_eps);
        auto scores = g.gram(qn, kn);
        const auto tau = b.heads == 1 ? bound[b.temperature]
                                      : g.slice_channels(bound[b.temperature], h, 1);
        scores = g.mul(scores, tau);
        const auto attn = g.plane_softmax(scores);
        if (attn_rows) attn_rows->push_back(attn);
        const auto oh = g.mixdown(attn, vh);
        attended = (attended == Graph<T>::kNone) ? oh : g.concat_channels(attended, oh);
    }
    const auto out = apply_conv(g, bound, b.attn_out, attended);
    return g.add(x, out);
}

template <typename T>
typename Graph<T>::Id apply_ffn(Graph<T>& g, const BoundIds<T>& bound, const BlockRef& b,
                                typename Graph<T>::Id x, T ln_eps) {
    const auto y = g.layer_norm(x, bound[b.ln2_gamma], ln_eps);
    auto e = apply_conv(g, bound, b.ffn_expand, y);
    e = apply_conv(g, bound, b.ffn_dw, e);
    const auto a = g.slice_channels(e, 0, b.hidden);
    const auto gate = g.slice_channels(e, b.hidden, b.hidden);
    const auto mixed = g.mul(g.gelu(a), gate);
    const auto out = apply_conv(g, bound, b.ffn_out, mixed);
    return g.add(x, out);
}

template <typename T>
typename Graph<T>::Id apply_block(Graph<T>& g, const BoundIds<T>& bound, const BlockRef& b,
                                  typename Graph<T>::Id x, T ln_eps = T(1e-6), T l2_eps = T(1e-12)) {
    return apply_ffn(g, bound, b, apply_attention(g, bound, b, x, ln_eps, l2_eps), ln_eps);
}

// PEB: concatenate feature and prompt, run one block at 2C, project back to C.
template <typename T>
typename Graph<T>::Id apply_peb(Graph<T>& g, const BoundIds<T>& bound, const PebRef& p,
                                typename Graph<T>::Id feature, typename Graph<T>::Id prompt,
                                T ln_eps = T(1e-6)) {
    const auto cat = g.concat_channels(feature, prompt);
    const auto mixed = apply_block(g, bound, p.block, cat, ln_eps);
    return apply_conv(g, bound, p.out, mixed);
}

// Weight prediction: conv3x3 -> GAP -> linear -> channel softmax, broadcast
// back over space so every position of channel c carries the same weight.
template <typename T>
typename Graph<T>::Id predict_prompt_weights_g(Graph<T>& g, const BoundIds<T>& bound,
                                               const PromptPoolRef& pp, typename Graph<T>::Id diff) {
    const auto feat = apply_conv(g, bound, pp.weight_net.conv, diff);
    const auto pooled = g.global_average_pool(feat);
    const auto logits = apply_conv(g, bound, pp.weight_net.linear, pooled);
    const auto weights = g.softmax_channels(logits);
    return g.broadcast_spatial(weights, g.value(diff).h(), g.value(diff).w());
}

// Prompt generation: resize the pool to the working resolution, weight it,
// then 1x1 and 3x3 convs.
template <typename T>
typename Graph<T>::Id generate_prompt_g(Graph<T>& g, const BoundIds<T>& bound,
                                        const PromptPoolRef& pp, typename Graph<T>::Id weights,
                                        int target_h, int target_w) {
    const auto resized = g.bilinear_resize(bound[pp.pool], target_h, target_w);
    const auto weighted = g.mul(resized, weights);
    const auto a = apply_conv(g, bound, pp.fuse1, weighted);
    return apply_conv(g, bound, pp.fuse2, a);
}

// Full PGM pass over an already-encoded pair.
template <typename T>
typename Graph<T>::Id apply_pgm(Graph<T>& g, const BoundIds<T>& bound, const PromptPoolRef& pp,
                                typename Graph<T>::Id feat_a, typename Graph<T>::Id feat_b) {
    const auto diff = g.sub(feat_a, feat_b);
    const auto weights = predict_prompt_weights_g(g, bound, pp, diff);
    return generate_prompt_g(g, bound, pp, weights, g.value(diff).h(), g.value(diff).w());
}

}  // namespace irvf
