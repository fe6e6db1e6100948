#pragma once

// Reverse-mode autodiff tape. Ops execute eagerly via the forward kernels and
// record a backward closure; creation order is a topological order, so
// backward() is a single reverse sweep. Tensors are immutable once recorded.

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "irvf/kernels.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

template <typename T>
class Graph {
public:
    using Id = std::int32_t;
    static constexpr Id kNone = -1;

    Id leaf(Tensor<T> v, bool requires_grad = false) {
        return push(std::move(v), requires_grad, {});
    }

    const Tensor<T>& value(Id id) const { return nodes_[check(id)].value; }
    T scalar(Id id) const {
        const Tensor<T>& v = value(id);
        if (v.size() != 1) throw std::invalid_argument("scalar: node is not a scalar");
        return v[0];
    }

    bool has_grad(Id id) const { return !nodes_[check(id)].grad.empty(); }

    const Tensor<T>& grad(Id id) const {
        const Node& n = nodes_[check(id)];
        if (n.grad.empty()) {
            static thread_local Tensor<T> zero;
            zero = Tensor<T>(n.value.shape());
            return zero;
        }
        return n.grad;
    }

    std::size_t node_count() const { return nodes_.size(); }

    // -- elementwise ---------------------------------------------------------

    Id add(Id a, Id b) { return binary_bcast(a, b, /*sub=*/false); }
    Id sub(Id a, Id b) { return binary_bcast(a, b, /*sub=*/true); }

    Id mul(Id a, Id b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        const BMode mode = bcast_mode(av.shape(), bv.shape(), "mul");
        Tensor<T> y(av.shape());
        for_bcast(av.shape(), bv.shape(), mode, [&](std::size_t i, std::size_t j) { y[i] = av[i] * bv[j]; });
        return push(std::move(y), rg(a) || rg(b), [this, a, b, mode](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av2 = g.value(a);
            const Tensor<T>& bv2 = g.value(b);
            if (g.rg(a)) {
                Tensor<T>& da = g.acc(a);
                for_bcast(av2.shape(), bv2.shape(), mode,
                          [&](std::size_t i, std::size_t j) { da[i] += gy[i] * bv2[j]; });
            }
            if (g.rg(b)) {
                Tensor<T>& db = g.acc(b);
                for_bcast(av2.shape(), bv2.shape(), mode,
                          [&](std::size_t i, std::size_t j) { db[j] += gy[i] * av2[i]; });
            }
        });
    }

    Id div(Id a, Id b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        const BMode mode = bcast_mode(av.shape(), bv.shape(), "div");
        Tensor<T> y(av.shape());
        for_bcast(av.shape(), bv.shape(), mode, [&](std::size_t i, std::size_t j) { y[i] = av[i] / bv[j]; });
        return push(std::move(y), rg(a) || rg(b), [this, a, b, mode](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av2 = g.value(a);
            const Tensor<T>& bv2 = g.value(b);
            if (g.rg(a)) {
                Tensor<T>& da = g.acc(a);
                for_bcast(av2.shape(), bv2.shape(), mode,
                          [&](std::size_t i, std::size_t j) { da[i] += gy[i] / bv2[j]; });
            }
            if (g.rg(b)) {
                Tensor<T>& db = g.acc(b);
                for_bcast(av2.shape(), bv2.shape(), mode, [&](std::size_t i, std::size_t j) {
                    db[j] -= gy[i] * av2[i] / (bv2[j] * bv2[j]);
                });
            }
        });
    }

    Id add_scalar(Id a, T s) {
        Tensor<T> y = value(a);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += s;
        return push(std::move(y), rg(a), [a](Graph& g, Id self) {
            if (!g.rg(a)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& da = g.acc(a);
            for (std::size_t i = 0; i < gy.size(); ++i) da[i] += gy[i];
        });
    }

    Id mul_scalar(Id a, T s) {
        Tensor<T> y = value(a);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
        return push(std::move(y), rg(a), [a, s](Graph& g, Id self) {
            if (!g.rg(a)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& da = g.acc(a);
            for (std::size_t i = 0; i < gy.size(); ++i) da[i] += gy[i] * s;
        });
    }

    // |x|; subgradient 0 at the kink.
    Id abs(Id a) {
        Tensor<T> y = value(a);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(y[i]);
        return push(std::move(y), rg(a), [a](Graph& g, Id self) {
            if (!g.rg(a)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av = g.value(a);
            Tensor<T>& da = g.acc(a);
            for (std::size_t i = 0; i < gy.size(); ++i) {
                if (av[i] > T(0)) da[i] += gy[i];
                else if (av[i] < T(0)) da[i] -= gy[i];
            }
        });
    }

    // Elementwise max; ties route to the first argument.
    Id maximum(Id a, Id b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        const BMode mode = bcast_mode(av.shape(), bv.shape(), "maximum");
        Tensor<T> y(av.shape());
        for_bcast(av.shape(), bv.shape(), mode,
                  [&](std::size_t i, std::size_t j) { y[i] = av[i] >= bv[j] ? av[i] : bv[j]; });
        return push(std::move(y), rg(a) || rg(b), [this, a, b, mode](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av2 = g.value(a);
            const Tensor<T>& bv2 = g.value(b);
            if (g.rg(a)) {
                Tensor<T>& da = g.acc(a);
                for_bcast(av2.shape(), bv2.shape(), mode, [&](std::size_t i, std::size_t j) {
                    if (av2[i] >= bv2[j]) da[i] += gy[i];
                });
            }
            if (g.rg(b)) {
                Tensor<T>& db = g.acc(b);
                for_bcast(av2.shape(), bv2.shape(), mode, [&](std::size_t i, std::size_t j) {
                    if (!(av2[i] >= bv2[j])) db[j] += gy[i];
                });
            }
        });
    }

    // Gradient passes only strictly inside (lo, hi).
    Id clamp(Id a, T lo, T hi) {
        Tensor<T> y = value(a);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], lo, hi);
        return push(std::move(y), rg(a), [a, lo, hi](Graph& g, Id self) {
            if (!g.rg(a)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av = g.value(a);
            Tensor<T>& da = g.acc(a);
            for (std::size_t i = 0; i < gy.size(); ++i) {
                if (av[i] > lo && av[i] < hi) da[i] += gy[i];
            }
        });
    }

    Id gelu(Id a) {
        Tensor<T> y = value(a);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = kernels::gelu_scalar(y[i]);
        return push(std::move(y), rg(a), [a](Graph& g, Id self) {
            if (!g.rg(a)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av = g.value(a);
            Tensor<T>& da = g.acc(a);
            for (std::size_t i = 0; i < gy.size(); ++i) da[i] += gy[i] * kernels::gelu_grad_scalar(av[i]);
        });
    }

    // -- linear layers --------------------------------------------------------

    Id conv2d(Id x, Id w, Id b, int k, int stride, int pad) {
        static const Tensor<T> no_bias;
        Tensor<T> y = kernels::conv2d_fwd(value(x), value(w), b == kNone ? no_bias : value(b), k,
                                          stride, pad);
        const bool needs = rg(x) || rg(w) || (b != kNone && rg(b));
        return push(std::move(y), needs, [x, w, b, k, stride, pad](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            if (g.rg(x)) kernels::conv2d_bwd_input(gy, g.value(w), k, stride, pad, g.acc(x));
            if (g.rg(w) || (b != kNone && g.rg(b))) {
                Tensor<T>* db = (b != kNone && g.rg(b)) ? &g.acc(b) : nullptr;
                if (g.rg(w)) {
                    kernels::conv2d_bwd_weight(gy, g.value(x), k, stride, pad, g.acc(w), db);
                } else if (db) {
                    Tensor<T> scratch(g.value(w).shape());
                    kernels::conv2d_bwd_weight(gy, g.value(x), k, stride, pad, scratch, db);
                }
            }
        });
    }

    Id dwconv(Id x, Id w, Id b, int k, int pad) {
        static const Tensor<T> no_bias;
        Tensor<T> y = kernels::dwconv_fwd(value(x), value(w), b == kNone ? no_bias : value(b), k, pad);
        const bool needs = rg(x) || rg(w) || (b != kNone && rg(b));
        return push(std::move(y), needs, [x, w, b, k, pad](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>* dx = g.rg(x) ? &g.acc(x) : nullptr;
            Tensor<T>* dw = g.rg(w) ? &g.acc(w) : nullptr;
            Tensor<T>* db = (b != kNone && g.rg(b)) ? &g.acc(b) : nullptr;
            if (dx || dw || db) kernels::dwconv_bwd(gy, g.value(x), g.value(w), k, pad, dx, dw, db);
        });
    }

    // -- softmax / pooling / broadcast ---------------------------------------

    Id softmax_channels(Id x) {
        Tensor<T> y = kernels::softmax_channels_fwd(value(x));
        return push(std::move(y), rg(x), [x](Graph& g, Id self) {
            if (!g.rg(x)) return;
            kernels::softmax_channels_bwd(g.value(self), g.nodes_[self].grad, g.acc(x));
        });
    }

    Id plane_softmax(Id x) {
        Tensor<T> y = kernels::plane_softmax_fwd(value(x));
        return push(std::move(y), rg(x), [x](Graph& g, Id self) {
            if (!g.rg(x)) return;
            kernels::plane_softmax_bwd(g.value(self), g.nodes_[self].grad, g.acc(x));
        });
    }

    Id global_average_pool(Id x) {
        Tensor<T> y = kernels::gap_fwd(value(x));
        const std::size_t P = value(x).shape().plane();
        return push(std::move(y), rg(x), [x, P](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            const T inv = static_cast<T>(1.0 / static_cast<double>(P));
            for (int c = 0; c < dx.c(); ++c) {
                T* dp = dx.plane(c);
                const T gv = gy[static_cast<std::size_t>(c)] * inv;
                for (std::size_t i = 0; i < P; ++i) dp[i] += gv;
            }
        });
    }

    Id channel_mean(Id x) {
        Tensor<T> y = kernels::channel_mean_fwd(value(x));
        const int C = value(x).c();
        return push(std::move(y), rg(x), [x, C](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            const std::size_t P = gy.shape().plane();
            const T inv = static_cast<T>(1.0 / C);
            for (int c = 0; c < C; ++c) {
                T* dp = dx.plane(c);
                for (std::size_t i = 0; i < P; ++i) dp[i] += gy[i] * inv;
            }
        });
    }

    Id broadcast_channels(Id x, int c) {
        const Tensor<T>& xv = value(x);
        if (xv.c() != 1) throw std::invalid_argument("broadcast_channels: channel axis must be 1");
        Tensor<T> y({c, xv.h(), xv.w()});
        const std::size_t P = xv.shape().plane();
        for (int ch = 0; ch < c; ++ch) std::copy(xv.data(), xv.data() + P, y.plane(ch));
        return push(std::move(y), rg(x), [x, c](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            const std::size_t P = dx.shape().plane();
            for (int ch = 0; ch < c; ++ch) {
                const T* gp = gy.plane(ch);
                for (std::size_t i = 0; i < P; ++i) dx[i] += gp[i];
            }
        });
    }

    Id broadcast_spatial(Id x, int h, int w) {
        const Tensor<T>& xv = value(x);
        if (xv.h() != 1 || xv.w() != 1) {
            throw std::invalid_argument("broadcast_spatial: spatial axes must be 1x1");
        }
        Tensor<T> y({xv.c(), h, w});
        const std::size_t P = static_cast<std::size_t>(h) * w;
        for (int c = 0; c < xv.c(); ++c) {
            std::fill(y.plane(c), y.plane(c) + P, xv[static_cast<std::size_t>(c)]);
        }
        return push(std::move(y), rg(x), [x](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            const std::size_t P = gy.shape().plane();
            for (int c = 0; c < dx.c(); ++c) {
                const T* gp = gy.plane(c);
                double s = 0.0;
                for (std::size_t i = 0; i < P; ++i) s += static_cast<double>(gp[i]);
                dx[static_cast<std::size_t>(c)] += static_cast<T>(s);
            }
        });
    }

    Id bilinear_resize(Id x, int h, int w) {
        const int in_h = value(x).h(), in_w = value(x).w();
        Tensor<T> y = kernels::bilinear_resize_fwd(value(x), h, w);
        return push(std::move(y), rg(x), [x, in_h, in_w](Graph& g, Id self) {
            if (!g.rg(x)) return;
            kernels::bilinear_resize_bwd(g.nodes_[self].grad, in_h, in_w, g.acc(x));
        });
    }

    Id concat_channels(Id a, Id b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (av.h() != bv.h() || av.w() != bv.w()) {
            throw std::invalid_argument("concat_channels: spatial axes differ, " + av.shape().str() +
                                        " vs " + bv.shape().str());
        }
        Tensor<T> y({av.c() + bv.c(), av.h(), av.w()});
        std::copy(av.data(), av.data() + av.size(), y.data());
        std::copy(bv.data(), bv.data() + bv.size(), y.data() + av.size());
        const std::size_t na = av.size();
        return push(std::move(y), rg(a) || rg(b), [a, b, na](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            if (g.rg(a)) {
                Tensor<T>& da = g.acc(a);
                for (std::size_t i = 0; i < na; ++i) da[i] += gy[i];
            }
            if (g.rg(b)) {
                Tensor<T>& db = g.acc(b);
                for (std::size_t i = 0; i < db.size(); ++i) db[i] += gy[na + i];
            }
        });
    }

    Id slice_channels(Id x, int from, int count) {
        const Tensor<T>& xv = value(x);
        if (from < 0 || count < 1 || from + count > xv.c()) {
            throw std::invalid_argument("slice_channels: range outside channel axis");
        }
        Tensor<T> y({count, xv.h(), xv.w()});
        const std::size_t P = xv.shape().plane();
        std::copy(xv.plane(from), xv.plane(from) + static_cast<std::size_t>(count) * P, y.data());
        return push(std::move(y), rg(x), [x, from, P](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            T* base = dx.plane(from);
            for (std::size_t i = 0; i < gy.size(); ++i) base[i] += gy[i];
        });
    }

    // -- normalization --------------------------------------------------------

    // Per-channel layer norm over spatial positions, bias-free affine.
    Id layer_norm(Id x, Id gamma, T eps) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& gv = value(gamma);
        if (gv.c() != xv.c() || gv.h() != 1 || gv.w() != 1) {
            throw std::invalid_argument("layer_norm: gamma axis is " + gv.shape().str() +
                                        ", expected (" + std::to_string(xv.c()) + ",1,1)");
        }
        const int C = xv.c();
        const std::size_t P = xv.shape().plane();
        Tensor<T> y(xv.shape());
        Tensor<T> xhat(xv.shape());
        std::vector<T> inv_std(static_cast<std::size_t>(C));
        for (int c = 0; c < C; ++c) {
            const T* xp = xv.plane(c);
            double mu = 0.0;
            for (std::size_t i = 0; i < P; ++i) mu += static_cast<double>(xp[i]);
            mu /= static_cast<double>(P);
            double var = 0.0;
            for (std::size_t i = 0; i < P; ++i) {
                const double d = static_cast<double>(xp[i]) - mu;
                var += d * d;
            }
            var /= static_cast<double>(P);
            const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
            inv_std[static_cast<std::size_t>(c)] = static_cast<T>(is);
            T* hp = xhat.plane(c);
            T* yp = y.plane(c);
            const T gc = gv[static_cast<std::size_t>(c)];
            for (std::size_t i = 0; i < P; ++i) {
                hp[i] = static_cast<T>((static_cast<double>(xp[i]) - mu) * is);
                yp[i] = gc * hp[i];
            }
        }
        return push(std::move(y), rg(x) || rg(gamma),
                    [x, gamma, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& gv2 = g.value(gamma);
            const int C = gy.c();
            const std::size_t P = gy.shape().plane();
            if (g.rg(gamma)) {
                Tensor<T>& dg = g.acc(gamma);
                for (int c = 0; c < C; ++c) {
                    const T* gp = gy.plane(c);
                    const T* hp = xhat.plane(c);
                    double s = 0.0;
                    for (std::size_t i = 0; i < P; ++i) s += static_cast<double>(gp[i]) * hp[i];
                    dg[static_cast<std::size_t>(c)] += static_cast<T>(s);
                }
            }
            if (g.rg(x)) {
                Tensor<T>& dx = g.acc(x);
                for (int c = 0; c < C; ++c) {
                    const T* gp = gy.plane(c);
                    const T* hp = xhat.plane(c);
                    T* dp = dx.plane(c);
                    const double gc = static_cast<double>(gv2[static_cast<std::size_t>(c)]);
                    const double is = static_cast<double>(inv_std[static_cast<std::size_t>(c)]);
                    double sum_dh = 0.0, sum_dh_h = 0.0;
                    for (std::size_t i = 0; i < P; ++i) {
                        const double dh = gc * gp[i];
                        sum_dh += dh;
                        sum_dh_h += dh * hp[i];
                    }
                    const double n = static_cast<double>(P);
                    for (std::size_t i = 0; i < P; ++i) {
                        const double dh = gc * gp[i];
                        dp[i] += static_cast<T>(is * (dh - sum_dh / n - hp[i] * sum_dh_h / n));
                    }
                }
            }
        });
    }

    // x / sqrt(sum_hw x^2 + eps), per channel.
    Id l2norm_spatial(Id x, T eps) {
        const Tensor<T>& xv = value(x);
        const int C = xv.c();
        const std::size_t P = xv.shape().plane();
        Tensor<T> y(xv.shape());
        std::vector<T> inv_norm(static_cast<std::size_t>(C));
        for (int c = 0; c < C; ++c) {
            const T* xp = xv.plane(c);
            double s = 0.0;
            for (std::size_t i = 0; i < P; ++i) s += static_cast<double>(xp[i]) * xp[i];
            const double in = 1.0 / std::sqrt(s + static_cast<double>(eps));
            inv_norm[static_cast<std::size_t>(c)] = static_cast<T>(in);
            T* yp = y.plane(c);
            for (std::size_t i = 0; i < P; ++i) yp[i] = static_cast<T>(xp[i] * in);
        }
        return push(std::move(y), rg(x), [x, inv_norm = std::move(inv_norm)](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& xv2 = g.value(x);
            Tensor<T>& dx = g.acc(x);
            const int C = gy.c();
            const std::size_t P = gy.shape().plane();
            for (int c = 0; c < C; ++c) {
                const T* gp = gy.plane(c);
                const T* xp = xv2.plane(c);
                T* dp = dx.plane(c);
                const double in = static_cast<double>(inv_norm[static_cast<std::size_t>(c)]);
                double dot = 0.0;
                for (std::size_t i = 0; i < P; ++i) dot += static_cast<double>(gp[i]) * xp[i];
                const double k = dot * in * in * in;
                for (std::size_t i = 0; i < P; ++i) {
                    dp[i] += static_cast<T>(gp[i] * in - xp[i] * k);
                }
            }
        });
    }

    // -- attention matmuls ----------------------------------------------------

    Id gram(Id q, Id k) {
        Tensor<T> s = kernels::gram_fwd(value(q), value(k));
        return push(std::move(s), rg(q) || rg(k), [q, k](Graph& g, Id self) {
            const Tensor<T>& gs = g.nodes_[self].grad;
            const Tensor<T>& qv = g.value(q);
            const Tensor<T>& kv = g.value(k);
            const std::size_t P = qv.shape().plane();
            if (g.rg(q)) {
                Tensor<T>& dq = g.acc(q);
                for (int i = 0; i < qv.c(); ++i) {
                    T* dqp = dq.plane(i);
                    for (int j = 0; j < kv.c(); ++j) {
                        const T w = gs.at(i, j, 0);
                        if (w == T(0)) continue;
                        const T* kp = kv.plane(j);
                        for (std::size_t p = 0; p < P; ++p) dqp[p] += w * kp[p];
                    }
                }
            }
            if (g.rg(k)) {
                Tensor<T>& dk = g.acc(k);
                for (int j = 0; j < kv.c(); ++j) {
                    T* dkp = dk.plane(j);
                    for (int i = 0; i < qv.c(); ++i) {
                        const T w = gs.at(i, j, 0);
                        if (w == T(0)) continue;
                        const T* qp = qv.plane(i);
                        for (std::size_t p = 0; p < P; ++p) dkp[p] += w * qp[p];
                    }
                }
            }
        });
    }

    Id mixdown(Id a, Id v) {
        Tensor<T> y = kernels::mixdown_fwd(value(a), value(v));
        return push(std::move(y), rg(a) || rg(v), [a, v](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            const Tensor<T>& av = g.value(a);
            const Tensor<T>& vv = g.value(v);
            const std::size_t P = vv.shape().plane();
            if (g.rg(a)) {
                Tensor<T>& da = g.acc(a);
                for (int i = 0; i < av.c(); ++i) {
                    const T* gp = gy.plane(i);
                    for (int j = 0; j < vv.c(); ++j) {
                        da.at(i, j, 0) += kernels::dot_span(gp, vv.plane(j), P);
                    }
                }
            }
            if (g.rg(v)) {
                Tensor<T>& dv = g.acc(v);
                for (int j = 0; j < vv.c(); ++j) {
                    T* dvp = dv.plane(j);
                    for (int i = 0; i < av.c(); ++i) {
                        const T w = av.at(i, j, 0);
                        if (w == T(0)) continue;
                        const T* gp = gy.plane(i);
                        for (std::size_t p = 0; p < P; ++p) dvp[p] += w * gp[p];
                    }
                }
            }
        });
    }

    // -- haze-specific primitives ----------------------------------------------

    Id box_mean(Id x, int radius) {
        Tensor<T> y = kernels::box_filter_fwd(value(x), radius, /*normalize=*/true);
        return push(std::move(y), rg(x), [x, radius](Graph& g, Id self) {
            if (!g.rg(x)) return;
            kernels::box_filter_bwd(g.nodes_[self].grad, radius, g.acc(x));
        });
    }

    Id dark_channel(Id x, int window) {
        std::vector<std::uint32_t> argmin;
        Tensor<T> y = kernels::dark_channel_fwd(value(x), window, &argmin);
        return push(std::move(y), rg(x), [x, argmin = std::move(argmin)](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            for (std::size_t i = 0; i < gy.size(); ++i) dx[argmin[i]] += gy[i];
        });
    }

    // Per-channel mean of the values at fixed spatial indices -> (C,1,1).
    Id gather_mean_spatial(Id x, std::vector<std::uint32_t> idx) {
        const Tensor<T>& xv = value(x);
        if (idx.empty()) throw std::invalid_argument("gather_mean_spatial: empty index set");
        Tensor<T> y({xv.c(), 1, 1});
        const std::size_t P = xv.shape().plane();
        const double inv = 1.0 / static_cast<double>(idx.size());
        for (int c = 0; c < xv.c(); ++c) {
            const T* xp = xv.plane(c);
            double s = 0.0;
            for (std::uint32_t p : idx) s += static_cast<double>(xp[p]);
            y[static_cast<std::size_t>(c)] = static_cast<T>(s * inv);
        }
        (void)P;
        return push(std::move(y), rg(x), [x, idx = std::move(idx)](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const Tensor<T>& gy = g.nodes_[self].grad;
            Tensor<T>& dx = g.acc(x);
            const T inv = static_cast<T>(1.0 / static_cast<double>(idx.size()));
            for (int c = 0; c < dx.c(); ++c) {
                T* dp = dx.plane(c);
                const T gv = gy[static_cast<std::size_t>(c)] * inv;
                for (std::uint32_t p : idx) dp[p] += gv;
            }
        });
    }

    Id sobel_mag(Id x) {
        Tensor<T> sgx, sgy;
        Tensor<T> y = kernels::sobel_mag_fwd(value(x), &sgx, &sgy);
        return push(std::move(y), rg(x),
                    [x, sgx = std::move(sgx), sgy = std::move(sgy)](Graph& g, Id self) {
            if (!g.rg(x)) return;
            kernels::sobel_mag_bwd(g.nodes_[self].grad, sgx, sgy, g.acc(x));
        });
    }

    // -- reductions -------------------------------------------------------------

    Id sum(Id x) {
        double s = 0.0;
        const Tensor<T>& xv = value(x);
        for (std::size_t i = 0; i < xv.size(); ++i) s += static_cast<double>(xv[i]);
        Tensor<T> y({1, 1, 1});
        y[0] = static_cast<T>(s);
        return push(std::move(y), rg(x), [x](Graph& g, Id self) {
            if (!g.rg(x)) return;
            const T gv = g.nodes_[self].grad[0];
            Tensor<T>& dx = g.acc(x);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gv;
        });
    }

    Id mean(Id x) { return mul_scalar(sum(x), static_cast<T>(1.0 / static_cast<double>(value(x).size()))); }

    // -- backward ----------------------------------------------------------------

    void backward(Id root) {
        Node& r = nodes_[check(root)];
        if (r.value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
        acc(root)[0] += T(1);
        for (Id i = root; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward && n.requires_grad && !n.grad.empty()) n.backward(*this, i);
        }
    }

    bool rg(Id id) const { return nodes_[check(id)].requires_grad; }

    Tensor<T>& acc(Id id) {
        Node& n = nodes_[check(id)];
        if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
        return n.grad;
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        std::function<void(Graph&, Id)> backward;
    };

    enum class BMode { Same, ChannelMap, ChannelVec, Scalar };

    static BMode bcast_mode(const Shape& a, const Shape& b, const char* opname) {
        if (a == b) return BMode::Same;
        if (b.c == 1 && b.h == a.h && b.w == a.w) return BMode::ChannelMap;
        if (b.c == a.c && b.h == 1 && b.w == 1) return BMode::ChannelVec;
        if (b.c == 1 && b.h == 1 && b.w == 1) return BMode::Scalar;
        throw std::invalid_argument(std::string(opname) + ": cannot broadcast " + b.str() + " to " +
                                    a.str());
    }

    template <typename F>
    static void for_bcast(const Shape& a, const Shape& b, BMode mode, F&& f) {
        const std::size_t n = a.numel();
        const std::size_t P = a.plane();
        switch (mode) {
            case BMode::Same:
                for (std::size_t i = 0; i < n; ++i) f(i, i);
                break;
            case BMode::ChannelMap:
                for (int c = 0; c < a.c; ++c) {
                    const std::size_t base = static_cast<std::size_t>(c) * P;
                    for (std::size_t i = 0; i < P; ++i) f(base + i, i);
                }
                break;
            case BMode::ChannelVec:
                for (int c = 0; c < a.c; ++c) {
                    const std::size_t base = static_cast<std::size_t>(c) * P;
                    for (std::size_t i = 0; i < P; ++i) f(base + i, static_cast<std::size_t>(c));
                }
                break;
            case BMode::Scalar:
                for (std::size_t i = 0; i < n; ++i) f(i, 0);
                break;
        }
        (void)b;
    }

    Id binary_bcast(Id a, Id b, bool is_sub) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        const BMode mode = bcast_mode(av.shape(), bv.shape(), is_sub ? "sub" : "add");
        Tensor<T> y(av.shape());
        const T sgn = is_sub ? T(-1) : T(1);
        for_bcast(av.shape(), bv.shape(), mode,
                  [&](std::size_t i, std::size_t j) { y[i] = av[i] + sgn * bv[j]; });
        return push(std::move(y), rg(a) || rg(b), [this, a, b, mode, sgn](Graph& g, Id self) {
            const Tensor<T>& gy = g.nodes_[self].grad;
            if (g.rg(a)) {
                Tensor<T>& da = g.acc(a);
                for (std::size_t i = 0; i < gy.size(); ++i) da[i] += gy[i];
            }
            if (g.rg(b)) {
                Tensor<T>& db = g.acc(b);
                for_bcast(g.value(a).shape(), g.value(b).shape(), mode,
                          [&](std::size_t i, std::size_t j) { db[j] += sgn * gy[i]; });
            }
        });
    }

    std::size_t check(Id id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
            throw std::out_of_range("graph node id out of range");
        }
        return static_cast<std::size_t>(id);
    }

    Id push(Tensor<T> v, bool requires_grad, std::function<void(Graph&, Id)> bwd) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        if (requires_grad) n.backward = std::move(bwd);
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

}  // namespace irvf
