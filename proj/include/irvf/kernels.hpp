#pragma once

// Handwritten forward/backward compute kernels on plain tensors. The autodiff
// graph wires these together; the public op API calls the forward paths
// directly. Convolution is cross-correlation (no kernel flip).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "irvf/tensor.hpp"

namespace irvf::kernels {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Eight-lane dot product: fixed association (deterministic) while breaking the
// FMA dependency chain so the loop vectorizes.
template <typename T>
inline T dot_span(const T* a, const T* b, std::size_t n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    }
    T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
inline double sum_span(const T* a, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (int j = 0; j < 4; ++j) acc[j] += static_cast<double>(a[i + j]);
    }
    double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (; i < n; ++i) s += static_cast<double>(a[i]);
    return s;
}

template <typename T>
inline double dot_span_d(const T* a, const T* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (int j = 0; j < 4; ++j) acc[j] += static_cast<double>(a[i + j]) * b[i + j];
    }
    double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

// ---------------------------------------------------------------------------
// conv2d. Weight layout: (outC, inC, k*k), bias (outC,1,1) or empty.
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_check(const Shape& x, const Shape& w, const Tensor<T>& b, int k, int stride, int pad) {
    if (w.w != k * k) {
        throw std::invalid_argument("conv2d: weight tap axis is " + std::to_string(w.w) +
                                    ", expected k*k=" + std::to_string(k * k));
    }
    if (x.c != w.h) {
        throw std::invalid_argument("conv2d: input channel axis is " + std::to_string(x.c) +
                                    ", weight expects " + std::to_string(w.h));
    }
    if (!b.empty() && (b.c() != w.c || b.h() != 1 || b.w() != 1)) {
        throw std::invalid_argument("conv2d: bias axis is " + b.shape().str() + ", expected (" +
                                    std::to_string(w.c) + ",1,1)");
    }
    if (stride < 1 || pad < 0 || k < 1) {
        throw std::invalid_argument("conv2d: invalid stride/padding/kernel");
    }
    if (conv_out_dim(x.h, k, stride, pad) < 1) {
        throw std::invalid_argument("conv2d: output height axis would be < 1");
    }
    if (conv_out_dim(x.w, k, stride, pad) < 1) {
        throw std::invalid_argument("conv2d: output width axis would be < 1");
    }
}

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int k, int stride,
                     int pad) {
    conv2d_check(x.shape(), w.shape(), b, k, stride, pad);
    const int in_c = x.c(), H = x.h(), W = x.w();
    const int out_c = w.c();
    const int Ho = conv_out_dim(H, k, stride, pad);
    const int Wo = conv_out_dim(W, k, stride, pad);
    Tensor<T> y({out_c, Ho, Wo});

    if (k == 1 && stride == 1 && pad == 0) {
        // channel-mixing matmul; input channels blocked by four to amortize
        // the output-row traffic
        const std::size_t P = x.shape().plane();
        for (int oc = 0; oc < out_c; ++oc) {
            T* yp = y.plane(oc);
            const T bias = b.empty() ? T(0) : b[static_cast<std::size_t>(oc)];
            std::fill(yp, yp + P, bias);
            const T* wrow = w.data() + static_cast<std::size_t>(oc) * in_c;
            int ic = 0;
            for (; ic + 4 <= in_c; ic += 4) {
                const T w0 = wrow[ic], w1 = wrow[ic + 1], w2 = wrow[ic + 2], w3 = wrow[ic + 3];
                const T* x0 = x.plane(ic);
                const T* x1 = x.plane(ic + 1);
                const T* x2 = x.plane(ic + 2);
                const T* x3 = x.plane(ic + 3);
                for (std::size_t p = 0; p < P; ++p) {
                    yp[p] += w0 * x0[p] + w1 * x1[p] + w2 * x2[p] + w3 * x3[p];
                }
            }
            for (; ic < in_c; ++ic) {
                const T wv = wrow[ic];
                const T* xp = x.plane(ic);
                for (std::size_t p = 0; p < P; ++p) yp[p] += wv * xp[p];
            }
        }
        return y;
    }

    for (int oc = 0; oc < out_c; ++oc) {
        T* yp = y.plane(oc);
        const T bias = b.empty() ? T(0) : b[static_cast<std::size_t>(oc)];
        std::fill(yp, yp + static_cast<std::size_t>(Ho) * Wo, bias);
        for (int ic = 0; ic < in_c; ++ic) {
            const T* xp = x.plane(ic);
            const T* wrow = w.data() + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T wv = wrow[ky * k + kx];
                    if (wv == T(0)) continue;
                    if (stride == 1) {
                        const int ox_lo = std::max(0, pad - kx);
                        const int ox_hi = std::min(Wo, W - kx + pad);
                        if (ox_hi <= ox_lo) continue;
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy - pad + ky;
                            if (iy < 0 || iy >= H) continue;
                            const T* xr = xp + static_cast<std::size_t>(iy) * W + (ox_lo + kx - pad);
                            T* yr = yp + static_cast<std::size_t>(oy) * Wo + ox_lo;
                            const int n = ox_hi - ox_lo;
                            for (int i = 0; i < n; ++i) yr[i] += wv * xr[i];
                        }
                    } else {
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= H) continue;
                            const T* xr = xp + static_cast<std::size_t>(iy) * W;
                            T* yr = yp + static_cast<std::size_t>(oy) * Wo;
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                if (ix >= 0 && ix < W) yr[ox] += wv * xr[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_bwd_input(const Tensor<T>& dy, const Tensor<T>& w, int k, int stride, int pad,
                      Tensor<T>& dx) {
    const int in_c = dx.c(), H = dx.h(), W = dx.w();
    const int out_c = dy.c(), Ho = dy.h(), Wo = dy.w();

    if (k == 1 && stride == 1 && pad == 0) {
        const std::size_t P = dx.shape().plane();
        for (int ic = 0; ic < in_c; ++ic) {
            T* dp = dx.plane(ic);
            int oc = 0;
            for (; oc + 4 <= out_c; oc += 4) {
                const T w0 = w[static_cast<std::size_t>(oc) * in_c + ic];
                const T w1 = w[static_cast<std::size_t>(oc + 1) * in_c + ic];
                const T w2 = w[static_cast<std::size_t>(oc + 2) * in_c + ic];
                const T w3 = w[static_cast<std::size_t>(oc + 3) * in_c + ic];
                const T* g0 = dy.plane(oc);
                const T* g1 = dy.plane(oc + 1);
                const T* g2 = dy.plane(oc + 2);
                const T* g3 = dy.plane(oc + 3);
                for (std::size_t p = 0; p < P; ++p) {
                    dp[p] += w0 * g0[p] + w1 * g1[p] + w2 * g2[p] + w3 * g3[p];
                }
            }
            for (; oc < out_c; ++oc) {
                const T wv = w[static_cast<std::size_t>(oc) * in_c + ic];
                const T* gp = dy.plane(oc);
                for (std::size_t p = 0; p < P; ++p) dp[p] += wv * gp[p];
            }
        }
        return;
    }

    for (int oc = 0; oc < out_c; ++oc) {
        const T* gp = dy.plane(oc);
        for (int ic = 0; ic < in_c; ++ic) {
            T* xp = dx.plane(ic);
            const T* wrow = w.data() + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T wv = wrow[ky * k + kx];
                    if (wv == T(0)) continue;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        const T* gr = gp + static_cast<std::size_t>(oy) * Wo;
                        T* xr = xp + static_cast<std::size_t>(iy) * W;
                        if (stride == 1) {
                            const int ox_lo = std::max(0, pad - kx);
                            const int ox_hi = std::min(Wo, W - kx + pad);
                            const T* g0 = gr + ox_lo;
                            T* x0 = xr + (ox_lo + kx - pad);
                            const int n = ox_hi - ox_lo;
                            for (int i = 0; i < n; ++i) x0[i] += wv * g0[i];
                        } else {
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                if (ix >= 0 && ix < W) xr[ix] += wv * gr[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_bwd_weight(const Tensor<T>& dy, const Tensor<T>& x, int k, int stride, int pad,
                       Tensor<T>& dw, Tensor<T>* db) {
    const int in_c = x.c(), H = x.h(), W = x.w();
    const int out_c = dy.c(), Ho = dy.h(), Wo = dy.w();
    for (int oc = 0; oc < out_c; ++oc) {
        const T* gp = dy.plane(oc);
        if (db) {
            (*db)[static_cast<std::size_t>(oc)] +=
                static_cast<T>(sum_span(gp, static_cast<std::size_t>(Ho) * Wo));
        }
        if (k == 1 && stride == 1 && pad == 0) {
            const std::size_t P = x.shape().plane();
            T* wrow = dw.data() + static_cast<std::size_t>(oc) * in_c;
            for (int ic = 0; ic < in_c; ++ic) wrow[ic] += dot_span(gp, x.plane(ic), P);
            continue;
        }
        for (int ic = 0; ic < in_c; ++ic) {
            const T* xp = x.plane(ic);
            T* wrow = dw.data() + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T acc = T(0);
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        const T* gr = gp + static_cast<std::size_t>(oy) * Wo;
                        const T* xr = xp + static_cast<std::size_t>(iy) * W;
                        if (stride == 1) {
                            const int ox_lo = std::max(0, pad - kx);
                            const int ox_hi = std::min(Wo, W - kx + pad);
                            acc += dot_span(gr + ox_lo, xr + (ox_lo + kx - pad),
                                            static_cast<std::size_t>(std::max(0, ox_hi - ox_lo)));
                        } else {
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                if (ix >= 0 && ix < W) acc += gr[ox] * xr[ix];
                            }
                        }
                    }
                    wrow[ky * k + kx] += acc;
                }
            }
        }
    }
}

// Depthwise conv: weight (C, 1, k*k), bias (C,1,1) or empty, stride 1.
template <typename T>
Tensor<T> dwconv_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int k, int pad) {
    if (w.c() != x.c() || w.h() != 1 || w.w() != k * k) {
        throw std::invalid_argument("dwconv: weight axis is " + w.shape().str() + ", expected (" +
                                    std::to_string(x.c()) + ",1," + std::to_string(k * k) + ")");
    }
    const int C = x.c(), H = x.h(), W = x.w();
    const int Ho = conv_out_dim(H, k, 1, pad), Wo = conv_out_dim(W, k, 1, pad);
    Tensor<T> y({C, Ho, Wo});
    for (int c = 0; c < C; ++c) {
        T* yp = y.plane(c);
        const T bias = b.empty() ? T(0) : b[static_cast<std::size_t>(c)];
        std::fill(yp, yp + static_cast<std::size_t>(Ho) * Wo, bias);
        const T* xp = x.plane(c);
        const T* wrow = w.data() + static_cast<std::size_t>(c) * k * k;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T wv = wrow[ky * k + kx];
                const int ox_lo = std::max(0, pad - kx);
                const int ox_hi = std::min(Wo, W - kx + pad);
                if (ox_hi <= ox_lo) continue;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    const T* xr = xp + static_cast<std::size_t>(iy) * W + (ox_lo + kx - pad);
                    T* yr = yp + static_cast<std::size_t>(oy) * Wo + ox_lo;
                    const int n = ox_hi - ox_lo;
                    for (int i = 0; i < n; ++i) yr[i] += wv * xr[i];
                }
            }
        }
    }
    return y;
}

template <typename T>
void dwconv_bwd(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& w, int k, int pad,
                Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
    const int C = x.c(), H = x.h(), W = x.w();
    const int Ho = dy.h(), Wo = dy.w();
    for (int c = 0; c < C; ++c) {
        const T* gp = dy.plane(c);
        const T* xp = x.plane(c);
        if (db) {
            (*db)[static_cast<std::size_t>(c)] +=
                static_cast<T>(sum_span(gp, static_cast<std::size_t>(Ho) * Wo));
        }
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int ox_lo = std::max(0, pad - kx);
                const int ox_hi = std::min(Wo, W - kx + pad);
                if (ox_hi <= ox_lo) continue;
                const T wv = w[(static_cast<std::size_t>(c) * k * k) + ky * k + kx];
                T wacc = T(0);
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    const T* gr = gp + static_cast<std::size_t>(oy) * Wo + ox_lo;
                    const std::size_t xoff = static_cast<std::size_t>(iy) * W + (ox_lo + kx - pad);
                    const int n = ox_hi - ox_lo;
                    if (dx) {
                        T* xr = dx->plane(c) + xoff;
                        for (int i = 0; i < n; ++i) xr[i] += wv * gr[i];
                    }
                    if (dw) wacc += dot_span(gr, xp + xoff, static_cast<std::size_t>(n));
                }
                if (dw) (*dw)[(static_cast<std::size_t>(c) * k * k) + ky * k + kx] += wacc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Softmax / pooling / resize
// ---------------------------------------------------------------------------

// Softmax across channels, per spatial position, with max subtraction.
template <typename T>
Tensor<T> softmax_channels_fwd(const Tensor<T>& x) {
    const int C = x.c();
    const std::size_t P = x.shape().plane();
    Tensor<T> y(x.shape());
    for (std::size_t p = 0; p < P; ++p) {
        T m = x[p];
        for (int c = 1; c < C; ++c) m = std::max(m, x[static_cast<std::size_t>(c) * P + p]);
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(static_cast<double>(x[static_cast<std::size_t>(c) * P + p] - m));
            y[static_cast<std::size_t>(c) * P + p] = static_cast<T>(e);
            s += e;
        }
        const double inv = 1.0 / s;
        for (int c = 0; c < C; ++c) {
            y[static_cast<std::size_t>(c) * P + p] = static_cast<T>(y[static_cast<std::size_t>(c) * P + p] * inv);
        }
    }
    return y;
}

template <typename T>
void softmax_channels_bwd(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    const int C = y.c();
    const std::size_t P = y.shape().plane();
    for (std::size_t p = 0; p < P; ++p) {
        double dot = 0.0;
        for (int c = 0; c < C; ++c) {
            const std::size_t i = static_cast<std::size_t>(c) * P + p;
            dot += static_cast<double>(dy[i]) * y[i];
        }
        for (int c = 0; c < C; ++c) {
            const std::size_t i = static_cast<std::size_t>(c) * P + p;
            dx[i] += static_cast<T>(y[i] * (static_cast<double>(dy[i]) - dot));
        }
    }
}

// Softmax over the spatial plane within each channel (used for attention rows
// stored as (rows, cols, 1)).
template <typename T>
Tensor<T> plane_softmax_fwd(const Tensor<T>& x) {
    const int C = x.c();
    const std::size_t P = x.shape().plane();
    Tensor<T> y(x.shape());
    for (int c = 0; c < C; ++c) {
        const T* xp = x.plane(c);
        T* yp = y.plane(c);
        T m = xp[0];
        for (std::size_t i = 1; i < P; ++i) m = std::max(m, xp[i]);
        double s = 0.0;
        for (std::size_t i = 0; i < P; ++i) {
            const double e = std::exp(static_cast<double>(xp[i] - m));
            yp[i] = static_cast<T>(e);
            s += e;
        }
        const double inv = 1.0 / s;
        for (std::size_t i = 0; i < P; ++i) yp[i] = static_cast<T>(yp[i] * inv);
    }
    return y;
}

template <typename T>
void plane_softmax_bwd(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    const int C = y.c();
    const std::size_t P = y.shape().plane();
    for (int c = 0; c < C; ++c) {
        const T* yp = y.plane(c);
        const T* gp = dy.plane(c);
        T* dp = dx.plane(c);
        double dot = 0.0;
        for (std::size_t i = 0; i < P; ++i) dot += static_cast<double>(gp[i]) * yp[i];
        for (std::size_t i = 0; i < P; ++i) dp[i] += static_cast<T>(yp[i] * (static_cast<double>(gp[i]) - dot));
    }
}

// Global average pool -> (C,1,1).
template <typename T>
Tensor<T> gap_fwd(const Tensor<T>& x) {
    if (x.h() < 1 || x.w() < 1) {
        throw std::invalid_argument("global_average_pool: empty spatial axis " + x.shape().str());
    }
    Tensor<T> y({x.c(), 1, 1});
    const std::size_t P = x.shape().plane();
    for (int c = 0; c < x.c(); ++c) {
        const T* xp = x.plane(c);
        double s = 0.0;
        for (std::size_t i = 0; i < P; ++i) s += static_cast<double>(xp[i]);
        y[static_cast<std::size_t>(c)] = static_cast<T>(s / static_cast<double>(P));
    }
    return y;
}

// Mean across channels -> (1,H,W).
template <typename T>
Tensor<T> channel_mean_fwd(const Tensor<T>& x) {
    if (x.c() < 1) throw std::invalid_argument("channel_average_pool: channel axis is 0");
    Tensor<T> y({1, x.h(), x.w()});
    const std::size_t P = x.shape().plane();
    const double inv = 1.0 / x.c();
    for (int c = 0; c < x.c(); ++c) {
        const T* xp = x.plane(c);
        T* yp = y.data();
        for (std::size_t i = 0; i < P; ++i) yp[i] += xp[i];
    }
    for (std::size_t i = 0; i < P; ++i) y[i] = static_cast<T>(y[i] * inv);
    return y;
}

struct ResizeTap {
    int y0, y1, x0, x1;
    double wy, wx;
};

inline ResizeTap resize_tap(int o, int in, int out, bool vertical) {
    (void)vertical;
    const double scale = static_cast<double>(in) / out;
    double src = (o + 0.5) * scale - 0.5;
    int i0 = static_cast<int>(std::floor(src));
    double w = src - i0;
    int i0c = std::clamp(i0, 0, in - 1);
    int i1c = std::clamp(i0 + 1, 0, in - 1);
    ResizeTap t{};
    t.y0 = i0c;
    t.y1 = i1c;
    t.wy = w;
    return t;
}

// Bilinear resize, align-corners false.
template <typename T>
Tensor<T> bilinear_resize_fwd(const Tensor<T>& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw std::invalid_argument("bilinear_resize: target axis must be >= 1");
    }
    const int C = x.c(), H = x.h(), W = x.w();
    Tensor<T> y({C, out_h, out_w});
    for (int oy = 0; oy < out_h; ++oy) {
        const ResizeTap ty = resize_tap(oy, H, out_h, true);
        for (int ox = 0; ox < out_w; ++ox) {
            const ResizeTap tx = resize_tap(ox, W, out_w, false);
            for (int c = 0; c < C; ++c) {
                const T* xp = x.plane(c);
                const double v00 = xp[static_cast<std::size_t>(ty.y0) * W + tx.y0];
                const double v01 = xp[static_cast<std::size_t>(ty.y0) * W + tx.y1];
                const double v10 = xp[static_cast<std::size_t>(ty.y1) * W + tx.y0];
                const double v11 = xp[static_cast<std::size_t>(ty.y1) * W + tx.y1];
                const double v = (1 - ty.wy) * ((1 - tx.wy) * v00 + tx.wy * v01) +
                                 ty.wy * ((1 - tx.wy) * v10 + tx.wy * v11);
                y.at(c, oy, ox) = static_cast<T>(v);
            }
        }
    }
    return y;
}

template <typename T>
void bilinear_resize_bwd(const Tensor<T>& dy, int in_h, int in_w, Tensor<T>& dx) {
    const int C = dy.c(), Ho = dy.h(), Wo = dy.w();
    for (int oy = 0; oy < Ho; ++oy) {
        const ResizeTap ty = resize_tap(oy, in_h, Ho, true);
        for (int ox = 0; ox < Wo; ++ox) {
            const ResizeTap tx = resize_tap(ox, in_w, Wo, false);
            for (int c = 0; c < C; ++c) {
                const double g = static_cast<double>(dy.at(c, oy, ox));
                T* dp = dx.plane(c);
                dp[static_cast<std::size_t>(ty.y0) * in_w + tx.y0] += static_cast<T>(g * (1 - ty.wy) * (1 - tx.wy));
                dp[static_cast<std::size_t>(ty.y0) * in_w + tx.y1] += static_cast<T>(g * (1 - ty.wy) * tx.wy);
                dp[static_cast<std::size_t>(ty.y1) * in_w + tx.y0] += static_cast<T>(g * ty.wy * (1 - tx.wy));
                dp[static_cast<std::size_t>(ty.y1) * in_w + tx.y1] += static_cast<T>(g * ty.wy * tx.wy);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Box filter (clamped windows, normalized by actual count) via integral image.
// ---------------------------------------------------------------------------

template <typename T>
void integral_plane(const T* x, int H, int W, std::vector<double>& ii) {
    ii.assign(static_cast<std::size_t>(H + 1) * (W + 1), 0.0);
    for (int y = 0; y < H; ++y) {
        double row = 0.0;
        const T* xr = x + static_cast<std::size_t>(y) * W;
        double* out = ii.data() + static_cast<std::size_t>(y + 1) * (W + 1);
        const double* prev = ii.data() + static_cast<std::size_t>(y) * (W + 1);
        for (int xcol = 0; xcol < W; ++xcol) {
            row += static_cast<double>(xr[xcol]);
            out[xcol + 1] = prev[xcol + 1] + row;
        }
    }
}

inline double box_sum_at(const std::vector<double>& ii, int W, int y0, int y1, int x0, int x1) {
    // Inclusive [y0,y1] x [x0,x1].
    const int stride = W + 1;
    return ii[static_cast<std::size_t>(y1 + 1) * stride + (x1 + 1)] -
           ii[static_cast<std::size_t>(y0) * stride + (x1 + 1)] -
           ii[static_cast<std::size_t>(y1 + 1) * stride + x0] +
           ii[static_cast<std::size_t>(y0) * stride + x0];
}

template <typename T>
Tensor<T> box_filter_fwd(const Tensor<T>& x, int radius, bool normalize) {
    if (radius < 1) throw std::invalid_argument("box filter: radius must be >= 1");
    const int C = x.c(), H = x.h(), W = x.w();
    Tensor<T> y(x.shape());
    std::vector<double> ii;
    for (int c = 0; c < C; ++c) {
        integral_plane(x.plane(c), H, W, ii);
        T* yp = y.plane(c);
        for (int yy = 0; yy < H; ++yy) {
            const int y0 = std::max(0, yy - radius), y1 = std::min(H - 1, yy + radius);
            for (int xx = 0; xx < W; ++xx) {
                const int x0 = std::max(0, xx - radius), x1 = std::min(W - 1, xx + radius);
                double s = box_sum_at(ii, W, y0, y1, x0, x1);
                if (normalize) s /= static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
                yp[static_cast<std::size_t>(yy) * W + xx] = static_cast<T>(s);
            }
        }
    }
    return y;
}

// Adjoint of the normalized box filter: dx = boxsum(dy / count).
template <typename T>
void box_filter_bwd(const Tensor<T>& dy, int radius, Tensor<T>& dx) {
    const int C = dy.c(), H = dy.h(), W = dy.w();
    Tensor<double> scaled({1, H, W});
    std::vector<double> ii;
    for (int c = 0; c < C; ++c) {
        const T* gp = dy.plane(c);
        for (int yy = 0; yy < H; ++yy) {
            const int y0 = std::max(0, yy - radius), y1 = std::min(H - 1, yy + radius);
            for (int xx = 0; xx < W; ++xx) {
                const int x0 = std::max(0, xx - radius), x1 = std::min(W - 1, xx + radius);
                scaled.at(0, yy, xx) = static_cast<double>(gp[static_cast<std::size_t>(yy) * W + xx]) /
                                       static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
            }
        }
        integral_plane(scaled.plane(0), H, W, ii);
        T* dp = dx.plane(c);
        for (int yy = 0; yy < H; ++yy) {
            const int y0 = std::max(0, yy - radius), y1 = std::min(H - 1, yy + radius);
            for (int xx = 0; xx < W; ++xx) {
                const int x0 = std::max(0, xx - radius), x1 = std::min(W - 1, xx + radius);
                dp[static_cast<std::size_t>(yy) * W + xx] +=
                    static_cast<T>(box_sum_at(ii, W, y0, y1, x0, x1));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dark channel: min over channels and a window x window neighborhood with
// edge-replicated padding. Records the flat source index for backward.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dark_channel_fwd(const Tensor<T>& x, int window, std::vector<std::uint32_t>* argmin) {
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("dark_channel: window must be odd and >= 1");
    }
    const int C = x.c(), H = x.h(), W = x.w();
    const int r = window / 2;
    Tensor<T> y({1, H, W});
    if (argmin) argmin->assign(static_cast<std::size_t>(H) * W, 0);

    // Pixel-wise channel min first, tracking the winning channel.
    Tensor<T> cmin({1, H, W});
    std::vector<std::uint32_t> cidx(static_cast<std::size_t>(H) * W, 0);
    const std::size_t P = static_cast<std::size_t>(H) * W;
    for (std::size_t i = 0; i < P; ++i) cmin[i] = x[i];
    for (int c = 1; c < C; ++c) {
        const T* xp = x.plane(c);
        for (std::size_t i = 0; i < P; ++i) {
            if (xp[i] < cmin[i]) {
                cmin[i] = xp[i];
                cidx[i] = static_cast<std::uint32_t>(c);
            }
        }
    }

    for (int yy = 0; yy < H; ++yy) {
        const int y0 = std::max(0, yy - r), y1 = std::min(H - 1, yy + r);
        for (int xx = 0; xx < W; ++xx) {
            const int x0 = std::max(0, xx - r), x1 = std::min(W - 1, xx + r);
            T best = cmin.at(0, y0, x0);
            int by = y0, bx = x0;
            for (int sy = y0; sy <= y1; ++sy) {
                const T* row = cmin.data() + static_cast<std::size_t>(sy) * W;
                for (int sx = x0; sx <= x1; ++sx) {
                    if (row[sx] < best) {
                        best = row[sx];
                        by = sy;
                        bx = sx;
                    }
                }
            }
            y.at(0, yy, xx) = best;
            if (argmin) {
                const std::size_t sp = static_cast<std::size_t>(by) * W + bx;
                (*argmin)[static_cast<std::size_t>(yy) * W + xx] =
                    static_cast<std::uint32_t>(cidx[sp] * P + sp);
            }
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Sobel gradient magnitude |Gx|+|Gy| with replicate padding.
// ---------------------------------------------------------------------------

inline constexpr int kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
inline constexpr int kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

template <typename T>
Tensor<T> sobel_mag_fwd(const Tensor<T>& x, Tensor<T>* sign_gx, Tensor<T>* sign_gy) {
    const int C = x.c(), H = x.h(), W = x.w();
    Tensor<T> y(x.shape());
    if (sign_gx) *sign_gx = Tensor<T>(x.shape());
    if (sign_gy) *sign_gy = Tensor<T>(x.shape());
    for (int c = 0; c < C; ++c) {
        const T* xp = x.plane(c);
        T* yp = y.plane(c);
        auto at = [&](int sy, int sx) {
            return static_cast<double>(xp[static_cast<std::size_t>(std::clamp(sy, 0, H - 1)) * W +
                                          std::clamp(sx, 0, W - 1)]);
        };
        for (int yy = 0; yy < H; ++yy) {
            for (int xx = 0; xx < W; ++xx) {
                // symmetric-difference form so constant fields cancel exactly
                const double gx = (at(yy - 1, xx + 1) - at(yy - 1, xx - 1)) +
                                  2.0 * (at(yy, xx + 1) - at(yy, xx - 1)) +
                                  (at(yy + 1, xx + 1) - at(yy + 1, xx - 1));
                const double gy = (at(yy + 1, xx - 1) - at(yy - 1, xx - 1)) +
                                  2.0 * (at(yy + 1, xx) - at(yy - 1, xx)) +
                                  (at(yy + 1, xx + 1) - at(yy - 1, xx + 1));
                yp[static_cast<std::size_t>(yy) * W + xx] = static_cast<T>(std::abs(gx) + std::abs(gy));
                if (sign_gx) sign_gx->at(c, yy, xx) = static_cast<T>(gx > 0 ? 1 : (gx < 0 ? -1 : 0));
                if (sign_gy) sign_gy->at(c, yy, xx) = static_cast<T>(gy > 0 ? 1 : (gy < 0 ? -1 : 0));
            }
        }
    }
    return y;
}

template <typename T>
void sobel_mag_bwd(const Tensor<T>& dy, const Tensor<T>& sign_gx, const Tensor<T>& sign_gy,
                   Tensor<T>& dx) {
    const int C = dy.c(), H = dy.h(), W = dy.w();
    for (int c = 0; c < C; ++c) {
        const T* gp = dy.plane(c);
        const T* sxp = sign_gx.plane(c);
        const T* syp = sign_gy.plane(c);
        T* dp = dx.plane(c);
        for (int yy = 0; yy < H; ++yy) {
            for (int xx = 0; xx < W; ++xx) {
                const std::size_t i = static_cast<std::size_t>(yy) * W + xx;
                const double g = static_cast<double>(gp[i]);
                if (g == 0.0) continue;
                const double cx = g * sxp[i];
                const double cy = g * syp[i];
                for (int ky = -1; ky <= 1; ++ky) {
                    const int sy = std::clamp(yy + ky, 0, H - 1);
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int sx = std::clamp(xx + kx, 0, W - 1);
                        dp[static_cast<std::size_t>(sy) * W + sx] += static_cast<T>(
                            cx * kSobelX[ky + 1][kx + 1] + cy * kSobelY[ky + 1][kx + 1]);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Attention matmuls on (C, H, W) viewed as (C, H*W).
// ---------------------------------------------------------------------------

// S[i][j] = sum_p q[i][p] * k[j][p]; output (Cq, Ck, 1).
template <typename T>
Tensor<T> gram_fwd(const Tensor<T>& q, const Tensor<T>& k) {
    if (q.h() != k.h() || q.w() != k.w()) {
        throw std::invalid_argument("gram: spatial axes differ, " + q.shape().str() + " vs " +
                                    k.shape().str());
    }
    const std::size_t P = q.shape().plane();
    Tensor<T> s({q.c(), k.c(), 1});
    for (int i = 0; i < q.c(); ++i) {
        const T* qp = q.plane(i);
        for (int j = 0; j < k.c(); ++j) s.at(i, j, 0) = dot_span(qp, k.plane(j), P);
    }
    return s;
}

// out[i][p] = sum_j a[i][j] * v[j][p]; a is (Ci, Cj, 1), v is (Cj, H, W).
template <typename T>
Tensor<T> mixdown_fwd(const Tensor<T>& a, const Tensor<T>& v) {
    if (a.h() != v.c()) {
        throw std::invalid_argument("mixdown: matrix column axis " + std::to_string(a.h()) +
                                    " does not match value channel axis " + std::to_string(v.c()));
    }
    const std::size_t P = v.shape().plane();
    Tensor<T> y({a.c(), v.h(), v.w()});
    for (int i = 0; i < a.c(); ++i) {
        T* yp = y.plane(i);
        for (int j = 0; j < v.c(); ++j) {
            const T w = a.at(i, j, 0);
            if (w == T(0)) continue;
            const T* vp = v.plane(j);
            for (std::size_t p = 0; p < P; ++p) yp[p] += w * vp[p];
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Elementwise helpers used by the graph.
// ---------------------------------------------------------------------------

template <typename T>
T gelu_scalar(T x) {
    return static_cast<T>(0.5 * static_cast<double>(x) *
                          (1.0 + std::erf(static_cast<double>(x) * 0.7071067811865475244)));
}

template <typename T>
T gelu_grad_scalar(T x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475244));
    const double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014326779;
    return static_cast<T>(cdf + xd * pdf);
}

}  // namespace irvf::kernels
