#pragma once

// Independent brute-force oracles for the tensor primitives. These are kept
// deliberately naive (nested loops straight from the definitions) and never
// share code with the implementation they check.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "irvf/tensor.hpp"

namespace oracles {

using irvf::Shape;
using irvf::TensorD;

inline TensorD random_tensor(std::mt19937_64& gen, Shape s, double lo = -1.0, double hi = 1.0) {
    TensorD t(s);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(gen);
    return t;
}

// Six nested loops over (oc, oy, ox, ic, ky, kx), zero padding.
inline TensorD conv2d(const TensorD& x, const TensorD& w, const TensorD& b, int k, int stride,
                      int pad) {
    const int out_c = w.c(), in_c = x.c(), H = x.h(), W = x.w();
    const int Ho = (H + 2 * pad - k) / stride + 1;
    const int Wo = (W + 2 * pad - k) / stride + 1;
    TensorD y({out_c, Ho, Wo});
    for (int oc = 0; oc < out_c; ++oc) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(oc)];
                for (int ic = 0; ic < in_c; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * stride - pad + ky;
                            const int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += x.at(ic, iy, ix) * w.at(oc, ic, ky * k + kx);
                        }
                    }
                }
                y.at(oc, oy, ox) = acc;
            }
        }
    }
    return y;
}

inline TensorD softmax_channels(const TensorD& x) {
    TensorD y(x.shape());
    for (int yy = 0; yy < x.h(); ++yy) {
        for (int xx = 0; xx < x.w(); ++xx) {
            double m = -1e300;
            for (int c = 0; c < x.c(); ++c) m = std::max(m, x.at(c, yy, xx));
            double s = 0.0;
            for (int c = 0; c < x.c(); ++c) s += std::exp(x.at(c, yy, xx) - m);
            for (int c = 0; c < x.c(); ++c) y.at(c, yy, xx) = std::exp(x.at(c, yy, xx) - m) / s;
        }
    }
    return y;
}

inline std::vector<double> gap(const TensorD& x) {
    std::vector<double> out(static_cast<std::size_t>(x.c()), 0.0);
    for (int c = 0; c < x.c(); ++c) {
        double s = 0.0;
        for (int y = 0; y < x.h(); ++y) {
            for (int xx = 0; xx < x.w(); ++xx) s += x.at(c, y, xx);
        }
        out[static_cast<std::size_t>(c)] = s / (static_cast<double>(x.h()) * x.w());
    }
    return out;
}

inline TensorD channel_mean(const TensorD& x) {
    TensorD y({1, x.h(), x.w()});
    for (int yy = 0; yy < x.h(); ++yy) {
        for (int xx = 0; xx < x.w(); ++xx) {
            double s = 0.0;
            for (int c = 0; c < x.c(); ++c) s += x.at(c, yy, xx);
            y.at(0, yy, xx) = s / x.c();
        }
    }
    return y;
}

inline TensorD bilinear_resize(const TensorD& x, int out_h, int out_w) {
    TensorD y({x.c(), out_h, out_w});
    for (int c = 0; c < x.c(); ++c) {
        for (int oy = 0; oy < out_h; ++oy) {
            const double sy = (oy + 0.5) * x.h() / static_cast<double>(out_h) - 0.5;
            const int y0 = static_cast<int>(std::floor(sy));
            const double wy = sy - y0;
            for (int ox = 0; ox < out_w; ++ox) {
                const double sx = (ox + 0.5) * x.w() / static_cast<double>(out_w) - 0.5;
                const int x0 = static_cast<int>(std::floor(sx));
                const double wx = sx - x0;
                auto sample = [&](int yy, int xx) {
                    return x.at(c, std::clamp(yy, 0, x.h() - 1), std::clamp(xx, 0, x.w() - 1));
                };
                y.at(c, oy, ox) = (1 - wy) * ((1 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1)) +
                                  wy * ((1 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1));
            }
        }
    }
    return y;
}

// Min over channels and window with edge replication, straight double loop.
inline TensorD dark_channel(const TensorD& x, int window) {
    const int r = window / 2;
    TensorD y({1, x.h(), x.w()});
    for (int yy = 0; yy < x.h(); ++yy) {
        for (int xx = 0; xx < x.w(); ++xx) {
            double best = 1e300;
            for (int c = 0; c < x.c(); ++c) {
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const int sy = std::clamp(yy + dy, 0, x.h() - 1);
                        const int sx = std::clamp(xx + dx, 0, x.w() - 1);
                        best = std::min(best, x.at(c, sy, sx));
                    }
                }
            }
            y.at(0, yy, xx) = best;
        }
    }
    return y;
}

// Per-window least squares evaluated directly at every pixel.
inline TensorD guided_filter(const TensorD& g, const TensorD& p, int radius, double eps) {
    const int H = g.h(), W = g.w();
    TensorD a({1, H, W}), b({1, H, W});
    auto window_stats = [&](int cy, int cx, double& mg, double& mp, double& cov, double& var) {
        const int y0 = std::max(0, cy - radius), y1 = std::min(H - 1, cy + radius);
        const int x0 = std::max(0, cx - radius), x1 = std::min(W - 1, cx + radius);
        const double n = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
        mg = mp = 0.0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                mg += g.at(0, y, x);
                mp += p.at(0, y, x);
            }
        }
        mg /= n;
        mp /= n;
        cov = var = 0.0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                cov += (g.at(0, y, x) - mg) * (p.at(0, y, x) - mp);
                var += (g.at(0, y, x) - mg) * (g.at(0, y, x) - mg);
            }
        }
        cov /= n;
        var /= n;
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double mg, mp, cov, var;
            window_stats(y, x, mg, mp, cov, var);
            a.at(0, y, x) = cov / (var + eps);
            b.at(0, y, x) = mp - a.at(0, y, x) * mg;
        }
    }
    TensorD out({1, H, W});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int y0 = std::max(0, y - radius), y1 = std::min(H - 1, y + radius);
            const int x0 = std::max(0, x - radius), x1 = std::min(W - 1, x + radius);
            const double n = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
            double ma = 0.0, mb = 0.0;
            for (int sy = y0; sy <= y1; ++sy) {
                for (int sx = x0; sx <= x1; ++sx) {
                    ma += a.at(0, sy, sx);
                    mb += b.at(0, sy, sx);
                }
            }
            out.at(0, y, x) = (ma / n) * g.at(0, y, x) + mb / n;
        }
    }
    return out;
}

inline TensorD sobel_mag(const TensorD& x) {
    static constexpr int KX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static constexpr int KY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    TensorD y(x.shape());
    for (int c = 0; c < x.c(); ++c) {
        for (int yy = 0; yy < x.h(); ++yy) {
            for (int xx = 0; xx < x.w(); ++xx) {
                double gx = 0.0, gy = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const double v = x.at(c, std::clamp(yy + dy, 0, x.h() - 1),
                                               std::clamp(xx + dx, 0, x.w() - 1));
                        gx += KX[dy + 1][dx + 1] * v;
                        gy += KY[dy + 1][dx + 1] * v;
                    }
                }
                y.at(c, yy, xx) = std::abs(gx) + std::abs(gy);
            }
        }
    }
    return y;
}

}  // namespace oracles
