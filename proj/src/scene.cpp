#include "irvf/scene.hpp"

#include <algorithm>
#include <cmath>

namespace irvf {

namespace {

struct Blob {
    double cy, cx, sy, sx, angle;
};

Blob random_blob(Rng& rng, int h, int w) {
    Blob b;
    b.cy = rng.uniform(0.1, 0.9) * h;
    b.cx = rng.uniform(0.1, 0.9) * w;
    b.sy = rng.uniform(0.06, 0.22) * h;
    b.sx = rng.uniform(0.06, 0.22) * w;
    b.angle = rng.uniform(0.0, 3.14159265358979323846);
    return b;
}

double blob_at(const Blob& b, int y, int x) {
    const double ca = std::cos(b.angle), sa = std::sin(b.angle);
    const double dy = y - b.cy, dx = x - b.cx;
    const double u = (ca * dx + sa * dy) / b.sx;
    const double v = (-sa * dx + ca * dy) / b.sy;
    return std::exp(-0.5 * (u * u + v * v));
}

void add_rect(Rng& rng, TensorD& img, int channel_lo, int channel_hi, double amp_lo, double amp_hi) {
    const int h = img.h(), w = img.w();
    const int y0 = rng.uniform_int(h * 3 / 4);
    const int x0 = rng.uniform_int(w * 3 / 4);
    const int y1 = std::min(h - 1, y0 + 2 + rng.uniform_int(h / 3));
    const int x1 = std::min(w - 1, x0 + 2 + rng.uniform_int(w / 3));
    for (int c = channel_lo; c <= channel_hi; ++c) {
        const double amp = rng.uniform(amp_lo, amp_hi);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) img.at(c, y, x) += amp;
        }
    }
}

}  // namespace

TensorD make_depth(Rng& rng, int h, int w, DepthFamily family) {
    TensorD d({1, h, w});
    switch (family) {
        case DepthFamily::Ramp: {
            const double scale = rng.uniform(1.5, 2.5);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    d.at(0, y, x) = scale * static_cast<double>(x) / std::max(1, w - 1);
                }
            }
            break;
        }
        case DepthFamily::Radial: {
            const double scale = rng.uniform(1.5, 2.5);
            const double cy = rng.uniform(0.3, 0.7) * h;
            const double cx = rng.uniform(0.3, 0.7) * w;
            const double maxr = std::hypot(std::max(cy, h - cy), std::max(cx, w - cx));
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    d.at(0, y, x) = scale * std::hypot(y - cy, x - cx) / maxr;
                }
            }
            break;
        }
        case DepthFamily::Step: {
            const double near = rng.uniform(0.1, 0.4);
            const double far = rng.uniform(1.6, 2.5);
            const bool horizontal = rng.coin();
            const int split = horizontal ? (h / 4 + rng.uniform_int(std::max(1, h / 2)))
                                         : (w / 4 + rng.uniform_int(std::max(1, w / 2)));
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const bool far_side = horizontal ? (y >= split) : (x >= split);
                    d.at(0, y, x) = far_side ? far : near;
                }
            }
            break;
        }
    }
    return d;
}

Scene make_scene(Rng& rng, int h, int w, DepthFamily family) {
    Scene s;
    s.depth = make_depth(rng, h, w, family);
    s.beta = rng.uniform(0.6, 1.8);
    const double a = rng.uniform(0.7, 1.0);
    s.airlight = {a, a, a};

    // Clear visible image: dim base, shared blob geometry with per-channel
    // amplitudes, a few hard-edged rectangles, light texture noise. Kept below
    // the airlight so dark-channel statistics behave.
    s.clear = TensorD({3, h, w});
    const double base = rng.uniform(0.05, 0.12);
    for (std::size_t i = 0; i < s.clear.size(); ++i) s.clear[i] = base;

    const int nblobs = 5 + rng.uniform_int(4);
    std::vector<Blob> blobs;
    for (int bi = 0; bi < nblobs; ++bi) {
        const Blob b = random_blob(rng, h, w);
        blobs.push_back(b);
        const double amp_r = rng.uniform(0.05, 0.65);
        const double amp_g = rng.uniform(0.05, 0.65);
        const double amp_b = rng.uniform(0.05, 0.65);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double v = blob_at(b, y, x);
                s.clear.at(0, y, x) += amp_r * v;
                s.clear.at(1, y, x) += amp_g * v;
                s.clear.at(2, y, x) += amp_b * v;
            }
        }
    }
    const int nrects = 2 + rng.uniform_int(2);
    for (int ri = 0; ri < nrects; ++ri) add_rect(rng, s.clear, 0, 2, 0.04, 0.3);
    for (std::size_t i = 0; i < s.clear.size(); ++i) {
        s.clear[i] = std::clamp(s.clear[i] + rng.uniform(-0.015, 0.015), 0.0, 0.9);
    }
    // Dark speckle (shadow texture). Natural images keep some channel near
    // zero in every patch; the sprinkle gives the synthetic scenes the same
    // dark-channel statistics.
    const std::size_t plane = s.clear.shape().plane();
    for (std::size_t i = 0; i < plane; ++i) {
        if (rng.uniform() < 0.05) {
            const double scale = rng.uniform(0.0, 0.2);
            s.clear[i] *= scale;
            s.clear[plane + i] *= scale;
            s.clear[2 * plane + i] *= scale;
        }
    }

    // Infrared: smooth background, a subset of the visible blobs as warm
    // structure, plus hot spots with no visible counterpart.
    s.ir = TensorD({1, h, w});
    const double ir_lo = rng.uniform(0.08, 0.15);
    const double ir_hi = ir_lo + rng.uniform(0.1, 0.2);
    for (int y = 0; y < h; ++y) {
        const double t = static_cast<double>(y) / std::max(1, h - 1);
        for (int x = 0; x < w; ++x) s.ir.at(0, y, x) = ir_lo + (ir_hi - ir_lo) * t;
    }
    for (std::size_t bi = 0; bi < blobs.size(); bi += 2) {
        const double amp = rng.uniform(0.25, 0.7);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) s.ir.at(0, y, x) += amp * blob_at(blobs[bi], y, x);
        }
    }
    const int nhot = 1 + rng.uniform_int(3);
    for (int hi = 0; hi < nhot; ++hi) {
        Blob b = random_blob(rng, h, w);
        b.sy *= 0.5;
        b.sx *= 0.5;
        const double amp = rng.uniform(0.5, 0.9);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) s.ir.at(0, y, x) += amp * blob_at(b, y, x);
        }
    }
    add_rect(rng, s.ir, 0, 0, 0.1, 0.4);
    for (std::size_t i = 0; i < s.ir.size(); ++i) {
        s.ir[i] = std::clamp(s.ir[i] + rng.uniform(-0.01, 0.01), 0.0, 1.0);
    }

    HazeParams<double> hp;
    hp.beta = s.beta;
    hp.depth = s.depth;
    hp.atmospheric_light = {s.airlight[0], s.airlight[1], s.airlight[2]};
    s.hazy = synthesize_haze(s.clear, hp);

    s.haze_gt = TensorD({1, h, w});
    for (std::size_t i = 0; i < s.haze_gt.size(); ++i) {
        s.haze_gt[i] = 1.0 - std::exp(-s.beta * s.depth[i]);
    }
    return s;
}

}  // namespace irvf
