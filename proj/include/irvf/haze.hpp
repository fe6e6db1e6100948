#pragma once

// Haze physics: synthesis through the atmospheric scattering model and
// per-pixel haze-density estimation (dark channel -> atmospheric light ->
// transmission -> guided filter). Plain-tensor functions for inference and a
// graph overload for the training path.

#include <array>
#include <numeric>
#include <vector>

#include "irvf/graph.hpp"
#include "irvf/kernels.hpp"
#include "irvf/ops.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

template <typename T>
struct HazeParams {
    std::array<T, 3> atmospheric_light{T(0.8), T(0.8), T(0.8)};  // per RGB channel, in (0,1]
    T beta = T(1);                                               // scattering coefficient per unit depth
    Tensor<T> depth;                                             // (1,H,W), non-negative
};

template <typename T>
struct HazeEstimate {
    Tensor<T> transmission;          // T, clamped to [0,1]
    Tensor<T> transmission_refined;  // T' after the guided filter
    Tensor<T> density;               // H = 1 - T'
    std::vector<T> airlight;         // estimated atmospheric light per channel
    T omega = T(0.95);
};

struct HdeOptions {
    int window = 7;               // dark-channel window at feature resolution
    int gf_radius = 8;            // guided-filter radius
    double gf_eps = 1e-4;         // guided-filter regularizer
    double omega = 0.95;          // transmission attenuation constant
    double airlight_floor = 0.05; // numeric guard before inversion

    static HdeOptions image_resolution() {
        HdeOptions o;
        o.window = 15;
        return o;
    }
};

template <typename T>
Tensor<T> transmission_from_depth(const Tensor<T>& depth, T beta) {
    Tensor<T> t(depth.shape());
    for (std::size_t i = 0; i < depth.size(); ++i) {
        t[i] = static_cast<T>(std::exp(-static_cast<double>(beta) * depth[i]));
    }
    return t;
}

// I(x) = J(x) * t(x) + A * (1 - t(x)), t = exp(-beta * d).
template <typename T>
Tensor<T> synthesize_haze(const Tensor<T>& clear, const HazeParams<T>& params) {
    if (clear.c() != 3) {
        throw std::invalid_argument("synthesize_haze: clear image channel axis is " +
                                    std::to_string(clear.c()) + ", expected 3");
    }
    if (params.depth.h() != clear.h() || params.depth.w() != clear.w() || params.depth.c() != 1) {
        throw std::invalid_argument("synthesize_haze: depth map axis is " + params.depth.shape().str() +
                                    ", expected (1," + std::to_string(clear.h()) + "," +
                                    std::to_string(clear.w()) + ")");
    }
    if (params.beta < T(0)) throw std::invalid_argument("synthesize_haze: negative beta");
    for (std::size_t i = 0; i < params.depth.size(); ++i) {
        if (params.depth[i] < T(0)) throw std::invalid_argument("synthesize_haze: negative depth");
    }
    const Tensor<T> t = transmission_from_depth(params.depth, params.beta);
    Tensor<T> out(clear.shape());
    const std::size_t P = clear.shape().plane();
    for (int c = 0; c < 3; ++c) {
        const T a = params.atmospheric_light[static_cast<std::size_t>(c)];
        const T* jp = clear.plane(c);
        T* op = out.plane(c);
        for (std::size_t i = 0; i < P; ++i) op[i] = jp[i] * t[i] + a * (T(1) - t[i]);
    }
    return out;
}

template <typename T>
Tensor<T> dark_channel(const Tensor<T>& input, int window) {
    return kernels::dark_channel_fwd(input, window, nullptr);
}

// Indices of the brightest 0.1% dark-channel pixels (at least one), sorted by
// value descending with flat-index order breaking ties.
template <typename T>
std::vector<std::uint32_t> brightest_dark_indices(const Tensor<T>& dark) {
    const std::size_t n = dark.size();
    const std::size_t k = std::max<std::size_t>(1, n / 1000);
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (dark[a] != dark[b]) return dark[a] > dark[b];
        return a < b;
    });
    idx.resize(k);
    return idx;
}

// Mean feature value per channel over the brightest dark-channel pixels.
template <typename T>
std::vector<T> estimate_atmospheric_light(const Tensor<T>& features, const Tensor<T>& dark) {
    if (features.h() != dark.h() || features.w() != dark.w()) {
        throw std::invalid_argument("estimate_atmospheric_light: spatial axes differ, " +
                                    features.shape().str() + " vs " + dark.shape().str());
    }
    const auto idx = brightest_dark_indices(dark);
    std::vector<T> a(static_cast<std::size_t>(features.c()));
    for (int c = 0; c < features.c(); ++c) {
        const T* fp = features.plane(c);
        double s = 0.0;
        for (std::uint32_t p : idx) s += static_cast<double>(fp[p]);
        a[static_cast<std::size_t>(c)] = static_cast<T>(s / static_cast<double>(idx.size()));
    }
    return a;
}

// T = 1 - omega * DCG(F_tilde / A), clamped to [0,1]. A components are clamped
// to the floor before inversion rather than rejected.
template <typename T>
Tensor<T> transmission_map(const Tensor<T>& f_tilde, const std::vector<T>& a_hat, T omega,
                           int window, T airlight_floor = T(0.05)) {
    if (static_cast<int>(a_hat.size()) != f_tilde.c()) {
        throw std::invalid_argument("transmission_map: airlight channel axis is " +
                                    std::to_string(a_hat.size()) + ", features have " +
                                    std::to_string(f_tilde.c()));
    }
    Tensor<T> ratio(f_tilde.shape());
    const std::size_t P = f_tilde.shape().plane();
    for (int c = 0; c < f_tilde.c(); ++c) {
        const T a = std::max(a_hat[static_cast<std::size_t>(c)], airlight_floor);
        const T* fp = f_tilde.plane(c);
        T* rp = ratio.plane(c);
        for (std::size_t i = 0; i < P; ++i) rp[i] = fp[i] / a;
    }
    Tensor<T> dc = dark_channel(ratio, window);
    Tensor<T> t(dc.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = std::clamp(static_cast<T>(T(1) - omega * dc[i]), T(0), T(1));
    }
    return t;
}

// Classic local-linear-model guided filter with clamped box windows.
template <typename T>
Tensor<T> guided_filter(const Tensor<T>& guide, const Tensor<T>& input, int radius, T epsilon) {
    if (guide.shape() != input.shape()) {
        throw std::invalid_argument("guided_filter: guide axis " + guide.shape().str() +
                                    " differs from input " + input.shape().str());
    }
    Tensor<T> gp(guide.shape());
    Tensor<T> gg(guide.shape());
    for (std::size_t i = 0; i < guide.size(); ++i) {
        gp[i] = guide[i] * input[i];
        gg[i] = guide[i] * guide[i];
    }
    const Tensor<T> mg = kernels::box_filter_fwd(guide, radius, true);
    const Tensor<T> mp = kernels::box_filter_fwd(input, radius, true);
    const Tensor<T> mgp = kernels::box_filter_fwd(gp, radius, true);
    const Tensor<T> mgg = kernels::box_filter_fwd(gg, radius, true);
    Tensor<T> a(guide.shape());
    Tensor<T> b(guide.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T var = mgg[i] - mg[i] * mg[i];
        const T cov = mgp[i] - mg[i] * mp[i];
        a[i] = cov / (var + epsilon);
        b[i] = mp[i] - a[i] * mg[i];
    }
    const Tensor<T> ma = kernels::box_filter_fwd(a, radius, true);
    const Tensor<T> mb = kernels::box_filter_fwd(b, radius, true);
    Tensor<T> out(guide.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ma[i] * guide[i] + mb[i];
    return out;
}

// Full haze-density chain on visible features: CAP + replication -> dark
// channel -> atmospheric light -> transmission -> guided filter -> H = 1 - T'.
template <typename T>
HazeEstimate<T> haze_density(const Tensor<T>& visible_features, const HdeOptions& opts = {}) {
    const Tensor<T> cap = channel_average_pool(visible_features);
    const Tensor<T> f_tilde = replicate_channels(cap, visible_features.c());
    const Tensor<T> dark = dark_channel(f_tilde, opts.window);
    const std::vector<T> a_hat = estimate_atmospheric_light(f_tilde, dark);

    HazeEstimate<T> est;
    est.omega = static_cast<T>(opts.omega);
    est.airlight = a_hat;
    est.transmission = transmission_map(f_tilde, a_hat, est.omega, opts.window,
                                        static_cast<T>(opts.airlight_floor));
    Tensor<T> refined =
        guided_filter(cap, est.transmission, opts.gf_radius, static_cast<T>(opts.gf_eps));
    for (std::size_t i = 0; i < refined.size(); ++i) refined[i] = std::clamp(refined[i], T(0), T(1));
    est.transmission_refined = std::move(refined);
    est.density = Tensor<T>(est.transmission_refined.shape());
    for (std::size_t i = 0; i < est.density.size(); ++i) {
        est.density[i] = T(1) - est.transmission_refined[i];
    }
    return est;
}

// ---------------------------------------------------------------------------
// Graph overloads for the training path.
// ---------------------------------------------------------------------------

template <typename T>
typename Graph<T>::Id guided_filter_g(Graph<T>& g, typename Graph<T>::Id guide,
                                      typename Graph<T>::Id input, int radius, T epsilon) {
    const auto mg = g.box_mean(guide, radius);
    const auto mp = g.box_mean(input, radius);
    const auto mgp = g.box_mean(g.mul(guide, input), radius);
    const auto mgg = g.box_mean(g.mul(guide, guide), radius);
    const auto var = g.sub(mgg, g.mul(mg, mg));
    const auto cov = g.sub(mgp, g.mul(mg, mp));
    const auto a = g.div(cov, g.add_scalar(var, epsilon));
    const auto b = g.sub(mp, g.mul(a, mg));
    return g.add(g.mul(g.box_mean(a, radius), guide), g.box_mean(b, radius));
}

template <typename T>
struct HazeEstimateG {
    typename Graph<T>::Id transmission;
    typename Graph<T>::Id transmission_refined;
    typename Graph<T>::Id density;
    typename Graph<T>::Id airlight;
};

template <typename T>
HazeEstimateG<T> haze_density_g(Graph<T>& g, typename Graph<T>::Id visible_features,
                                const HdeOptions& opts = {}) {
    const int C = g.value(visible_features).c();
    const auto cap = g.channel_mean(visible_features);
    const auto f_tilde = g.broadcast_channels(cap, C);
    const auto dark = g.dark_channel(f_tilde, opts.window);
    const auto idx = brightest_dark_indices(g.value(dark));
    const auto a_raw = g.gather_mean_spatial(f_tilde, idx);
    const auto a = g.clamp(a_raw, static_cast<T>(opts.airlight_floor),
                           std::numeric_limits<T>::infinity());
    const auto ratio = g.div(f_tilde, a);
    const auto dc = g.dark_channel(ratio, opts.window);
    const auto t = g.clamp(g.add_scalar(g.mul_scalar(dc, static_cast<T>(-opts.omega)), T(1)), T(0), T(1));
    const auto refined = g.clamp(guided_filter_g(g, cap, t, opts.gf_radius, static_cast<T>(opts.gf_eps)),
                                 T(0), T(1));
    HazeEstimateG<T> est;
    est.transmission = t;
    est.transmission_refined = refined;
    est.density = g.add_scalar(g.mul_scalar(refined, T(-1)), T(1));
    est.airlight = a;
    return est;
}

}  // namespace irvf
