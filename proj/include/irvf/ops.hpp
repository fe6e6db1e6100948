#pragma once

// Plain-tensor operation surface. These call the same forward kernels the
// autodiff graph records, so inference and training share one compute path.

#include "irvf/kernels.hpp"
#include "irvf/rng.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

// Convolution parameters. kernel is (outC, inC, k*k) row-major, bias (outC,1,1).
template <typename T>
struct ConvParams {
    Tensor<T> kernel;
    Tensor<T> bias;
    int k = 1;
    int stride = 1;
    int padding = 0;

    int out_c() const { return kernel.c(); }
    int in_c() const { return kernel.h(); }

    static ConvParams make(int out_c, int in_c, int k, int stride, int padding) {
        ConvParams p;
        p.kernel = Tensor<T>({out_c, in_c, k * k});
        p.bias = Tensor<T>({out_c, 1, 1});
        p.k = k;
        p.stride = stride;
        p.padding = padding;
        return p;
    }

    // Kaiming-uniform style fan-in init.
    void init(Rng& rng) {
        const double fan_in = static_cast<double>(in_c()) * k * k;
        const double bound = std::sqrt(1.0 / fan_in);
        rng.fill_uniform(kernel, -bound, bound);
        rng.fill_uniform(bias, -bound, bound);
    }

    static ConvParams identity_1x1(int c) {
        ConvParams p = make(c, c, 1, 1, 0);
        for (int i = 0; i < c; ++i) p.kernel.at(i, i, 0) = T(1);
        return p;
    }

    static ConvParams identity_3x3(int c) {
        ConvParams p = make(c, c, 3, 1, 1);
        for (int i = 0; i < c; ++i) p.kernel.at(i, i, 4) = T(1);
        return p;
    }
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p) {
    return kernels::conv2d_fwd(x, p.kernel, p.bias, p.k, p.stride, p.padding);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
    return kernels::softmax_channels_fwd(x);
}

// Per-channel spatial mean, returned as a length-C vector.
template <typename T>
std::vector<T> global_average_pool(const Tensor<T>& x) {
    Tensor<T> g = kernels::gap_fwd(x);
    return std::vector<T>(g.data(), g.data() + g.size());
}

// Mean over channels, kept as a 1xHxW map.
template <typename T>
Tensor<T> channel_average_pool(const Tensor<T>& x) {
    return kernels::channel_mean_fwd(x);
}

template <typename T>
Tensor<T> replicate_channels(const Tensor<T>& x, int c) {
    if (x.c() != 1) {
        throw std::invalid_argument("replicate_channels: channel axis is " + std::to_string(x.c()) +
                                    ", expected 1");
    }
    Tensor<T> y({c, x.h(), x.w()});
    const std::size_t P = x.shape().plane();
    for (int ch = 0; ch < c; ++ch) std::copy(x.data(), x.data() + P, y.plane(ch));
    return y;
}

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
    return kernels::bilinear_resize_fwd(x, out_h, out_w);
}

// Elementwise F_a - F_b; removes shared content, keeps modality-unique content.
template <typename T>
Tensor<T> difference_features(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("difference_features: shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
    }
    Tensor<T> d(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

template <typename T>
Tensor<T> clamp01(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], T(0), T(1));
    return y;
}

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("psnr: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse <= 0.0) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace irvf
