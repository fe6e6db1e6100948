#pragma once

// Training objectives: restoration L1, gradient consistency, intensity
// consistency, and their weighted total. Graph forms carry analytic gradients;
// plain forms mirror them for evaluation and tests.

#include <stdexcept>

#include "irvf/graph.hpp"
#include "irvf/kernels.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

struct LossConfig {
    double alpha = 1.0;  // weight of the restoration L1 term

    void validate() const {
        if (alpha < 0.0) throw std::invalid_argument("loss config: alpha must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Graph losses
// ---------------------------------------------------------------------------

// Mean absolute error over all elements.
template <typename T>
typename Graph<T>::Id l1_restoration_g(Graph<T>& g, typename Graph<T>::Id pred,
                                       typename Graph<T>::Id target) {
    if (g.value(pred).shape() != g.value(target).shape()) {
        throw std::invalid_argument("l1_restoration: shape mismatch " + g.value(pred).shape().str() +
                                    " vs " + g.value(target).shape().str());
    }
    const T inv = static_cast<T>(1.0 / static_cast<double>(g.value(pred).size()));
    return g.mul_scalar(g.sum(g.abs(g.sub(pred, target))), inv);
}

// (1/HW) * sum_i || grad(F_i) - max(|grad(IR)|, |grad(GT_i)|) ||_1, i over RGB.
template <typename T>
typename Graph<T>::Id gradient_loss_g(Graph<T>& g, typename Graph<T>::Id fused,
                                      typename Graph<T>::Id ir, typename Graph<T>::Id gt) {
    if (g.value(fused).c() != 3 || g.value(gt).c() != 3 || g.value(ir).c() != 1) {
        throw std::invalid_argument("gradient_loss: expected fused/gt with 3 channels and ir with 1");
    }
    const auto gf = g.sobel_mag(fused);
    const auto gi = g.broadcast_channels(g.sobel_mag(ir), 3);
    const auto gg = g.sobel_mag(gt);
    const auto target = g.maximum(gi, gg);
    const T inv = static_cast<T>(1.0 / static_cast<double>(g.value(fused).shape().plane()));
    return g.mul_scalar(g.sum(g.abs(g.sub(gf, target))), inv);
}

// (1/HW) * sum_i || F_i - max(IR, GT_i) ||_1.
template <typename T>
typename Graph<T>::Id intensity_loss_g(Graph<T>& g, typename Graph<T>::Id fused,
                                       typename Graph<T>::Id ir, typename Graph<T>::Id gt) {
    if (g.value(fused).c() != 3 || g.value(gt).c() != 3 || g.value(ir).c() != 1) {
        throw std::invalid_argument("intensity_loss: expected fused/gt with 3 channels and ir with 1");
    }
    const auto ib = g.broadcast_channels(ir, 3);
    const auto target = g.maximum(ib, gt);
    const T inv = static_cast<T>(1.0 / static_cast<double>(g.value(fused).shape().plane()));
    return g.mul_scalar(g.sum(g.abs(g.sub(fused, target))), inv);
}

template <typename T>
struct TotalLossG {
    typename Graph<T>::Id l1;
    typename Graph<T>::Id grad;
    typename Graph<T>::Id intensity;
    typename Graph<T>::Id total;
};

template <typename T>
TotalLossG<T> total_loss_g(Graph<T>& g, typename Graph<T>::Id fused, typename Graph<T>::Id dehazed,
                           typename Graph<T>::Id ir, typename Graph<T>::Id gt, const LossConfig& cfg) {
    cfg.validate();
    TotalLossG<T> out;
    out.l1 = l1_restoration_g(g, dehazed, gt);
    out.grad = gradient_loss_g(g, fused, ir, gt);
    out.intensity = intensity_loss_g(g, fused, ir, gt);
    out.total = g.add(g.add(out.intensity, out.grad), g.mul_scalar(out.l1, static_cast<T>(cfg.alpha)));
    return out;
}

// ---------------------------------------------------------------------------
// Plain forms
// ---------------------------------------------------------------------------

template <typename T>
double l1_restoration(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("l1_restoration: shape mismatch " + pred.shape().str() + " vs " +
                                    target.shape().str());
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
    }
    return s / static_cast<double>(pred.size());
}

template <typename T>
Tensor<T> sobel_gradient(const Tensor<T>& image) {
    return kernels::sobel_mag_fwd<T>(image, nullptr, nullptr);
}

template <typename T>
double gradient_loss(const Tensor<T>& fused, const Tensor<T>& ir, const Tensor<T>& gt) {
    if (fused.c() != 3 || gt.c() != 3 || ir.c() != 1) {
        throw std::invalid_argument("gradient_loss: expected fused/gt with 3 channels and ir with 1");
    }
    const Tensor<T> gf = sobel_gradient(fused);
    const Tensor<T> gi = sobel_gradient(ir);
    const Tensor<T> gg = sobel_gradient(gt);
    const std::size_t P = fused.shape().plane();
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const T* fp = gf.plane(c);
        const T* gp = gg.plane(c);
        for (std::size_t i = 0; i < P; ++i) {
            const double target = std::max(static_cast<double>(gi[i]), static_cast<double>(gp[i]));
            s += std::abs(static_cast<double>(fp[i]) - target);
        }
    }
    return s / static_cast<double>(P);
}

template <typename T>
double intensity_loss(const Tensor<T>& fused, const Tensor<T>& ir, const Tensor<T>& gt) {
    if (fused.c() != 3 || gt.c() != 3 || ir.c() != 1) {
        throw std::invalid_argument("intensity_loss: expected fused/gt with 3 channels and ir with 1");
    }
    const std::size_t P = fused.shape().plane();
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const T* fp = fused.plane(c);
        const T* gp = gt.plane(c);
        for (std::size_t i = 0; i < P; ++i) {
            const double target = std::max(static_cast<double>(ir[i]), static_cast<double>(gp[i]));
            s += std::abs(static_cast<double>(fp[i]) - target);
        }
    }
    return s / static_cast<double>(P);
}

template <typename T>
double total_loss(const Tensor<T>& fused, const Tensor<T>& dehazed, const Tensor<T>& ir,
                  const Tensor<T>& gt, const LossConfig& cfg) {
    cfg.validate();
    return intensity_loss(fused, ir, gt) + gradient_loss(fused, ir, gt) +
           cfg.alpha * l1_restoration(dehazed, gt);
}

}  // namespace irvf
