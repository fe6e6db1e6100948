#pragma once

// AdamW with decoupled weight decay, plus the cosine-annealed learning-rate
// schedule used for training.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "irvf/params.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

inline double cosine_lr(int step, int total_steps, double lr_init, double lr_final) {
    if (step < 0 || step > total_steps) {
        throw std::invalid_argument("cosine_lr: step " + std::to_string(step) + " outside [0," +
                                    std::to_string(total_steps) + "]");
    }
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(3.14159265358979323846 * t));
}

template <typename T>
class AdamW {
public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.01)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    void attach(const ParamStore<T>& ps) {
        m_.clear();
        v_.clear();
        m_.reserve(static_cast<std::size_t>(ps.count()));
        v_.reserve(static_cast<std::size_t>(ps.count()));
        for (int i = 0; i < ps.count(); ++i) {
            m_.emplace_back(ps.tensor(i).shape());
            v_.emplace_back(ps.tensor(i).shape());
        }
        t_ = 0;
    }

    void step(ParamStore<T>& ps, const std::vector<Tensor<T>>& grads, double lr) {
        if (static_cast<int>(grads.size()) != ps.count() || m_.size() != grads.size()) {
            throw std::invalid_argument("adamw: gradient count does not match parameters");
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (int p = 0; p < ps.count(); ++p) {
            Tensor<T>& w = ps.tensor(p);
            const Tensor<T>& grad = grads[static_cast<std::size_t>(p)];
            if (grad.shape() != w.shape()) {
                throw std::invalid_argument("adamw: gradient shape mismatch for '" + ps.name(p) + "'");
            }
            Tensor<T>& m = m_[static_cast<std::size_t>(p)];
            Tensor<T>& v = v_[static_cast<std::size_t>(p)];
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = static_cast<double>(grad[i]);
                const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * gi;
                const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                const double update = mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * static_cast<double>(w[i]);
                w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * update);
            }
        }
    }

    std::uint32_t steps_taken() const { return t_; }
    void set_steps_taken(std::uint32_t t) { t_ = t; }

    std::vector<Tensor<T>>& first_moments() { return m_; }
    std::vector<Tensor<T>>& second_moments() { return v_; }
    const std::vector<Tensor<T>>& first_moments() const { return m_; }
    const std::vector<Tensor<T>>& second_moments() const { return v_; }

private:
    double beta1_, beta2_, eps_, weight_decay_;
    std::uint32_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

}  // namespace irvf
