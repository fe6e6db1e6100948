#pragma once

// Finite-difference verification harness for analytic gradients.

#include <functional>
#include <stdexcept>
#include <vector>

#include "irvf/graph.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

// Central-difference gradient of f at params, compared elementwise against the
// supplied analytic gradient. Returns max |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
template <typename T>
double finite_diff_check(const std::function<double(const std::vector<Tensor<T>>&)>& f,
                         std::vector<Tensor<T>> params, const std::vector<Tensor<T>>& analytic,
                         double eps) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");
    if (analytic.size() != params.size()) {
        throw std::invalid_argument("finite_diff_check: analytic gradient count mismatch");
    }
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (analytic[p].shape() != params[p].shape()) {
            throw std::invalid_argument("finite_diff_check: gradient shape mismatch at param " +
                                        std::to_string(p));
        }
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const T saved = params[p][i];
            params[p][i] = static_cast<T>(static_cast<double>(saved) + eps);
            const double fp = f(params);
            params[p][i] = static_cast<T>(static_cast<double>(saved) - eps);
            const double fm = f(params);
            params[p][i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw std::runtime_error("finite_diff_check: non-finite objective value");
            }
            const double g_fd = (fp - fm) / (2.0 * eps);
            const double g_a = static_cast<double>(analytic[p][i]);
            const double denom = std::max({std::abs(g_a), std::abs(g_fd), 1e-8});
            worst = std::max(worst, std::abs(g_a - g_fd) / denom);
        }
    }
    return worst;
}

// Convenience: derive the analytic gradient from the autodiff tape. `build`
// receives a graph plus one differentiable leaf per parameter tensor and must
// return a scalar root node.
template <typename T>
double finite_diff_check_graph(
    const std::vector<Tensor<T>>& params,
    const std::function<typename Graph<T>::Id(Graph<T>&, const std::vector<typename Graph<T>::Id>&)>&
        build,
    double eps) {
    Graph<T> g;
    std::vector<typename Graph<T>::Id> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(g.leaf(p, /*requires_grad=*/true));
    const auto root = build(g, ids);
    g.backward(root);

    std::vector<Tensor<T>> analytic;
    analytic.reserve(params.size());
    for (auto id : ids) analytic.push_back(g.grad(id));

    auto f = [&build](const std::vector<Tensor<T>>& ps) {
        Graph<T> fg;
        std::vector<typename Graph<T>::Id> fids;
        fids.reserve(ps.size());
        for (const auto& p : ps) fids.push_back(fg.leaf(p, false));
        return static_cast<double>(fg.scalar(build(fg, fids)));
    };
    return finite_diff_check<T>(f, params, analytic, eps);
}

}  // namespace irvf
