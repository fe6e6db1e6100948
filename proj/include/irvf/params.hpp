#pragma once

// Named parameter registry. Registration order is fixed by model construction
// and defines the serialization order, the training-step leaf binding and the
// optimizer state layout.

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "irvf/graph.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

template <typename T>
class ParamStore {
public:
    int add(const std::string& name, Tensor<T> init) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        const int id = static_cast<int>(tensors_.size());
        index_.emplace(name, id);
        names_.push_back(name);
        tensors_.push_back(std::move(init));
        return id;
    }

    int count() const { return static_cast<int>(tensors_.size()); }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& t : tensors_) n += t.size();
        return n;
    }

    Tensor<T>& tensor(int id) { return tensors_.at(static_cast<std::size_t>(id)); }
    const Tensor<T>& tensor(int id) const { return tensors_.at(static_cast<std::size_t>(id)); }
    const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    // One differentiable leaf per parameter, aligned with store indices.
    std::vector<typename Graph<T>::Id> bind(Graph<T>& g, bool requires_grad = true) const {
        std::vector<typename Graph<T>::Id> ids;
        ids.reserve(tensors_.size());
        for (const auto& t : tensors_) ids.push_back(g.leaf(t, requires_grad));
        return ids;
    }

private:
    std::vector<Tensor<T>> tensors_;
    std::vector<std::string> names_;
    std::map<std::string, int> index_;
};

}  // namespace irvf
