#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace irvf {

// Dense rank-3 shape: channels x height x width.
struct Shape {
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    bool operator==(const Shape& o) const { return c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense rank-3 tensor, channel-major then row then column. The universal
// carrier for images, feature maps and per-pixel maps. Plain value type;
// operations on tensors are pure functions.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(check_size(s), fill) {}

    Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
        if (data_.size() != shape_.numel()) {
            throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_.str());
        }
    }

    static Tensor constant(Shape s, T v) { return Tensor(s, v); }

    const Shape& shape() const { return shape_; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T* plane(int ch) { return data_.data() + static_cast<std::size_t>(ch) * shape_.plane(); }
    const T* plane(int ch) const { return data_.data() + static_cast<std::size_t>(ch) * shape_.plane(); }

    T& at(int ch, int y, int x) { return data_[flat(ch, y, x)]; }
    T at(int ch, int y, int x) const { return data_[flat(ch, y, x)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    std::size_t flat(int ch, int y, int x) const {
        return (static_cast<std::size_t>(ch) * shape_.h + y) * shape_.w + x;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    T min() const { return *std::min_element(data_.begin(), data_.end()); }
    T max() const { return *std::max_element(data_.begin(), data_.end()); }

    double sum() const {
        double s = 0.0;
        for (T v : data_) s += static_cast<double>(v);
        return s;
    }
    double mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    static std::size_t check_size(Shape s) {
        if (s.c < 0 || s.h < 0 || s.w < 0) {
            throw std::invalid_argument("negative tensor dimension in " + s.str());
        }
        return s.numel();
    }

    Shape shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
inline double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

}  // namespace irvf
