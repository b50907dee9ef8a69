#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mmgr/error.hpp"

namespace mmgr {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

// Dense row-major N-d array. Shape is fixed at construction; the scalar type
// is a template parameter so a whole run can be instantiated in either
// 32-bit or 64-bit precision.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        check_dims(shape_);
        data_.assign(shape_numel(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_dims(shape_);
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor: buffer length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    Tensor(Shape shape, std::initializer_list<T> data)
        : Tensor(std::move(shape), std::vector<T>(data)) {}

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    void fill(T v) { data_.assign(data_.size(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // Shape-preserving reinterpretation is the one mutation of metadata we
    // allow; element count must be identical.
    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != data_.size())
            throw ShapeError("reshape: " + shape_str(shape_) + " -> " + shape_str(s) +
                             " changes element count");
        Tensor r;
        r.shape_ = std::move(s);
        r.data_ = data_;
        return r;
    }

private:
    static void check_dims(const Shape& s) {
        for (std::size_t d : s)
            if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(s));
    }

    Shape shape_;
    std::vector<T> data_;
};

// dst += alpha * src, elementwise.
template <typename T>
Tensor<T>& axpy(Tensor<T>& dst, const Tensor<T>& src, T alpha) {
    if (!dst.same_shape(src))
        throw ShapeError("axpy: shape mismatch " + shape_str(dst.shape()) + " vs " +
                         shape_str(src.shape()));
    T* d = dst.data();
    const T* s = src.data();
    std::size_t n = dst.size();
    for (std::size_t i = 0; i < n; ++i) d[i] += alpha * s[i];
    return dst;
}

template <typename T>
void scale(Tensor<T>& t, T c) {
    for (auto& v : t) v *= c;
}

template <typename T>
T l2_norm(const Tensor<T>& t) {
    // accumulate in double so float-mode norms stay accurate
    double acc = 0.0;
    for (const auto& v : t) acc += static_cast<double>(v) * static_cast<double>(v);
    return static_cast<T>(std::sqrt(acc));
}

template <typename T>
T sum(const Tensor<T>& t) {
    double acc = 0.0;
    for (const auto& v : t) acc += static_cast<double>(v);
    return static_cast<T>(acc);
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (const auto& v : t)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

} // namespace mmgr
