#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eclf/util.hpp"

namespace eclf {

/// Dense row-major tensor. Shape dimensions are positive; data length always
/// equals the product of the shape.
template <typename S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(checked_count(shape)), S(0));
    }

    TensorT(std::vector<int> s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
        require(static_cast<std::int64_t>(data.size()) == checked_count(shape),
                "tensor data length does not match shape product");
    }

    static std::int64_t checked_count(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            require(d > 0, "tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    S& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const S& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    /// Reinterprets the buffer under a new shape with equal element count.
    TensorT reshaped(std::vector<int> s) const {
        require(checked_count(s) == size(), "reshape changes element count");
        return TensorT(std::move(s), data);
    }

    bool all_finite() const {
        for (S v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

template <typename S>
std::string shape_str(const TensorT<S>& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

/// Boundary validation: rejects NaN/Inf with a message naming the carrier.
template <typename S>
void check_finite(const TensorT<S>& t, const std::string& what) {
    if (!t.all_finite()) throw std::runtime_error(what + ": non-finite value in tensor " + shape_str(t));
}

using Tensor = TensorT<real>;

}  // namespace eclf
