#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace s3tta {

/// Dense row-major tensor. Feature maps use [C, H, W], conv weights
/// [C_out, C_in * 9], vectors [N].
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
    TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) throw std::invalid_argument("tensor: shape/data size mismatch");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    // [C, H, W] accessors
    T& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * dim(1) + y) * dim(2) + x];
    }
    T at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * dim(1) + y) * dim(2) + x];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    TensorT& operator+=(const TensorT& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }
    TensorT& operator*=(T s) {
        for (auto& v : data) v *= s;
        return *this;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
std::vector<TensorT<T>> zeros_like_all(const std::vector<TensorT<T>*>& params) {
    std::vector<TensorT<T>> out;
    out.reserve(params.size());
    for (const auto* p : params) out.emplace_back(p->shape);
    return out;
}

}  // namespace s3tta
