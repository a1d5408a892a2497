#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "s3tta/rng.hpp"
#include "s3tta/tensor.hpp"

namespace s3tta {

namespace detail {

inline int reflect101_idx(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

template <typename T>
std::vector<T>& scratch_a() {
    thread_local std::vector<T> buf;
    return buf;
}
template <typename T>
std::vector<T>& scratch_b() {
    thread_local std::vector<T> buf;
    return buf;
}

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// col layout: [Cin*9, H*W]; kernel slot k = ci*9 + (ky+1)*3 + (kx+1),
/// borders resolved by reflect-101.
template <typename T>
void im2col3x3(const TensorT<T>& x, T* col) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < c; ++ci) {
        const T* plane = x.data.data() + static_cast<std::size_t>(ci) * hw;
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                T* dst = col + (static_cast<std::size_t>(ci) * 9 + (ky + 1) * 3 + (kx + 1)) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = reflect101_idx(y + ky, h);
                    const T* srow = plane + static_cast<std::size_t>(sy) * w;
                    T* drow = dst + static_cast<std::size_t>(y) * w;
                    if (kx == 0) {
                        for (int xx = 0; xx < w; ++xx) drow[xx] = srow[xx];
                    } else {
                        for (int xx = 0; xx < w; ++xx) drow[xx] = srow[reflect101_idx(xx + kx, w)];
                    }
                }
            }
        }
    }
}

/// Transpose of im2col3x3: scatter-add col gradients back to input positions.
template <typename T>
void col2im3x3_add(const T* dcol, int c, int h, int w, TensorT<T>& dx) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < c; ++ci) {
        T* plane = dx.data.data() + static_cast<std::size_t>(ci) * hw;
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                const T* src = dcol + (static_cast<std::size_t>(ci) * 9 + (ky + 1) * 3 + (kx + 1)) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = reflect101_idx(y + ky, h);
                    T* drow = plane + static_cast<std::size_t>(sy) * w;
                    const T* srow = src + static_cast<std::size_t>(y) * w;
                    for (int xx = 0; xx < w; ++xx) drow[reflect101_idx(xx + kx, w)] += srow[xx];
                }
            }
        }
    }
}

}  // namespace detail

// ---- 3x3 convolution, stride 1, reflect padding ---------------------------

template <typename T>
struct ConvCache {
    TensorT<T> input;
};

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0;
    TensorT<T> w;  // [out_ch, in_ch*9]
    TensorT<T> b;  // [out_ch]

    Conv2d() = default;
    Conv2d(int in, int out) : in_ch(in), out_ch(out), w({out, in * 9}), b({out}) {}

    void init_he(RandomGen& rng, T bias_value = T(0)) {
        const double stddev = std::sqrt(2.0 / (in_ch * 9));
        for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, stddev));
        for (auto& v : b.data) v = bias_value;
    }

    TensorT<T> forward(const TensorT<T>& x) const {
        if (x.dim(0) != in_ch) throw std::invalid_argument("conv: channel mismatch");
        const int h = x.dim(1), wd = x.dim(2);
        const std::size_t hw = static_cast<std::size_t>(h) * wd;
        auto& col = detail::scratch_a<T>();
        col.resize(static_cast<std::size_t>(in_ch) * 9 * hw);
        detail::im2col3x3(x, col.data());

        TensorT<T> y({out_ch, h, wd});
        Eigen::Map<const detail::MatRM<T>> W(w.data.data(), out_ch, in_ch * 9);
        Eigen::Map<const detail::MatRM<T>> C(col.data(), in_ch * 9, static_cast<Eigen::Index>(hw));
        Eigen::Map<detail::MatRM<T>> Y(y.data.data(), out_ch, static_cast<Eigen::Index>(hw));
        Y.noalias() = W * C;
        for (int oc = 0; oc < out_ch; ++oc) Y.row(oc).array() += b.data[oc];
        return y;
    }

    TensorT<T> forward(const TensorT<T>& x, ConvCache<T>& cache) const {
        cache.input = x;
        return forward(x);
    }

    /// Accumulates into dw/db; returns gradient w.r.t. the input.
    TensorT<T> backward(const ConvCache<T>& cache, const TensorT<T>& dy, TensorT<T>& dw,
                        TensorT<T>& db) const {
        const TensorT<T>& x = cache.input;
        const int h = x.dim(1), wd = x.dim(2);
        const std::size_t hw = static_cast<std::size_t>(h) * wd;

        auto& col = detail::scratch_a<T>();
        col.resize(static_cast<std::size_t>(in_ch) * 9 * hw);
        detail::im2col3x3(x, col.data());

        Eigen::Map<const detail::MatRM<T>> C(col.data(), in_ch * 9, static_cast<Eigen::Index>(hw));
        Eigen::Map<const detail::MatRM<T>> DY(dy.data.data(), out_ch, static_cast<Eigen::Index>(hw));
        Eigen::Map<detail::MatRM<T>> DW(dw.data.data(), out_ch, in_ch * 9);
        DW.noalias() += DY * C.transpose();
        // fixed-order accumulation; vectorized reductions would make the sum
        // depend on buffer alignment and break run-to-run reproducibility
        for (int oc = 0; oc < out_ch; ++oc) {
            double s = 0.0;
            const T* row = dy.data.data() + static_cast<std::size_t>(oc) * hw;
            for (std::size_t i = 0; i < hw; ++i) s += row[i];
            db.data[oc] += static_cast<T>(s);
        }

        auto& dcol = detail::scratch_b<T>();
        dcol.resize(col.size());
        Eigen::Map<const detail::MatRM<T>> W(w.data.data(), out_ch, in_ch * 9);
        Eigen::Map<detail::MatRM<T>> DC(dcol.data(), in_ch * 9, static_cast<Eigen::Index>(hw));
        DC.noalias() = W.transpose() * DY;

        TensorT<T> dx({in_ch, h, wd});
        detail::col2im3x3_add(dcol.data(), in_ch, h, wd, dx);
        return dx;
    }

    /// Input gradient only; used when the layer's own weights are frozen.
    TensorT<T> backward_data(const ConvCache<T>& cache, const TensorT<T>& dy) const {
        const int h = cache.input.dim(1), wd = cache.input.dim(2);
        const std::size_t hw = static_cast<std::size_t>(h) * wd;
        auto& dcol = detail::scratch_b<T>();
        dcol.resize(static_cast<std::size_t>(in_ch) * 9 * hw);
        Eigen::Map<const detail::MatRM<T>> W(w.data.data(), out_ch, in_ch * 9);
        Eigen::Map<const detail::MatRM<T>> DY(dy.data.data(), out_ch, static_cast<Eigen::Index>(hw));
        Eigen::Map<detail::MatRM<T>> DC(dcol.data(), in_ch * 9, static_cast<Eigen::Index>(hw));
        DC.noalias() = W.transpose() * DY;
        TensorT<T> dx({in_ch, h, wd});
        detail::col2im3x3_add(dcol.data(), in_ch, h, wd, dx);
        return dx;
    }
};

// ---- pointwise and resampling ops -----------------------------------------

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& dy, const TensorT<T>& y) {
    TensorT<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] = y.data[i] > T(0) ? dy.data[i] : T(0);
    return dx;
}

/// 2x2 average pooling; requires even spatial dims.
template <typename T>
TensorT<T> avgpool2(const TensorT<T>& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 || w % 2) throw std::invalid_argument("avgpool2: dims must be even");
    TensorT<T> y({c, h / 2, w / 2});
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < h / 2; ++yy)
            for (int xx = 0; xx < w / 2; ++xx) {
                const T s = x.at(ci, 2 * yy, 2 * xx) + x.at(ci, 2 * yy, 2 * xx + 1) +
                            x.at(ci, 2 * yy + 1, 2 * xx) + x.at(ci, 2 * yy + 1, 2 * xx + 1);
                y.at(ci, yy, xx) = s * T(0.25);
            }
    return y;
}

template <typename T>
TensorT<T> avgpool2_backward(const TensorT<T>& dy) {
    const int c = dy.dim(0), h = dy.dim(1) * 2, w = dy.dim(2) * 2;
    TensorT<T> dx({c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < dy.dim(1); ++yy)
            for (int xx = 0; xx < dy.dim(2); ++xx) {
                const T g = dy.at(ci, yy, xx) * T(0.25);
                dx.at(ci, 2 * yy, 2 * xx) = g;
                dx.at(ci, 2 * yy, 2 * xx + 1) = g;
                dx.at(ci, 2 * yy + 1, 2 * xx) = g;
                dx.at(ci, 2 * yy + 1, 2 * xx + 1) = g;
            }
    return dx;
}

template <typename T>
TensorT<T> upsample2_nearest(const TensorT<T>& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    TensorT<T> y({c, h * 2, w * 2});
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                const T v = x.at(ci, yy, xx);
                y.at(ci, 2 * yy, 2 * xx) = v;
                y.at(ci, 2 * yy, 2 * xx + 1) = v;
                y.at(ci, 2 * yy + 1, 2 * xx) = v;
                y.at(ci, 2 * yy + 1, 2 * xx + 1) = v;
            }
    return y;
}

template <typename T>
TensorT<T> upsample2_nearest_backward(const TensorT<T>& dy) {
    const int c = dy.dim(0), h = dy.dim(1) / 2, w = dy.dim(2) / 2;
    TensorT<T> dx({c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                dx.at(ci, yy, xx) = dy.at(ci, 2 * yy, 2 * xx) + dy.at(ci, 2 * yy, 2 * xx + 1) +
                                    dy.at(ci, 2 * yy + 1, 2 * xx) + dy.at(ci, 2 * yy + 1, 2 * xx + 1);
            }
    return dx;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat: spatial dims mismatch");
    TensorT<T> y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.numel());
    return y;
}

template <typename T>
void split_channels_grad(const TensorT<T>& dy, int ca, TensorT<T>& da, TensorT<T>& db) {
    da = TensorT<T>({ca, dy.dim(1), dy.dim(2)});
    db = TensorT<T>({dy.dim(0) - ca, dy.dim(1), dy.dim(2)});
    std::copy(dy.data.begin(), dy.data.begin() + da.numel(), da.data.begin());
    std::copy(dy.data.begin() + da.numel(), dy.data.end(), db.data.begin());
}

// ---- optimizer -------------------------------------------------------------

/// Adam with bias correction. Parameters with zero gradient stay bit-identical.
template <typename T>
class Adam {
  public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void attach(const std::vector<TensorT<T>*>& params) {
        m_.clear();
        v_.clear();
        for (const auto* p : params) {
            m_.emplace_back(p->shape);
            v_.emplace_back(p->shape);
        }
        t_ = 0;
    }

    void step(const std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>>& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw std::invalid_argument("adam: parameter/gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i]->data;
            const auto& g = grads[i].data;
            auto& m = m_[i].data;
            auto& v = v_[i].data;
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double gj = static_cast<double>(g[j]);
                if (gj == 0.0 && m[j] == T(0) && v[j] == T(0)) continue;
                m[j] = static_cast<T>(beta1_ * m[j] + (1.0 - beta1_) * gj);
                v[j] = static_cast<T>(beta2_ * v[j] + (1.0 - beta2_) * gj * gj);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    double learning_rate() const { return lr_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<TensorT<T>> m_, v_;
};

// ---- parameter hashing -----------------------------------------------------

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
std::uint64_t hash_params(const std::vector<const TensorT<T>*>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* p : params) h = fnv1a64(p->data.data(), p->data.size() * sizeof(T), h);
    return h;
}

}  // namespace s3tta
