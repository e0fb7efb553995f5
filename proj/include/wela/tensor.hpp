#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wela {

using index_t = std::int64_t;

inline std::string shape_str(const std::vector<index_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major tensor. The float instantiation carries all network data;
/// the double one backs finite-difference checks and test oracles.
template <class T>
struct TensorT {
    std::vector<index_t> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<index_t> s) : shape(std::move(s)), data(checked_numel(shape)) {}

    TensorT(std::vector<index_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<index_t>(data.size()) != checked_numel(shape))
            throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static TensorT zeros(std::vector<index_t> s) { return TensorT(std::move(s)); }

    static TensorT full(std::vector<index_t> s, T value) {
        TensorT t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    /// 2-D constructor from nested initializer data, row-major.
    static TensorT from_rows(const std::vector<std::vector<T>>& rows) {
        if (rows.empty() || rows[0].empty())
            throw std::invalid_argument("tensor: from_rows needs a non-empty matrix");
        TensorT t({static_cast<index_t>(rows.size()), static_cast<index_t>(rows[0].size())});
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows[0].size())
                throw std::invalid_argument("tensor: ragged rows in from_rows");
            std::copy(rows[r].begin(), rows[r].end(), t.data.begin() + r * rows[0].size());
        }
        return t;
    }

    index_t numel() const { return static_cast<index_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }

    index_t rows() const { require_2d(); return shape[0]; }
    index_t cols() const { require_2d(); return shape[1]; }

    T& at(index_t r, index_t c) { return data[static_cast<std::size_t>(r * cols() + c)]; }
    T at(index_t r, index_t c) const { return data[static_cast<std::size_t>(r * cols() + c)]; }

    T& operator[](index_t i) { return data[static_cast<std::size_t>(i)]; }
    T operator[](index_t i) const { return data[static_cast<std::size_t>(i)]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

private:
    void require_2d() const {
        if (shape.size() != 2)
            throw std::invalid_argument("tensor: expected 2-D, got shape " + shape_str(shape));
    }

    static index_t checked_numel(const std::vector<index_t>& s) {
        if (s.empty()) throw std::invalid_argument("tensor: empty shape");
        index_t n = 1;
        for (index_t d : s) {
            if (d <= 0)
                throw std::invalid_argument("tensor: non-positive dim in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <class T>
bool all_finite(const TensorT<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <class T>
void check_finite(const TensorT<T>& t, const char* what) {
    if (!all_finite(t))
        throw std::runtime_error(std::string(what) + ": non-finite value in tensor " +
                                 shape_str(t.shape));
}

// ---------------------------------------------------------------------------
// Threading. Worker count is process-global; matrix ops split work by output
// row so results are bit-identical for every thread count.

void set_num_threads(int n);
int num_threads();

/// Runs fn(begin, end) over [0, n) split into contiguous chunks.
void parallel_for(index_t n, const std::function<void(index_t, index_t)>& fn);

// ---------------------------------------------------------------------------
// Core ops for the fixed MLP topology.

/// out[i,j] = sum_k x[i,k] * W[k,j] + b[j]
template <class T>
TensorT<T> affine_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    if (x.ndim() != 2 || w.ndim() != 2)
        throw std::invalid_argument("affine_forward: need 2-D x and W, got x " +
                                    shape_str(x.shape) + ", W " + shape_str(w.shape));
    if (x.cols() != w.rows())
        throw std::invalid_argument("affine_forward: inner dims disagree, x " +
                                    shape_str(x.shape) + " vs W " + shape_str(w.shape));
    if (b.numel() != w.cols())
        throw std::invalid_argument("affine_forward: bias " + shape_str(b.shape) +
                                    " does not match W " + shape_str(w.shape));
    const index_t bsz = x.rows(), n = x.cols(), m = w.cols();
    TensorT<T> out({bsz, m});
    const T* xp = x.data.data();
    const T* wp = w.data.data();
    const T* bp = b.data.data();
    T* op = out.data.data();
    parallel_for(bsz, [&](index_t r0, index_t r1) {
        for (index_t i = r0; i < r1; ++i) {
            T* orow = op + i * m;
            std::copy(bp, bp + m, orow);
            const T* xrow = xp + i * n;
            for (index_t k = 0; k < n; ++k) {
                const T xv = xrow[k];
                if (xv == T(0)) continue;
                const T* wrow = wp + k * m;
                for (index_t j = 0; j < m; ++j) orow[j] += xv * wrow[j];
            }
        }
    });
    return out;
}

/// grad_x = grad_out W^T, grad_w = x^T grad_out, grad_b = column sums of grad_out.
/// Gradients are accumulated into the output tensors, which must be pre-shaped.
template <class T>
void affine_backward(const TensorT<T>& grad_out, const TensorT<T>& x, const TensorT<T>& w,
                     TensorT<T>& grad_x, TensorT<T>& grad_w, TensorT<T>& grad_b) {
    if (grad_out.ndim() != 2 || grad_out.rows() != x.rows() || grad_out.cols() != w.cols())
        throw std::invalid_argument("affine_backward: grad_out " + shape_str(grad_out.shape) +
                                    " inconsistent with x " + shape_str(x.shape) + " and W " +
                                    shape_str(w.shape));
    if (!grad_x.same_shape(x) || !grad_w.same_shape(w) || grad_b.numel() != w.cols())
        throw std::invalid_argument("affine_backward: gradient buffers mis-shaped");
    const index_t bsz = x.rows(), n = x.cols(), m = w.cols();
    const T* gp = grad_out.data.data();
    const T* xp = x.data.data();
    const T* wp = w.data.data();

    parallel_for(bsz, [&](index_t r0, index_t r1) {
        for (index_t i = r0; i < r1; ++i) {
            const T* grow = gp + i * m;
            T* gxrow = grad_x.data.data() + i * n;
            for (index_t k = 0; k < n; ++k) {
                const T* wrow = wp + k * m;
                T acc = 0;
                for (index_t j = 0; j < m; ++j) acc += grow[j] * wrow[j];
                gxrow[k] += acc;
            }
        }
    });
    parallel_for(n, [&](index_t k0, index_t k1) {
        for (index_t k = k0; k < k1; ++k) {
            T* gwrow = grad_w.data.data() + k * m;
            for (index_t i = 0; i < bsz; ++i) {
                const T xv = xp[i * n + k];
                if (xv == T(0)) continue;
                const T* grow = gp + i * m;
                for (index_t j = 0; j < m; ++j) gwrow[j] += xv * grow[j];
            }
        }
    });
    for (index_t i = 0; i < bsz; ++i) {
        const T* grow = gp + i * m;
        for (index_t j = 0; j < m; ++j) grad_b.data[j] += grow[j];
    }
}

/// max(0, x) elementwise. Backward passes gradient where x > 0; the
/// subgradient at exactly 0 is taken as 0.
template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out = x;
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return out;
}

template <class T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& x) {
    if (!grad_out.same_shape(x))
        throw std::invalid_argument("relu_backward: grad " + shape_str(grad_out.shape) +
                                    " vs input " + shape_str(x.shape));
    TensorT<T> out = grad_out;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (!(x.data[i] > T(0))) out.data[i] = T(0);
    return out;
}

template <class T>
TensorT<T> clamp(const TensorT<T>& x, T lo, T hi) {
    TensorT<T> out = x;
    for (T& v : out.data) v = std::min(hi, std::max(lo, v));
    return out;
}

/// Gradient of clamp: passes only where the pre-clamp value is strictly inside.
template <class T>
TensorT<T> clamp_backward(const TensorT<T>& grad_out, const TensorT<T>& x_raw, T lo, T hi) {
    TensorT<T> out = grad_out;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (!(x_raw.data[i] > lo && x_raw.data[i] < hi)) out.data[i] = T(0);
    return out;
}

/// Column-wise concatenation of 2-D tensors with equal row counts.
template <class T>
TensorT<T> concat_cols(const std::vector<const TensorT<T>*>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
    const index_t bsz = parts[0]->rows();
    index_t total = 0;
    for (const auto* p : parts) {
        if (p->rows() != bsz)
            throw std::invalid_argument("concat_cols: row counts differ, " +
                                        shape_str(parts[0]->shape) + " vs " + shape_str(p->shape));
        total += p->cols();
    }
    TensorT<T> out({bsz, total});
    for (index_t i = 0; i < bsz; ++i) {
        T* dst = out.data.data() + i * total;
        for (const auto* p : parts) {
            const index_t c = p->cols();
            std::copy(p->data.data() + i * c, p->data.data() + (i + 1) * c, dst);
            dst += c;
        }
    }
    return out;
}

/// Columns [c0, c1) of a 2-D tensor.
template <class T>
TensorT<T> slice_cols(const TensorT<T>& x, index_t c0, index_t c1) {
    if (c0 < 0 || c1 > x.cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) + ", " +
                                    std::to_string(c1) + ") invalid for " + shape_str(x.shape));
    TensorT<T> out({x.rows(), c1 - c0});
    for (index_t i = 0; i < x.rows(); ++i)
        std::copy(x.data.data() + i * x.cols() + c0, x.data.data() + i * x.cols() + c1,
                  out.data.data() + i * (c1 - c0));
    return out;
}

}  // namespace wela
