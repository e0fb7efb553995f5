#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "wela/rng.hpp"
#include "wela/tensor.hpp"

namespace wela {

/// Named parameter tensors with paired gradient buffers. Iteration is
/// name-ordered, which fixes checkpoint layout and optimizer update order.
template <class T>
class ParamStoreT {
public:
    struct Entry {
        TensorT<T> value;
        TensorT<T> grad;
    };

    TensorT<T>& create(const std::string& name, std::vector<index_t> shape) {
        if (entries_.count(name))
            throw std::invalid_argument("param store: duplicate parameter '" + name + "'");
        Entry e;
        e.value = TensorT<T>::zeros(shape);
        e.grad = TensorT<T>::zeros(shape);
        return entries_.emplace(name, std::move(e)).first->second.value;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    TensorT<T>& value(const std::string& name) { return find(name).value; }
    const TensorT<T>& value(const std::string& name) const { return find(name).value; }
    TensorT<T>& grad(const std::string& name) { return find(name).grad; }
    const TensorT<T>& grad(const std::string& name) const { return find(name).grad; }

    void zero_grads() {
        for (auto& [name, e] : entries_) e.grad.fill(T(0));
    }

    std::size_t size() const { return entries_.size(); }

    index_t scalar_count() const {
        index_t n = 0;
        for (const auto& [name, e] : entries_) n += e.value.numel();
        return n;
    }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    template <class U>
    ParamStoreT<U> cast() const {
        ParamStoreT<U> out;
        for (const auto& [name, e] : entries_) {
            auto& v = out.create(name, e.value.shape);
            v = e.value.template cast<U>();
        }
        return out;
    }

private:
    const Entry& find(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::invalid_argument("param store: unknown parameter '" + name + "'");
        return it->second;
    }
    Entry& find(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::invalid_argument("param store: unknown parameter '" + name + "'");
        return it->second;
    }

    std::map<std::string, Entry> entries_;
};

using ParamStore = ParamStoreT<float>;
using ParamStoreD = ParamStoreT<double>;

// ---------------------------------------------------------------------------
// Adam optimizer.

struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> moments;  // first, second

    static AdamState init(const ParamStore& params, double learning_rate) {
        AdamState s;
        s.learning_rate = learning_rate;
        for (const auto& [name, e] : params)
            s.moments.emplace(name, std::make_pair(Tensor::zeros(e.value.shape),
                                                   Tensor::zeros(e.value.shape)));
        return s;
    }
};

/// Standard bias-corrected Adam update, in place. Gradients are left
/// untouched; the caller zeroes them.
inline void adam_step(ParamStore& params, AdamState& state) {
    if (state.moments.size() != params.size())
        throw std::invalid_argument("adam_step: state not initialized for this parameter set");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (auto& [name, e] : params) {
        auto it = state.moments.find(name);
        if (it == state.moments.end())
            throw std::invalid_argument("adam_step: no moments for parameter '" + name + "'");
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        if (!m.same_shape(e.value))
            throw std::invalid_argument("adam_step: moment shape mismatch for '" + name + "'");
        for (std::size_t i = 0; i < e.value.data.size(); ++i) {
            const double g = e.grad.data[i];
            const double mi = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
            const double vi = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
            m.data[i] = static_cast<float>(mi);
            v.data[i] = static_cast<float>(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            e.value.data[i] =
                static_cast<float>(e.value.data[i] - state.learning_rate * mhat /
                                                         (std::sqrt(vhat) + state.epsilon));
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient checking.

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    index_t worst_coord = -1;
};

/// Central-difference check of the gradients stored in `params` against
/// `loss64`, a double-precision evaluation of the same loss. Samples up to
/// `max_coords_per_param` coordinates per tensor (all of them when <= 0).
/// Relative error per coordinate: |analytic - numeric| / max(1e-8, |a| + |n|).
inline GradCheckReport grad_check(const std::function<double(const ParamStoreD&)>& loss64,
                                  const ParamStore& params, double h,
                                  index_t max_coords_per_param = 0,
                                  std::uint64_t sample_seed = 0) {
    ParamStoreD work = params.cast<double>();
    GradCheckReport report;
    Rng rng(derive_seed(sample_seed, 0x67726164ULL));
    for (const auto& [name, e] : params) {
        const index_t n = e.value.numel();
        std::vector<index_t> coords;
        if (max_coords_per_param <= 0 || n <= max_coords_per_param) {
            coords.resize(static_cast<std::size_t>(n));
            for (index_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            for (index_t i = 0; i < max_coords_per_param; ++i)
                coords.push_back(static_cast<index_t>(rng.uniform_int(n)));
        }
        TensorD& wv = work.value(name);
        for (index_t c : coords) {
            const double backup = wv.data[static_cast<std::size_t>(c)];
            wv.data[static_cast<std::size_t>(c)] = backup + h;
            const double lp = loss64(work);
            wv.data[static_cast<std::size_t>(c)] = backup - h;
            const double lm = loss64(work);
            wv.data[static_cast<std::size_t>(c)] = backup;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = e.grad.data[static_cast<std::size_t>(c)];
            const double rel = std::abs(analytic - numeric) /
                               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_coord = c;
            }
        }
    }
    return report;
}

}  // namespace wela
