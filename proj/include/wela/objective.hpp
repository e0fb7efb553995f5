#pragma once

#include <cmath>
#include <vector>

#include "wela/model.hpp"
#include "wela/param_store.hpp"
#include "wela/tensor.hpp"

namespace wela {

/// One evaluation of the training objective, in nats. Reconstruction terms
/// are summed over dimensions and averaged over the batch.
/// total = recon_x + gamma * sum(recon_y) + kl + beta * tc.
struct LossBreakdown {
    double recon_x = 0.0;
    std::vector<double> recon_y;  // one entry per label factor
    double kl = 0.0;
    double tc = 0.0;
    double total = 0.0;
    double gamma = 1.0;
    double beta = 0.0;
    index_t dataset_n = 0;

    double sum_recon_y() const {
        double s = 0.0;
        for (double v : recon_y) s += v;
        return s;
    }
    void finish() { total = recon_x + gamma * sum_recon_y() + kl + beta * tc; }
};

namespace detail {
inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
inline double sigmoid(double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }
}  // namespace detail

/// Negative Bernoulli log-likelihood from logits: mean over the batch of
/// sum_d [softplus(logit) - x * logit]. Accumulation is in double.
template <class T>
double bernoulli_recon(const TensorT<T>& pixel_logits, const TensorT<T>& x) {
    if (!pixel_logits.same_shape(x))
        throw std::invalid_argument("bernoulli_recon: logits " + shape_str(pixel_logits.shape) +
                                    " vs x " + shape_str(x.shape));
    for (T v : x.data)
        if (!(v >= T(0) && v <= T(1)))
            throw std::domain_error("bernoulli_recon: x entries must lie in [0, 1]");
    const index_t b = x.rows();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double l = pixel_logits.data[i];
        acc += detail::softplus(l) - static_cast<double>(x.data[i]) * l;
    }
    return acc / static_cast<double>(b);
}

/// Negative categorical log-likelihood: mean over the batch of
/// -log softmax(logits)[argmax(y)]. Rows of y must be exactly one-hot.
template <class T>
double categorical_recon(const TensorT<T>& logits, const TensorT<T>& y_onehot) {
    if (!logits.same_shape(y_onehot))
        throw std::invalid_argument("categorical_recon: logits " + shape_str(logits.shape) +
                                    " vs y " + shape_str(y_onehot.shape));
    const index_t b = logits.rows(), p = logits.cols();
    double acc = 0.0;
    for (index_t i = 0; i < b; ++i) {
        index_t target = -1;
        for (index_t c = 0; c < p; ++c) {
            const T v = y_onehot.at(i, c);
            if (v == T(1)) {
                if (target >= 0) throw std::domain_error("categorical_recon: row not one-hot");
                target = c;
            } else if (v != T(0)) {
                throw std::domain_error("categorical_recon: row not one-hot");
            }
        }
        if (target < 0) throw std::domain_error("categorical_recon: row not one-hot");
        double mx = logits.at(i, 0);
        for (index_t c = 1; c < p; ++c) mx = std::max(mx, static_cast<double>(logits.at(i, c)));
        double se = 0.0;
        for (index_t c = 0; c < p; ++c) se += std::exp(static_cast<double>(logits.at(i, c)) - mx);
        acc += mx + std::log(se) - static_cast<double>(logits.at(i, target));
    }
    return acc / static_cast<double>(b);
}

/// Closed-form KL(q || N(0, I)) for a diagonal Gaussian posterior:
/// mean over the batch of 0.5 * sum_k (mu^2 + exp(logvar) - logvar - 1).
template <class T>
double gaussian_kl(const LatentCodeT<T>& code) {
    if (!code.mu.same_shape(code.logvar))
        throw std::invalid_argument("gaussian_kl: mu " + shape_str(code.mu.shape) + " vs logvar " +
                                    shape_str(code.logvar.shape));
    const index_t b = code.mu.rows();
    double acc = 0.0;
    for (std::size_t i = 0; i < code.mu.data.size(); ++i) {
        const double mu = code.mu.data[i];
        const double lv = code.logvar.data[i];
        acc += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
    }
    return acc / static_cast<double>(b);
}

/// Per-pair per-dimension Gaussian log-densities: out[i, j, k] =
/// log N(z[i,k]; mu[j,k], exp(logvar[j,k])). Shape [B, B', K].
template <class T>
TensorT<T> log_gaussian(const TensorT<T>& z, const LatentCodeT<T>& code) {
    if (z.cols() != code.mu.cols())
        throw std::invalid_argument("log_gaussian: z " + shape_str(z.shape) + " vs mu " +
                                    shape_str(code.mu.shape));
    const index_t b = z.rows(), b2 = code.mu.rows(), k = z.cols();
    static const double log2pi = std::log(2.0 * M_PI);
    TensorT<T> out({b, b2, k});
    for (index_t i = 0; i < b; ++i)
        for (index_t j = 0; j < b2; ++j)
            for (index_t d = 0; d < k; ++d) {
                const double lv = code.logvar.at(j, d);
                const double diff = static_cast<double>(z.at(i, d)) -
                                    static_cast<double>(code.mu.at(j, d));
                out.data[static_cast<std::size_t>((i * b2 + j) * k + d)] = static_cast<T>(
                    -0.5 * (log2pi + lv + diff * diff / std::exp(lv)));
            }
    return out;
}

namespace detail {
double tc_mws_value(const std::vector<double>& z, const std::vector<double>& mu,
                    const std::vector<double>& lv, index_t m_batch, index_t k, index_t dataset_n);

template <class T>
void tc_mws_validate(const TensorT<T>& z, const LatentCodeT<T>& code, index_t dataset_n) {
    if (z.rows() < 1) throw std::invalid_argument("tc_mws_estimate: empty batch");
    if (!z.same_shape(code.mu) || !z.same_shape(code.logvar))
        throw std::invalid_argument("tc_mws_estimate: z " + shape_str(z.shape) +
                                    " vs code " + shape_str(code.mu.shape));
    if (dataset_n < z.rows())
        throw std::invalid_argument("tc_mws_estimate: dataset size " + std::to_string(dataset_n) +
                                    " smaller than batch " + std::to_string(z.rows()));
}
}  // namespace detail

/// Minibatch-weighted-sampling estimate of the total correlation
/// KL(q(z) || prod_k q(z_k)), treating the batch posteriors as an N-scaled
/// mixture:
///   log qhat(z_i)    = logsumexp_j sum_k log N(z_ik; mu_jk, var_jk) - log(M N)
///   log qhat_k(z_ik) = logsumexp_j log N(z_ik; mu_jk, var_jk) - log(M N)
///   tc               = mean_i [log qhat(z_i) - sum_k log qhat_k(z_ik)]
/// All logsumexp reductions are max-shifted and accumulate in double.
/// A single dimension carries no correlation, and a single-sample batch
/// reduces the difference to a data-independent constant with zero gradient;
/// both cases return exactly 0.
template <class T>
double tc_mws_estimate(const TensorT<T>& z, const LatentCodeT<T>& code, index_t dataset_n) {
    detail::tc_mws_validate(z, code, dataset_n);
    std::vector<double> zd(z.data.begin(), z.data.end());
    std::vector<double> mud(code.mu.data.begin(), code.mu.data.end());
    std::vector<double> lvd(code.logvar.data.begin(), code.logvar.data.end());
    return detail::tc_mws_value(zd, mud, lvd, z.rows(), z.cols(), dataset_n);
}

/// Same estimate, also accumulating scale * d(tc)/d(input) into the given
/// gradient buffers (any of which may be null).
double tc_mws_with_grad(const Tensor& z, const LatentCode& code, index_t dataset_n, double scale,
                        Tensor* grad_z, Tensor* grad_mu, Tensor* grad_logvar);

/// Full objective for one batch: encode, reparameterize, decode, and all
/// loss terms. With `with_grad`, backpropagates through every term
/// (including the TC estimator's z and mixture-parameter paths) and
/// accumulates parameter gradients into the store.
LossBreakdown wela_loss(ParamStore& params, const ModelConfig& cfg, const Tensor& x,
                        const std::vector<Tensor>& y, const Tensor& eps, index_t dataset_n,
                        bool with_grad);

/// Value-only evaluation at arbitrary precision; backs finite-difference
/// checks of the float path.
template <class T>
LossBreakdown wela_loss_value(const ParamStoreT<T>& params, const ModelConfig& cfg,
                              const TensorT<T>& x, const std::vector<TensorT<T>>& y,
                              const TensorT<T>& eps, index_t dataset_n) {
    cfg.validate();
    LatentCodeT<T> code = encode(params, cfg, x, y);
    TensorT<T> z = reparameterize(code, eps);
    DecoderOutputT<T> out = decode(params, cfg, z);

    LossBreakdown loss;
    loss.gamma = cfg.m() > 0 ? cfg.gamma : 1.0;
    loss.beta = cfg.beta;
    loss.dataset_n = dataset_n;
    loss.recon_x = bernoulli_recon(out.pixel_logits, x);
    for (int j = 0; j < cfg.m(); ++j)
        loss.recon_y.push_back(categorical_recon(out.label_logits[static_cast<std::size_t>(j)],
                                                 y[static_cast<std::size_t>(j)]));
    loss.kl = gaussian_kl(code);
    loss.tc = tc_mws_estimate(z, code, dataset_n);
    loss.finish();
    return loss;
}

}  // namespace wela
