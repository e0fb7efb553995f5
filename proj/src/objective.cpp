#include "wela/objective.hpp"

namespace wela {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

struct TcWork {
    index_t m = 0, k = 0;
    std::vector<double> z, mu, lv, var;
    std::vector<double> logdens;  // m*m*k, entry (i, j, k)
    std::vector<double> joint;    // m*m, sum over k of logdens
    std::vector<double> lse_joint;     // m
    std::vector<double> lse_marginal;  // m*k
    double tc = 0.0;
};

/// Forward pass of the MWS estimate; keeps enough state for the gradient.
void tc_forward(TcWork& w, index_t dataset_n) {
    const index_t m = w.m, k = w.k;
    w.var.resize(w.lv.size());
    for (std::size_t i = 0; i < w.lv.size(); ++i) w.var[i] = std::exp(w.lv[i]);

    w.logdens.assign(static_cast<std::size_t>(m) * m * k, 0.0);
    w.joint.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (index_t i = 0; i < m; ++i)
        for (index_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (index_t d = 0; d < k; ++d) {
                const double diff = w.z[i * k + d] - w.mu[j * k + d];
                const double ld =
                    -0.5 * (kLog2Pi + w.lv[j * k + d] + diff * diff / w.var[j * k + d]);
                w.logdens[static_cast<std::size_t>((i * m + j) * k + d)] = ld;
                s += ld;
            }
            w.joint[static_cast<std::size_t>(i * m + j)] = s;
        }

    w.lse_joint.assign(static_cast<std::size_t>(m), 0.0);
    w.lse_marginal.assign(static_cast<std::size_t>(m) * k, 0.0);
    for (index_t i = 0; i < m; ++i) {
        double mx = w.joint[static_cast<std::size_t>(i * m)];
        for (index_t j = 1; j < m; ++j)
            mx = std::max(mx, w.joint[static_cast<std::size_t>(i * m + j)]);
        double se = 0.0;
        for (index_t j = 0; j < m; ++j)
            se += std::exp(w.joint[static_cast<std::size_t>(i * m + j)] - mx);
        w.lse_joint[static_cast<std::size_t>(i)] = mx + std::log(se);

        for (index_t d = 0; d < k; ++d) {
            double mxd = w.logdens[static_cast<std::size_t>(i * m * k + d)];
            for (index_t j = 1; j < m; ++j)
                mxd = std::max(mxd, w.logdens[static_cast<std::size_t>((i * m + j) * k + d)]);
            double sed = 0.0;
            for (index_t j = 0; j < m; ++j)
                sed += std::exp(w.logdens[static_cast<std::size_t>((i * m + j) * k + d)] - mxd);
            w.lse_marginal[static_cast<std::size_t>(i * k + d)] = mxd + std::log(sed);
        }
    }

    const double log_mn = std::log(static_cast<double>(m) * static_cast<double>(dataset_n));
    double acc = 0.0;
    for (index_t i = 0; i < m; ++i) {
        double marg = 0.0;
        for (index_t d = 0; d < k; ++d)
            marg += w.lse_marginal[static_cast<std::size_t>(i * k + d)];
        acc += w.lse_joint[static_cast<std::size_t>(i)] - marg;
    }
    w.tc = acc / static_cast<double>(m) + static_cast<double>(k - 1) * log_mn;
}

}  // namespace

namespace detail {

double tc_mws_value(const std::vector<double>& z, const std::vector<double>& mu,
                    const std::vector<double>& lv, index_t m_batch, index_t k,
                    index_t dataset_n) {
    if (m_batch <= 1 || k <= 1) return 0.0;
    TcWork w;
    w.m = m_batch;
    w.k = k;
    w.z = z;
    w.mu = mu;
    w.lv = lv;
    tc_forward(w, dataset_n);
    return w.tc;
}

}  // namespace detail

double tc_mws_with_grad(const Tensor& z, const LatentCode& code, index_t dataset_n, double scale,
                        Tensor* grad_z, Tensor* grad_mu, Tensor* grad_logvar) {
    detail::tc_mws_validate(z, code, dataset_n);
    const index_t m = z.rows(), k = z.cols();
    if (m <= 1 || k <= 1) return 0.0;  // constant estimate, zero gradient

    TcWork w;
    w.m = m;
    w.k = k;
    w.z.assign(z.data.begin(), z.data.end());
    w.mu.assign(code.mu.data.begin(), code.mu.data.end());
    w.lv.assign(code.logvar.data.begin(), code.logvar.data.end());
    tc_forward(w, dataset_n);

    const double inv_m = scale / static_cast<double>(m);
    for (index_t i = 0; i < m; ++i) {
        for (index_t j = 0; j < m; ++j) {
            const double wj = std::exp(w.joint[static_cast<std::size_t>(i * m + j)] -
                                       w.lse_joint[static_cast<std::size_t>(i)]);
            for (index_t d = 0; d < k; ++d) {
                const double ld = w.logdens[static_cast<std::size_t>((i * m + j) * k + d)];
                const double uj =
                    std::exp(ld - w.lse_marginal[static_cast<std::size_t>(i * k + d)]);
                const double dl = inv_m * (wj - uj);
                if (dl == 0.0) continue;
                const double var = w.var[static_cast<std::size_t>(j * k + d)];
                const double diff =
                    w.z[static_cast<std::size_t>(i * k + d)] - w.mu[static_cast<std::size_t>(j * k + d)];
                if (grad_z)
                    grad_z->data[static_cast<std::size_t>(i * k + d)] +=
                        static_cast<float>(dl * (-diff / var));
                if (grad_mu)
                    grad_mu->data[static_cast<std::size_t>(j * k + d)] +=
                        static_cast<float>(dl * (diff / var));
                if (grad_logvar)
                    grad_logvar->data[static_cast<std::size_t>(j * k + d)] +=
                        static_cast<float>(dl * (-0.5) * (1.0 - diff * diff / var));
            }
        }
    }
    return w.tc;
}

LossBreakdown wela_loss(ParamStore& params, const ModelConfig& cfg, const Tensor& x,
                        const std::vector<Tensor>& y, const Tensor& eps, index_t dataset_n,
                        bool with_grad) {
    cfg.validate();
    if (eps.ndim() != 2 || eps.rows() != x.rows() || eps.cols() != cfg.latent_dim)
        throw std::invalid_argument("wela_loss: eps " + shape_str(eps.shape) +
                                    " does not match batch " + std::to_string(x.rows()) +
                                    " x latent_dim " + std::to_string(cfg.latent_dim));

    EncodeTrace<float> etrace;
    const LatentCode code = encode(params, cfg, x, y, with_grad ? &etrace : nullptr);
    const Tensor z = reparameterize(code, eps);
    DecodeTrace<float> dtrace;
    const DecoderOutput out = decode(params, cfg, z, with_grad ? &dtrace : nullptr);

    LossBreakdown loss;
    loss.gamma = cfg.m() > 0 ? cfg.gamma : 1.0;
    loss.beta = cfg.beta;
    loss.dataset_n = dataset_n;
    loss.recon_x = bernoulli_recon(out.pixel_logits, x);
    for (int j = 0; j < cfg.m(); ++j)
        loss.recon_y.push_back(categorical_recon(out.label_logits[static_cast<std::size_t>(j)],
                                                 y[static_cast<std::size_t>(j)]));
    loss.kl = gaussian_kl(code);

    if (!with_grad) {
        loss.tc = tc_mws_estimate(z, code, dataset_n);
        loss.finish();
        return loss;
    }

    const index_t b = x.rows();
    const double inv_b = 1.0 / static_cast<double>(b);

    Tensor grad_pix(out.pixel_logits.shape);
    for (std::size_t i = 0; i < grad_pix.data.size(); ++i)
        grad_pix.data[i] = static_cast<float>(
            (detail::sigmoid(out.pixel_logits.data[i]) - static_cast<double>(x.data[i])) * inv_b);

    std::vector<Tensor> grad_labs;
    for (int j = 0; j < cfg.m(); ++j) {
        const Tensor& logits = out.label_logits[static_cast<std::size_t>(j)];
        const Tensor& target = y[static_cast<std::size_t>(j)];
        Tensor g(logits.shape);
        const index_t p = logits.cols();
        for (index_t i = 0; i < b; ++i) {
            double mx = logits.at(i, 0);
            for (index_t c = 1; c < p; ++c) mx = std::max(mx, static_cast<double>(logits.at(i, c)));
            double se = 0.0;
            for (index_t c = 0; c < p; ++c) se += std::exp(static_cast<double>(logits.at(i, c)) - mx);
            for (index_t c = 0; c < p; ++c) {
                const double sm = std::exp(static_cast<double>(logits.at(i, c)) - mx) / se;
                g.at(i, c) = static_cast<float>((sm - static_cast<double>(target.at(i, c))) *
                                                cfg.gamma * inv_b);
            }
        }
        grad_labs.push_back(std::move(g));
    }

    Tensor grad_z = Tensor::zeros(z.shape);
    decode_backward(params, cfg, dtrace, grad_pix, grad_labs, grad_z);

    Tensor grad_mu = Tensor::zeros(code.mu.shape);
    Tensor grad_lv = Tensor::zeros(code.logvar.shape);
    if (cfg.beta != 0.0) {
        loss.tc = tc_mws_with_grad(z, code, dataset_n, cfg.beta, &grad_z, &grad_mu, &grad_lv);
    } else {
        loss.tc = tc_mws_estimate(z, code, dataset_n);
    }

    // Closed-form KL and the reparameterization path.
    for (std::size_t i = 0; i < grad_mu.data.size(); ++i) {
        const double lv = code.logvar.data[i];
        grad_mu.data[i] += static_cast<float>(code.mu.data[i] * inv_b);
        grad_lv.data[i] += static_cast<float>(0.5 * (std::exp(lv) - 1.0) * inv_b);
        grad_mu.data[i] += grad_z.data[i];
        grad_lv.data[i] += static_cast<float>(static_cast<double>(grad_z.data[i]) * 0.5 *
                                              std::exp(0.5 * lv) * eps.data[i]);
    }
    encode_backward(params, cfg, etrace, grad_mu, grad_lv);

    loss.finish();
    return loss;
}

}  // namespace wela
