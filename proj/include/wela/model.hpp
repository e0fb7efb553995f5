#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "wela/param_store.hpp"
#include "wela/tensor.hpp"

namespace wela {

/// Architecture and objective hyperparameters shared by the TCVAE baseline
/// (no labels) and WeLa-VAE (label-concatenated encoder input, one categorical
/// head per label on the decoder).
struct ModelConfig {
    int obs_dim = 4096;            // D, pixels per image
    int latent_dim = 2;            // K
    std::vector<int> label_dims;   // p per label factor; empty for TCVAE
    int hidden = 1200;
    int hidden_layers = 2;
    double gamma = 1.0;            // label reconstruction weight, >= 1 when labels present
    double beta = 0.0;             // total-correlation weight
    double logvar_min = -8.0;
    double logvar_max = 8.0;

    int m() const { return static_cast<int>(label_dims.size()); }
    int label_total() const {
        int t = 0;
        for (int p : label_dims) t += p;
        return t;
    }
    int encoder_input_dim() const { return obs_dim + label_total(); }

    void validate() const;
    index_t param_count() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

template <class T>
struct LatentCodeT {
    TensorT<T> mu;      // B x K
    TensorT<T> logvar;  // B x K, clamped to config bounds
};
using LatentCode = LatentCodeT<float>;

template <class T>
struct DecoderOutputT {
    TensorT<T> pixel_logits;                 // B x D
    std::vector<TensorT<T>> label_logits;    // one B x p_j per label
};
using DecoderOutput = DecoderOutputT<float>;

/// Cached forward activations for one MLP trunk.
template <class T>
struct MlpTrace {
    TensorT<T> input;
    std::vector<TensorT<T>> pre;  // affine outputs before ReLU
    std::vector<TensorT<T>> act;  // after ReLU
};

template <class T>
struct EncodeTrace {
    MlpTrace<T> mlp;
    TensorT<T> head_raw;  // B x 2K before the mu/logvar split and clamp
};

template <class T>
struct DecodeTrace {
    MlpTrace<T> mlp;
};

namespace names {
inline std::string enc_layer_w(int l) { return "enc.h" + std::to_string(l + 1) + ".W"; }
inline std::string enc_layer_b(int l) { return "enc.h" + std::to_string(l + 1) + ".b"; }
inline const char* enc_head_w = "enc.head.W";
inline const char* enc_head_b = "enc.head.b";
inline std::string dec_layer_w(int l) { return "dec.h" + std::to_string(l + 1) + ".W"; }
inline std::string dec_layer_b(int l) { return "dec.h" + std::to_string(l + 1) + ".b"; }
inline const char* dec_pix_w = "dec.pix.W";
inline const char* dec_pix_b = "dec.pix.b";
inline std::string dec_lab_w(int j) { return "dec.lab" + std::to_string(j) + ".W"; }
inline std::string dec_lab_b(int j) { return "dec.lab" + std::to_string(j) + ".b"; }
}  // namespace names

namespace detail {

template <class T>
TensorT<T> mlp_forward(const ParamStoreT<T>& params, const TensorT<T>& input, int layers,
                       const std::string& prefix, MlpTrace<T>* trace) {
    TensorT<T> h = input;
    if (trace) trace->input = input;
    for (int l = 0; l < layers; ++l) {
        TensorT<T> pre = affine_forward(h, params.value(prefix + "h" + std::to_string(l + 1) + ".W"),
                                        params.value(prefix + "h" + std::to_string(l + 1) + ".b"));
        h = relu(pre);
        if (trace) {
            trace->pre.push_back(std::move(pre));
            trace->act.push_back(h);
        }
    }
    return h;
}

}  // namespace detail

/// q(z | x, y): x and the one-hot labels are concatenated into a single
/// input; two hidden ReLU layers feed a linear head of width 2K split into
/// (mu, logvar), with logvar clamped to the configured bounds.
template <class T>
LatentCodeT<T> encode(const ParamStoreT<T>& params, const ModelConfig& cfg, const TensorT<T>& x,
                      const std::vector<TensorT<T>>& y, EncodeTrace<T>* trace = nullptr) {
    if (static_cast<int>(y.size()) != cfg.m())
        throw std::invalid_argument("encode: got " + std::to_string(y.size()) +
                                    " label blocks, config declares " + std::to_string(cfg.m()));
    if (x.ndim() != 2 || x.cols() != cfg.obs_dim)
        throw std::invalid_argument("encode: x " + shape_str(x.shape) + " does not match obs_dim " +
                                    std::to_string(cfg.obs_dim));
    for (int j = 0; j < cfg.m(); ++j)
        if (y[j].rows() != x.rows() || y[j].cols() != cfg.label_dims[j])
            throw std::invalid_argument("encode: label block " + std::to_string(j) + " has shape " +
                                        shape_str(y[j].shape) + ", expected [" +
                                        std::to_string(x.rows()) + " " +
                                        std::to_string(cfg.label_dims[j]) + "]");

    TensorT<T> input;
    if (cfg.m() == 0) {
        input = x;
    } else {
        std::vector<const TensorT<T>*> parts{&x};
        for (const auto& t : y) parts.push_back(&t);
        input = concat_cols(parts);
    }

    MlpTrace<T> local;
    MlpTrace<T>* mlp_trace = trace ? &trace->mlp : &local;
    TensorT<T> h = detail::mlp_forward(params, input, cfg.hidden_layers, "enc.", mlp_trace);
    TensorT<T> head = affine_forward(h, params.value(names::enc_head_w),
                                     params.value(names::enc_head_b));
    if (trace) trace->head_raw = head;

    LatentCodeT<T> code;
    code.mu = slice_cols(head, 0, cfg.latent_dim);
    code.logvar = clamp(slice_cols(head, cfg.latent_dim, 2 * cfg.latent_dim),
                        static_cast<T>(cfg.logvar_min), static_cast<T>(cfg.logvar_max));
    return code;
}

/// z = mu + exp(logvar / 2) * eps, with eps injected by the caller.
template <class T>
TensorT<T> reparameterize(const LatentCodeT<T>& code, const TensorT<T>& eps) {
    if (!eps.same_shape(code.mu))
        throw std::invalid_argument("reparameterize: eps " + shape_str(eps.shape) +
                                    " does not match mu " + shape_str(code.mu.shape));
    TensorT<T> z = code.mu;
    for (std::size_t i = 0; i < z.data.size(); ++i)
        z.data[i] += std::exp(T(0.5) * code.logvar.data[i]) * eps.data[i];
    return z;
}

/// p(x | z) and p(y | z): a shared two-hidden-layer ReLU trunk with a linear
/// pixel head and one linear head per label. Raw logits; sigmoid/softmax are
/// applied inside the losses.
template <class T>
DecoderOutputT<T> decode(const ParamStoreT<T>& params, const ModelConfig& cfg, const TensorT<T>& z,
                         DecodeTrace<T>* trace = nullptr) {
    if (z.ndim() != 2 || z.cols() != cfg.latent_dim)
        throw std::invalid_argument("decode: z " + shape_str(z.shape) +
                                    " does not match latent_dim " +
                                    std::to_string(cfg.latent_dim));
    MlpTrace<T> local;
    MlpTrace<T>* mlp_trace = trace ? &trace->mlp : &local;
    TensorT<T> h = detail::mlp_forward(params, z, cfg.hidden_layers, "dec.", mlp_trace);

    DecoderOutputT<T> out;
    out.pixel_logits =
        affine_forward(h, params.value(names::dec_pix_w), params.value(names::dec_pix_b));
    for (int j = 0; j < cfg.m(); ++j)
        out.label_logits.push_back(affine_forward(h, params.value(names::dec_lab_w(j)),
                                                  params.value(names::dec_lab_b(j))));
    return out;
}

/// Glorot-uniform weights, zero biases; fully determined by the seed.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Backward passes for the fixed topology; gradients accumulate into the
/// store. encode_backward consumes d(loss)/d(mu) and d(loss)/d(logvar);
/// decode_backward returns d(loss)/d(z).
void decode_backward(ParamStore& params, const ModelConfig& cfg, const DecodeTrace<float>& trace,
                     const Tensor& grad_pixel_logits, const std::vector<Tensor>& grad_label_logits,
                     Tensor& grad_z);
void encode_backward(ParamStore& params, const ModelConfig& cfg, const EncodeTrace<float>& trace,
                     const Tensor& grad_mu, const Tensor& grad_logvar);

// ---------------------------------------------------------------------------
// Checkpoints: <dir>/checkpoint.json (config, seed, epoch, summary, layout)
// plus <dir>/checkpoint.bin (little-endian float32 arrays in name order).

struct CheckpointMeta {
    ModelConfig config;
    std::uint64_t seed = 0;
    int epoch = 0;
    nlohmann::json extra;  // loss history summary, timings
};

std::string checkpoint_content_hash(const ParamStore& params);
void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta, const std::string& dir);

struct LoadedCheckpoint {
    ParamStore params;
    CheckpointMeta meta;
    nlohmann::json manifest;
};
LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace wela
