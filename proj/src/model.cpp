#include "wela/model.hpp"

#include <filesystem>
#include <fstream>

#include "wela/io.hpp"

namespace wela {

void ModelConfig::validate() const {
    if (obs_dim < 1) throw std::invalid_argument("model config: obs_dim must be >= 1");
    if (latent_dim < 1) throw std::invalid_argument("model config: latent_dim must be >= 1");
    if (hidden < 1) throw std::invalid_argument("model config: hidden must be >= 1");
    if (hidden_layers < 1) throw std::invalid_argument("model config: hidden_layers must be >= 1");
    for (int p : label_dims)
        if (p < 2) throw std::invalid_argument("model config: label dims must be >= 2");
    if (m() > 0 && gamma < 1.0)
        throw std::invalid_argument("model config: gamma must be >= 1 when labels are present");
    if (beta < 0.0) throw std::invalid_argument("model config: beta must be >= 0");
    if (!(logvar_max > logvar_min))
        throw std::invalid_argument("model config: empty logvar clamp range");
}

index_t ModelConfig::param_count() const {
    const index_t in = encoder_input_dim();
    const index_t h = hidden;
    const index_t k = latent_dim;
    const index_t d = obs_dim;
    index_t count = in * h + h;                                  // enc.h1
    count += (hidden_layers - 1) * (h * h + h);                  // enc.h2..
    count += h * 2 * k + 2 * k;                                  // enc.head
    count += k * h + h;                                          // dec.h1
    count += (hidden_layers - 1) * (h * h + h);                  // dec.h2..
    count += h * d + d;                                          // dec.pix
    for (int p : label_dims) count += h * p + p;                 // dec.lab*
    return count;
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"obs_dim", obs_dim},
                          {"latent_dim", latent_dim},
                          {"label_dims", label_dims},
                          {"hidden", hidden},
                          {"hidden_layers", hidden_layers},
                          {"gamma", gamma},
                          {"beta", beta},
                          {"logvar_min", logvar_min},
                          {"logvar_max", logvar_max}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.obs_dim = j.at("obs_dim").get<int>();
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.label_dims = j.at("label_dims").get<std::vector<int>>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.hidden_layers = j.at("hidden_layers").get<int>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.logvar_min = j.at("logvar_min").get<double>();
    cfg.logvar_max = j.at("logvar_max").get<double>();
    cfg.validate();
    return cfg;
}

namespace {

void glorot_fill(Tensor& w, Rng& rng) {
    const double fan_in = static_cast<double>(w.shape[0]);
    const double fan_out = static_cast<double>(w.shape[1]);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (float& v : w.data) v = static_cast<float>(rng.uniform(-a, a));
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore params;
    Rng rng(derive_seed(seed, 0x696e6974ULL));  // "init" stream

    // Creation order fixes the random sequence; storage order is by name.
    const index_t in = cfg.encoder_input_dim();
    const index_t h = cfg.hidden;
    const index_t k = cfg.latent_dim;

    glorot_fill(params.create(names::enc_layer_w(0), {in, h}), rng);
    params.create(names::enc_layer_b(0), {h});
    for (int l = 1; l < cfg.hidden_layers; ++l) {
        glorot_fill(params.create(names::enc_layer_w(l), {h, h}), rng);
        params.create(names::enc_layer_b(l), {h});
    }
    glorot_fill(params.create(names::enc_head_w, {h, 2 * k}), rng);
    params.create(names::enc_head_b, {2 * k});

    glorot_fill(params.create(names::dec_layer_w(0), {k, h}), rng);
    params.create(names::dec_layer_b(0), {h});
    for (int l = 1; l < cfg.hidden_layers; ++l) {
        glorot_fill(params.create(names::dec_layer_w(l), {h, h}), rng);
        params.create(names::dec_layer_b(l), {h});
    }
    glorot_fill(params.create(names::dec_pix_w, {h, cfg.obs_dim}), rng);
    params.create(names::dec_pix_b, {cfg.obs_dim});
    for (int j = 0; j < cfg.m(); ++j) {
        glorot_fill(params.create(names::dec_lab_w(j), {h, cfg.label_dims[j]}), rng);
        params.create(names::dec_lab_b(j), {cfg.label_dims[j]});
    }
    return params;
}

namespace {

/// Shared trunk backward: grad on the trunk output -> grad on the trunk input,
/// accumulating parameter gradients along the way.
Tensor mlp_backward(ParamStore& params, const MlpTrace<float>& trace, int layers,
                    const std::string& prefix, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (int l = layers - 1; l >= 0; --l) {
        g = relu_backward(g, trace.pre[static_cast<std::size_t>(l)]);
        const Tensor& input = l == 0 ? trace.input : trace.act[static_cast<std::size_t>(l - 1)];
        const std::string wname = prefix + "h" + std::to_string(l + 1) + ".W";
        const std::string bname = prefix + "h" + std::to_string(l + 1) + ".b";
        Tensor grad_in = Tensor::zeros(input.shape);
        affine_backward(g, input, params.value(wname), grad_in, params.grad(wname),
                        params.grad(bname));
        g = std::move(grad_in);
    }
    return g;
}

}  // namespace

void decode_backward(ParamStore& params, const ModelConfig& cfg, const DecodeTrace<float>& trace,
                     const Tensor& grad_pixel_logits, const std::vector<Tensor>& grad_label_logits,
                     Tensor& grad_z) {
    if (static_cast<int>(grad_label_logits.size()) != cfg.m())
        throw std::invalid_argument("decode_backward: wrong number of label gradients");
    const Tensor& trunk_out =
        trace.mlp.act.empty() ? trace.mlp.input : trace.mlp.act.back();

    Tensor grad_h = Tensor::zeros(trunk_out.shape);
    affine_backward(grad_pixel_logits, trunk_out, params.value(names::dec_pix_w), grad_h,
                    params.grad(names::dec_pix_w), params.grad(names::dec_pix_b));
    for (int j = 0; j < cfg.m(); ++j)
        affine_backward(grad_label_logits[static_cast<std::size_t>(j)], trunk_out,
                        params.value(names::dec_lab_w(j)), grad_h, params.grad(names::dec_lab_w(j)),
                        params.grad(names::dec_lab_b(j)));

    Tensor g = mlp_backward(params, trace.mlp, cfg.hidden_layers, "dec.", grad_h);
    if (!grad_z.same_shape(g)) grad_z = Tensor::zeros(g.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i) grad_z.data[i] += g.data[i];
}

void encode_backward(ParamStore& params, const ModelConfig& cfg, const EncodeTrace<float>& trace,
                     const Tensor& grad_mu, const Tensor& grad_logvar) {
    const index_t k = cfg.latent_dim;
    const Tensor logvar_raw = slice_cols(trace.head_raw, k, 2 * k);
    const Tensor grad_logvar_raw =
        clamp_backward(grad_logvar, logvar_raw, static_cast<float>(cfg.logvar_min),
                       static_cast<float>(cfg.logvar_max));

    Tensor grad_head({grad_mu.rows(), 2 * k});
    for (index_t i = 0; i < grad_mu.rows(); ++i)
        for (index_t j = 0; j < k; ++j) {
            grad_head.at(i, j) = grad_mu.at(i, j);
            grad_head.at(i, k + j) = grad_logvar_raw.at(i, j);
        }

    const Tensor& trunk_out =
        trace.mlp.act.empty() ? trace.mlp.input : trace.mlp.act.back();
    Tensor grad_h = Tensor::zeros(trunk_out.shape);
    affine_backward(grad_head, trunk_out, params.value(names::enc_head_w), grad_h,
                    params.grad(names::enc_head_w), params.grad(names::enc_head_b));
    mlp_backward(params, trace.mlp, cfg.hidden_layers, "enc.", grad_h);
}

// ---------------------------------------------------------------------------
// Checkpoints.

std::string checkpoint_content_hash(const ParamStore& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, e] : params) {
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(e.value.data.data(), e.value.data.size() * sizeof(float), h);
    }
    return "fnv1a64:" + hash_hex(h);
}

void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta,
                     const std::string& dir) {
    std::filesystem::create_directories(dir);

    nlohmann::json layout = nlohmann::json::array();
    std::size_t cursor = 0;
    for (const auto& [name, e] : params) {
        layout.push_back({{"name", name}, {"shape", e.value.shape}, {"offset", cursor}});
        cursor += e.value.data.size();
    }
    nlohmann::json manifest{{"format", "wela-checkpoint-v1"},
                            {"config", meta.config.to_json()},
                            {"seed", meta.seed},
                            {"epoch", meta.epoch},
                            {"extra", meta.extra},
                            {"dtype", "f32"},
                            {"endianness", "little"},
                            {"params", layout},
                            {"content_hash", checkpoint_content_hash(params)}};

    {
        std::ofstream os(dir + "/checkpoint.bin", std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: " + dir + "/checkpoint.bin");
        for (const auto& [name, e] : params)
            write_f32_le(os, e.value.data.data(), e.value.data.size());
    }
    write_file_bytes(dir + "/checkpoint.json", manifest.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    LoadedCheckpoint out;
    out.manifest = nlohmann::json::parse(read_file_bytes(dir + "/checkpoint.json"));
    if (out.manifest.value("format", "") != "wela-checkpoint-v1")
        throw std::runtime_error("load_checkpoint: unsupported format in " + dir);
    out.meta.config = ModelConfig::from_json(out.manifest.at("config"));
    out.meta.seed = out.manifest.at("seed").get<std::uint64_t>();
    out.meta.epoch = out.manifest.at("epoch").get<int>();
    out.meta.extra = out.manifest.value("extra", nlohmann::json::object());

    std::ifstream is(dir + "/checkpoint.bin", std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + dir + "/checkpoint.bin");
    for (const auto& entry : out.manifest.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<index_t> shape = entry.at("shape").get<std::vector<index_t>>();
        Tensor& t = out.params.create(name, shape);
        is.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::size_t>() * 4));
        t.data = read_f32_le(is, t.data.size());
    }
    const std::string want = out.manifest.value("content_hash", "");
    const std::string got = checkpoint_content_hash(out.params);
    if (!want.empty() && want != got)
        throw std::runtime_error("load_checkpoint: content hash mismatch in " + dir);
    return out;
}

}  // namespace wela
