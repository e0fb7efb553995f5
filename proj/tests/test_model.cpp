#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>

#include "wela/model.hpp"
#include "wela/rng.hpp"

using namespace wela;

namespace {

ModelConfig small_wela(int d = 12, int hidden = 6, int p = 3) {
    ModelConfig cfg;
    cfg.obs_dim = d;
    cfg.latent_dim = 2;
    cfg.label_dims = {p, p};
    cfg.hidden = hidden;
    cfg.gamma = 2.0;
    cfg.beta = 1.0;
    return cfg;
}

Tensor random_unit(std::vector<index_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    return t;
}

std::vector<Tensor> onehot_labels(const ModelConfig& cfg, index_t b, Rng& rng) {
    std::vector<Tensor> y;
    for (int p : cfg.label_dims) {
        Tensor t = Tensor::zeros({b, p});
        for (index_t i = 0; i < b; ++i) t.at(i, static_cast<index_t>(rng.uniform_int(p))) = 1.0f;
        y.push_back(std::move(t));
    }
    return y;
}

}  // namespace

TEST_CASE("encoder input widths follow the label concatenation") {
    ModelConfig canonical;
    canonical.obs_dim = 4096;
    canonical.latent_dim = 2;
    canonical.label_dims = {3, 3};
    CHECK(canonical.encoder_input_dim() == 4102);

    ModelConfig tcvae;
    tcvae.obs_dim = 4096;
    tcvae.latent_dim = 5;
    CHECK(tcvae.encoder_input_dim() == 4096);
}

TEST_CASE("config invariants are enforced") {
    ModelConfig cfg = small_wela();
    cfg.gamma = 0.5;  // must be >= 1 when labels are present
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = small_wela();
    cfg.beta = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = small_wela();
    cfg.latent_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero parameters give zero mu and logvar, and 0.5-probability pixels") {
    const ModelConfig cfg = small_wela();
    ParamStore params = init_params(cfg, 0);
    for (auto& [name, e] : params) e.value.fill(0.0f);

    Rng rng(1);
    const Tensor x = random_unit({4, cfg.obs_dim}, rng);
    const auto y = onehot_labels(cfg, 4, rng);
    const LatentCode code = encode(params, cfg, x, y);
    for (float v : code.mu.data) CHECK(v == 0.0f);
    for (float v : code.logvar.data) CHECK(v == 0.0f);

    const DecoderOutput out = decode(params, cfg, code.mu);
    for (float v : out.pixel_logits.data) CHECK(v == 0.0f);  // sigmoid(0) = 0.5 per pixel
}

TEST_CASE("encode rejects missing or superfluous labels") {
    const ModelConfig cfg = small_wela();
    ParamStore params = init_params(cfg, 0);
    Rng rng(2);
    const Tensor x = random_unit({2, cfg.obs_dim}, rng);
    CHECK_THROWS_AS(encode(params, cfg, x, {}), std::invalid_argument);

    ModelConfig tcvae;
    tcvae.obs_dim = cfg.obs_dim;
    tcvae.latent_dim = 2;
    tcvae.hidden = cfg.hidden;
    ParamStore tparams = init_params(tcvae, 0);
    const auto y = onehot_labels(cfg, 2, rng);
    CHECK_THROWS_AS(encode(tparams, tcvae, x, y), std::invalid_argument);
}

TEST_CASE("reparameterize closed forms") {
    LatentCode code;
    code.mu = Tensor::from_rows({{1.0f, -2.0f}});
    code.logvar = Tensor::zeros({1, 2});

    const Tensor eps0 = Tensor::zeros({1, 2});
    const Tensor z0 = reparameterize(code, eps0);
    CHECK(z0.at(0, 0) == 1.0f);
    CHECK(z0.at(0, 1) == -2.0f);

    const Tensor eps1 = Tensor::full({1, 2}, 1.0f);
    const Tensor z1 = reparameterize(code, eps1);
    CHECK(z1.at(0, 0) == doctest::Approx(2.0f));
    CHECK(z1.at(0, 1) == doctest::Approx(-1.0f));
}

TEST_CASE("reparameterize empirical moments match (mu, exp(logvar/2)) within 2%") {
    LatentCode code;
    code.mu = Tensor::from_rows({{0.7f, -1.2f}});
    code.logvar = Tensor::from_rows({{0.4f, -0.8f}});
    const index_t draws = 100000;

    Rng rng(12345);
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    Tensor eps({1, 2});
    for (index_t i = 0; i < draws; ++i) {
        rng.fill_normal(eps);
        const Tensor z = reparameterize(code, eps);
        for (int k = 0; k < 2; ++k) {
            sum[k] += z.at(0, k);
            sq[k] += static_cast<double>(z.at(0, k)) * z.at(0, k);
        }
    }
    for (int k = 0; k < 2; ++k) {
        const double mean = sum[k] / draws;
        const double sd = std::sqrt(sq[k] / draws - mean * mean);
        const double want_sd = std::exp(0.5 * code.logvar.at(0, k));
        CHECK(std::abs(mean - code.mu.at(0, k)) <
              0.02 * std::max(1.0, std::abs(static_cast<double>(code.mu.at(0, k)))));
        CHECK(std::abs(sd - want_sd) / want_sd < 0.02);
    }
}

TEST_CASE("decode output shapes and the label-free baseline") {
    const ModelConfig cfg = small_wela();
    ParamStore params = init_params(cfg, 3);
    Rng rng(4);
    Tensor z({5, 2});
    for (float& v : z.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    const DecoderOutput out = decode(params, cfg, z);
    CHECK(out.pixel_logits.rows() == 5);
    CHECK(out.pixel_logits.cols() == cfg.obs_dim);
    REQUIRE(out.label_logits.size() == 2);
    for (const Tensor& t : out.label_logits) {
        CHECK(t.rows() == 5);
        CHECK(t.cols() == 3);
    }

    ModelConfig tcvae = cfg;
    tcvae.label_dims.clear();
    tcvae.gamma = 1.0;
    ParamStore tparams = init_params(tcvae, 3);
    const DecoderOutput tout = decode(tparams, tcvae, z);
    CHECK(tout.label_logits.empty());
}

TEST_CASE("with m = 0 the parameter set is the baseline architecture minus label heads") {
    const ModelConfig wela_cfg = small_wela();
    ModelConfig tcvae_cfg = wela_cfg;
    tcvae_cfg.label_dims.clear();
    tcvae_cfg.gamma = 1.0;

    std::set<std::string> wela_names, tcvae_names;
    ParamStore a = init_params(wela_cfg, 0);
    ParamStore b = init_params(tcvae_cfg, 0);
    for (const auto& [name, e] : a) wela_names.insert(name);
    for (const auto& [name, e] : b) tcvae_names.insert(name);

    std::set<std::string> expect = wela_names;
    expect.erase("dec.lab0.W");
    expect.erase("dec.lab0.b");
    expect.erase("dec.lab1.W");
    expect.erase("dec.lab1.b");
    CHECK(tcvae_names == expect);
    // same trunk widths; only the encoder input width differs (no labels)
    CHECK(b.value("enc.h1.W").shape ==
          std::vector<index_t>{tcvae_cfg.obs_dim, tcvae_cfg.hidden});
    CHECK(b.value("dec.h2.W").shape == a.value("dec.h2.W").shape);
}

TEST_CASE("init_params is seed-deterministic") {
    const ModelConfig cfg = small_wela();
    ParamStore a = init_params(cfg, 7);
    ParamStore b = init_params(cfg, 7);
    ParamStore c = init_params(cfg, 8);
    bool all_equal = true, any_diff = false;
    for (const auto& [name, e] : a) {
        all_equal = all_equal && e.value.data == b.value(name).data;
        any_diff = any_diff || e.value.data != c.value(name).data;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("init_params weight variance matches the uniform moment") {
    ModelConfig cfg;
    cfg.obs_dim = 100;
    cfg.latent_dim = 2;
    cfg.hidden = 64;
    ParamStore params = init_params(cfg, 11);
    for (const auto& name : {"enc.h1.W", "enc.h2.W", "dec.pix.W"}) {
        const Tensor& w = params.value(name);
        const double a =
            std::sqrt(6.0 / (static_cast<double>(w.shape[0]) + static_cast<double>(w.shape[1])));
        double mean = 0.0, sq = 0.0;
        for (float v : w.data) {
            mean += v;
            sq += static_cast<double>(v) * v;
        }
        mean /= static_cast<double>(w.numel());
        const double var = sq / static_cast<double>(w.numel()) - mean * mean;
        CHECK(std::abs(var - a * a / 3.0) / (a * a / 3.0) < 0.2);
    }
    for (const auto& [name, e] : params)
        if (name.ends_with(".b"))
            for (float v : e.value.data) CHECK(v == 0.0f);
}

TEST_CASE("parameter count matches the closed-form formula exactly") {
    const ModelConfig cfg = small_wela();
    CHECK(init_params(cfg, 0).scalar_count() == cfg.param_count());

    ModelConfig tcvae;
    tcvae.obs_dim = 40;
    tcvae.latent_dim = 5;
    tcvae.hidden = 16;
    CHECK(init_params(tcvae, 0).scalar_count() == tcvae.param_count());
}

TEST_CASE("encode-decode round trip keeps the batch dimension and stays finite") {
    const ModelConfig cfg = small_wela();
    ParamStore params = init_params(cfg, 5);
    Rng rng(6);
    const Tensor x = random_unit({7, cfg.obs_dim}, rng);
    const auto y = onehot_labels(cfg, 7, rng);
    const LatentCode code = encode(params, cfg, x, y);
    CHECK(code.mu.rows() == 7);
    CHECK(code.logvar.rows() == 7);
    for (float v : code.logvar.data) {
        CHECK(v >= cfg.logvar_min);
        CHECK(v <= cfg.logvar_max);
    }
    Tensor eps({7, cfg.latent_dim});
    rng.fill_normal(eps);
    const Tensor z = reparameterize(code, eps);
    const DecoderOutput out = decode(params, cfg, z);
    CHECK(out.pixel_logits.rows() == 7);
    check_finite(code.mu, "mu");
    check_finite(code.logvar, "logvar");
    check_finite(out.pixel_logits, "pixel_logits");
    for (const Tensor& t : out.label_logits) check_finite(t, "label_logits");
}

TEST_CASE("checkpoint round trip is exact and hash-stable") {
    const ModelConfig cfg = small_wela();
    ParamStore params = init_params(cfg, 9);
    CheckpointMeta meta;
    meta.config = cfg;
    meta.seed = 9;
    meta.epoch = 42;
    meta.extra = {{"final_total", 12.5}};

    const auto dir = std::filesystem::temp_directory_path() / "wela_test_ckpt";
    std::filesystem::remove_all(dir);
    save_checkpoint(params, meta, dir.string());
    const LoadedCheckpoint back = load_checkpoint(dir.string());
    CHECK(back.meta.seed == 9);
    CHECK(back.meta.epoch == 42);
    CHECK(back.meta.extra.at("final_total").get<double>() == 12.5);
    CHECK(back.params.scalar_count() == params.scalar_count());
    for (const auto& [name, e] : params) CHECK(back.params.value(name).data == e.value.data);
    CHECK(checkpoint_content_hash(back.params) == checkpoint_content_hash(params));
    std::filesystem::remove_all(dir);
}
