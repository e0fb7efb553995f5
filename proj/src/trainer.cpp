#include "wela/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "wela/io.hpp"

namespace wela {

void TrainConfig::validate(index_t dataset_n) const {
    model.validate();
    if (batch_size < 1 || batch_size > dataset_n)
        throw std::invalid_argument("train config: batch_size " + std::to_string(batch_size) +
                                    " not in [1, " + std::to_string(dataset_n) + "]");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning rate must be > 0");
    if (out_dir.empty()) throw std::invalid_argument("train config: out_dir not set");
}

void make_batch(const BlobDataset& ds, const WeakLabelSet* labels,
                const std::vector<index_t>& idx, Tensor& x, std::vector<Tensor>& y) {
    const index_t b = static_cast<index_t>(idx.size());
    const int d = ds.dim();
    x = Tensor({b, d});
    for (index_t r = 0; r < b; ++r)
        std::copy(ds.image(idx[static_cast<std::size_t>(r)]),
                  ds.image(idx[static_cast<std::size_t>(r)]) + d, x.data.begin() + r * d);
    y.clear();
    if (!labels) return;
    for (int f = 0; f < labels->m(); ++f) {
        const auto& mat = labels->onehot[static_cast<std::size_t>(f)];
        Tensor t({b, labels->p});
        for (index_t r = 0; r < b; ++r)
            std::copy(mat.begin() + idx[static_cast<std::size_t>(r)] * labels->p,
                      mat.begin() + (idx[static_cast<std::size_t>(r)] + 1) * labels->p,
                      t.data.begin() + r * labels->p);
        y.push_back(std::move(t));
    }
}

namespace {

void check_labels_match(const ModelConfig& model, const WeakLabelSet* labels) {
    if (model.m() == 0) {
        if (labels)
            throw std::invalid_argument("train: labels supplied but model declares none");
        return;
    }
    if (!labels)
        throw std::invalid_argument("train: model declares " + std::to_string(model.m()) +
                                    " labels but none were supplied");
    if (labels->m() != model.m())
        throw std::invalid_argument("train: label set has " + std::to_string(labels->m()) +
                                    " factors, model declares " + std::to_string(model.m()));
    for (int p : model.label_dims)
        if (p != labels->p)
            throw std::invalid_argument("train: label dim " + std::to_string(labels->p) +
                                        " does not match model p " + std::to_string(p));
}

std::string csv_header(int m) {
    std::string h = "epoch,step,recon_x";
    for (int j = 0; j < m; ++j) h += ",recon_y" + std::to_string(j);
    return h + ",kl,tc,total";
}

std::string csv_row(int epoch, long step, const LossBreakdown& loss) {
    char buf[64];
    std::string row = std::to_string(epoch) + "," + std::to_string(step);
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);  // lossless round trip
        row += buf;
    };
    put(loss.recon_x);
    for (double v : loss.recon_y) put(v);
    put(loss.kl);
    put(loss.tc);
    put(loss.total);
    return row;
}

const char* nonfinite_term(const LossBreakdown& loss) {
    if (!std::isfinite(loss.recon_x)) return "recon_x";
    for (double v : loss.recon_y)
        if (!std::isfinite(v)) return "recon_y";
    if (!std::isfinite(loss.kl)) return "kl";
    if (!std::isfinite(loss.tc)) return "tc";
    if (!std::isfinite(loss.total)) return "total";
    return nullptr;
}

}  // namespace

RunResult train(const BlobDataset& ds, const WeakLabelSet* labels, const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const index_t n = ds.n();
    cfg.validate(n);
    check_labels_match(cfg.model, labels);

    std::filesystem::create_directories(cfg.out_dir);
    const std::string log_path = cfg.out_dir + "/train_log.csv";
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("cannot open for writing: " + log_path);
    log << csv_header(cfg.model.m()) << "\n";

    ParamStore params = init_params(cfg.model, cfg.seed);
    AdamState adam = AdamState::init(params, cfg.learning_rate);
    Rng stream(derive_seed(cfg.seed, 0x747261696eULL));  // shuffle + eps draws

    std::vector<index_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), index_t{0});

    RunResult result;
    result.out_dir = cfg.out_dir;
    result.log_path = log_path;
    result.seed = cfg.seed;
    result.threads = num_threads();

    LossBreakdown last;
    long step = 0;
    double epoch1_sum = 0.0;
    long epoch1_steps = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) stream.shuffle(order);
        for (index_t start = 0; start < n; start += cfg.batch_size) {
            const index_t stop = std::min(n, start + cfg.batch_size);
            const std::vector<index_t> idx(order.begin() + start, order.begin() + stop);

            Tensor x;
            std::vector<Tensor> y;
            make_batch(ds, labels, idx, x, y);
            Tensor eps({stop - start, cfg.model.latent_dim});
            stream.fill_normal(eps);

            params.zero_grads();
            const LossBreakdown loss =
                wela_loss(params, cfg.model, x, y, eps, n, /*with_grad=*/true);
            ++step;
            if (const char* term = nonfinite_term(loss)) {
                log << csv_row(epoch, step, loss) << "\n";
                log.flush();
                throw DivergenceError(epoch, step, term);
            }
            adam_step(params, adam);

            log << csv_row(epoch, step, loss) << "\n";
            last = loss;
            if (epoch == 1) {
                epoch1_sum += loss.total;
                ++epoch1_steps;
            }
        }
        log.flush();
    }
    log.close();

    result.final_loss = last;
    result.steps = step;
    result.epoch1_mean_total = epoch1_steps > 0 ? epoch1_sum / epoch1_steps : 0.0;

    if (cfg.model.m() > 0) result.label_accuracies = label_accuracy(params, cfg.model, ds, *labels);

    const auto t1 = std::chrono::steady_clock::now();
    result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    CheckpointMeta meta;
    meta.config = cfg.model;
    meta.seed = cfg.seed;
    meta.epoch = cfg.epochs;
    meta.extra = nlohmann::json{{"final_total", result.final_loss.total},
                                {"epoch1_mean_total", result.epoch1_mean_total},
                                {"steps", result.steps},
                                {"learning_rate", cfg.learning_rate},
                                {"batch_size", cfg.batch_size},
                                {"threads", result.threads},
                                {"wall_seconds", result.wall_seconds},
                                {"label_accuracies", result.label_accuracies}};
    save_checkpoint(params, meta, cfg.out_dir);
    return result;
}

std::vector<double> label_accuracy(const ParamStore& params, const ModelConfig& cfg,
                                   const BlobDataset& ds, const WeakLabelSet& labels) {
    if (cfg.m() == 0) return {};
    check_labels_match(cfg, &labels);
    const index_t n = ds.n();
    const index_t chunk = 1024;
    std::vector<long> hits(static_cast<std::size_t>(cfg.m()), 0);

    std::vector<index_t> idx;
    for (index_t start = 0; start < n; start += chunk) {
        const index_t stop = std::min(n, start + chunk);
        idx.resize(static_cast<std::size_t>(stop - start));
        std::iota(idx.begin(), idx.end(), start);
        Tensor x;
        std::vector<Tensor> y;
        make_batch(ds, &labels, idx, x, y);

        const LatentCode code = encode(params, cfg, x, y);
        const DecoderOutput out = decode(params, cfg, code.mu);  // eps = 0
        for (int f = 0; f < cfg.m(); ++f) {
            const Tensor& logits = out.label_logits[static_cast<std::size_t>(f)];
            const Tensor& target = y[static_cast<std::size_t>(f)];
            for (index_t r = 0; r < logits.rows(); ++r) {
                index_t pred = 0, truth = 0;
                for (index_t c = 1; c < logits.cols(); ++c) {
                    if (logits.at(r, c) > logits.at(r, pred)) pred = c;
                    if (target.at(r, c) > target.at(r, truth)) truth = c;
                }
                if (pred == truth) ++hits[static_cast<std::size_t>(f)];
            }
        }
    }

    std::vector<double> acc;
    for (int f = 0; f < cfg.m(); ++f)
        acc.push_back(static_cast<double>(hits[static_cast<std::size_t>(f)]) /
                      static_cast<double>(n));
    return acc;
}

}  // namespace wela
