#include "wela/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "wela/io.hpp"

namespace fs = std::filesystem;

namespace wela {

void SweepConfig::validate() const {
    if (family != "tcvae" && family != "wela")
        throw std::invalid_argument("sweep: family must be 'tcvae' or 'wela', got '" + family + "'");
    if (seeds.empty()) throw std::invalid_argument("sweep: no seeds given");
    std::vector<std::uint64_t> s = seeds;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
        throw std::invalid_argument("sweep: seeds must be distinct");
    if (family == "wela") {
        if (p_values.empty()) throw std::invalid_argument("sweep: wela needs at least one p");
        for (int p : p_values)
            if (!gamma_by_p.count(p))
                throw std::invalid_argument("sweep: no gamma configured for p = " +
                                            std::to_string(p));
    }
    if (jobs < 1) throw std::invalid_argument("sweep: jobs must be >= 1");
}

std::map<int, double> default_gamma_table() {
    return {{2, 2000.0}, {3, 1500.0}, {4, 1000.0}, {5, 800.0},
            {6, 750.0},  {7, 600.0},  {8, 500.0}};
}

double rule_of_thumb_gamma(int obs_dim, int label_total) {
    return std::max(1.0, std::round(static_cast<double>(obs_dim) / label_total));
}

void check_gamma_rule(double gamma, int label_total, int obs_dim, int p) {
    const double ratio = gamma * label_total / obs_dim;
    if (ratio > 2.0 || ratio < 0.5)
        std::fprintf(stderr,
                     "[warn] gamma %g with total label dim %d is %.2fx the image dim %d "
                     "(p = %d); expected within a factor of 2\n",
                     gamma, label_total, ratio, obs_dim, p);
}

ModelConfig sweep_model_config(const SweepConfig& cfg, const BlobDataset& ds, int p) {
    ModelConfig model;
    model.obs_dim = ds.dim();
    model.hidden = cfg.hidden;
    model.hidden_layers = cfg.hidden_layers;
    model.beta = cfg.beta;
    if (cfg.family == "tcvae") {
        model.latent_dim = cfg.latent_tcvae;
        model.gamma = 1.0;
    } else {
        model.latent_dim = cfg.latent_wela;
        model.label_dims = {p, p};  // angle and distance factors
        model.gamma = cfg.gamma_by_p.at(p);
        check_gamma_rule(model.gamma, model.label_total(), model.obs_dim, p);
        if (model.latent_dim != model.m())
            throw std::invalid_argument(
                "sweep: wela uses latent size equal to the label count (" +
                std::to_string(model.m()) + "), got K = " + std::to_string(model.latent_dim));
    }
    model.validate();
    return model;
}

namespace {

std::string dataset_hash_of(const LoadedDataset& data) {
    return data.ds.manifest.value("content_hash", "");
}

std::string config_hash(const ModelConfig& model, double lr, int batch, int epochs,
                        const std::string& dataset_hash) {
    nlohmann::json j{{"model", model.to_json()},
                     {"learning_rate", lr},
                     {"batch_size", batch},
                     {"epochs", epochs},
                     {"dataset", dataset_hash}};
    const std::string dump = j.dump();
    return hash_hex(fnv1a64(dump.data(), dump.size()));
}

std::string run_dir_name(const std::string& family, int p, std::uint64_t seed,
                         const std::string& cfg_hash) {
    std::string name = family;
    if (p > 0) name += "_p" + std::to_string(p);
    name += "_seed" + std::to_string(seed) + "_" + cfg_hash.substr(0, 8);
    return name;
}

RunRecord record_from_json(const nlohmann::json& j, const std::string& run_dir) {
    RunRecord rec;
    rec.run_dir = run_dir;
    rec.family = j.value("family", "");
    rec.p = j.value("p", 0);
    rec.beta = j.value("beta", 0.0);
    rec.gamma = j.value("gamma", 0.0);
    rec.seed = j.value("seed", std::uint64_t{0});
    rec.status = j.value("status", "");
    rec.error = j.value("error", "");
    rec.label_accuracies = j.value("label_accuracies", std::vector<double>{});
    rec.final_total = j.value("final_total", 0.0);
    rec.wall_seconds = j.value("wall_seconds", 0.0);
    return rec;
}

void write_run_json(const RunRecord& rec, const ModelConfig& model, double lr, int batch,
                    int epochs, const std::string& cfg_hash, const std::string& dataset_hash,
                    const std::string& checkpoint_hash, double epoch1_mean_total, int threads) {
    nlohmann::json j{{"family", rec.family},
                     {"p", rec.p},
                     {"beta", rec.beta},
                     {"gamma", rec.gamma},
                     {"seed", rec.seed},
                     {"status", rec.status},
                     {"error", rec.error},
                     {"label_accuracies", rec.label_accuracies},
                     {"final_total", rec.final_total},
                     {"epoch1_mean_total", epoch1_mean_total},
                     {"wall_seconds", rec.wall_seconds},
                     {"threads", threads},
                     {"config_hash", cfg_hash},
                     {"dataset_hash", dataset_hash},
                     {"checkpoint_hash", checkpoint_hash},
                     {"model", model.to_json()},
                     {"train", {{"learning_rate", lr}, {"batch_size", batch}, {"epochs", epochs}}}};
    write_file_bytes(rec.run_dir + "/run.json", j.dump(2) + "\n");
}

}  // namespace

RunRecord run_single(const LoadedDataset& data, const ModelConfig& model, double learning_rate,
                     int batch_size, int epochs, std::uint64_t seed, const std::string& family,
                     int p, const std::string& out_root) {
    const std::string ds_hash = dataset_hash_of(data);
    const std::string cfg_hash = config_hash(model, learning_rate, batch_size, epochs, ds_hash);
    const std::string run_dir =
        out_root + "/" + run_dir_name(family, p, seed, cfg_hash);

    // Resume: a run directory with a matching config hash and a verifying
    // checkpoint (or a recorded failure) is reused as-is.
    if (fs::exists(run_dir + "/run.json")) {
        try {
            const nlohmann::json j = nlohmann::json::parse(read_file_bytes(run_dir + "/run.json"));
            if (j.value("config_hash", "") == cfg_hash) {
                RunRecord rec = record_from_json(j, run_dir);
                if (rec.status == "failed") return rec;
                if (rec.status == "ok") {
                    const LoadedCheckpoint ck = load_checkpoint(run_dir);  // verifies hash
                    if (j.value("checkpoint_hash", "") == checkpoint_content_hash(ck.params)) {
                        rec.status = "cached";
                        return rec;
                    }
                }
            }
        } catch (const std::exception&) {
            // fall through and retrain
        }
    }

    RunRecord rec;
    rec.run_dir = run_dir;
    rec.family = family;
    rec.p = p;
    rec.beta = model.beta;
    rec.gamma = model.m() > 0 ? model.gamma : 0.0;
    rec.seed = seed;

    const WeakLabelSet* labels = nullptr;
    if (model.m() > 0) {
        auto it = data.labels_by_p.find(p);
        if (it == data.labels_by_p.end())
            throw std::invalid_argument("run: dataset has no labels for p = " + std::to_string(p));
        labels = &it->second;
    }

    TrainConfig tcfg;
    tcfg.model = model;
    tcfg.learning_rate = learning_rate;
    tcfg.batch_size = batch_size;
    tcfg.epochs = epochs;
    tcfg.seed = seed;
    tcfg.out_dir = run_dir;

    std::string checkpoint_hash;
    double epoch1_mean = 0.0;
    int threads = num_threads();
    try {
        const RunResult res = train(data.ds, labels, tcfg);
        rec.status = "ok";
        rec.label_accuracies = res.label_accuracies;
        rec.final_total = res.final_loss.total;
        rec.wall_seconds = res.wall_seconds;
        epoch1_mean = res.epoch1_mean_total;
        threads = res.threads;
        checkpoint_hash = checkpoint_content_hash(load_checkpoint(run_dir).params);
    } catch (const DivergenceError& e) {
        fs::create_directories(run_dir);
        rec.status = "failed";
        rec.error = e.what();
    }
    write_run_json(rec, model, learning_rate, batch_size, epochs, cfg_hash, ds_hash,
                   checkpoint_hash, epoch1_mean, threads);
    return rec;
}

std::vector<RunRecord> run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const LoadedDataset data = load_dataset(cfg.data_dir);
    fs::create_directories(cfg.out_dir);

    struct Task {
        ModelConfig model;
        std::uint64_t seed;
        int p;
    };
    std::vector<Task> tasks;
    if (cfg.family == "tcvae") {
        const ModelConfig model = sweep_model_config(cfg, data.ds, 0);
        for (std::uint64_t s : cfg.seeds) tasks.push_back({model, s, 0});
    } else {
        for (int p : cfg.p_values) {
            const ModelConfig model = sweep_model_config(cfg, data.ds, p);
            for (std::uint64_t s : cfg.seeds) tasks.push_back({model, s, p});
        }
    }

    std::vector<RunRecord> records(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex print_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            records[i] = run_single(data, t.model, cfg.learning_rate, cfg.batch_size, cfg.epochs,
                                    t.seed, cfg.family, t.p, cfg.out_dir);
            std::lock_guard<std::mutex> lock(print_mutex);
            std::fprintf(stderr, "[sweep] %s%s seed=%llu: %s (%.1fs)\n", cfg.family.c_str(),
                         t.p > 0 ? (" p=" + std::to_string(t.p)).c_str() : "",
                         static_cast<unsigned long long>(t.seed), records[i].status.c_str(),
                         records[i].wall_seconds);
        }
    };

    if (cfg.jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < cfg.jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return records;
}

// ---------------------------------------------------------------------------
// Reporting.

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

MetricResult parse_metric_cache(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string header, row;
    std::getline(is, header);
    if (!std::getline(is, row)) throw std::runtime_error("empty metric cache: " + path);
    const auto f = split(row, ',');
    if (f.size() != 8) throw std::runtime_error("bad metric cache row in " + path);
    MetricResult r;
    r.task = f[2];
    r.mse = std::stod(f[3]);
    r.ch_i = std::stoi(f[4]);
    r.ch_j = std::stoi(f[5]);
    r.invert_i = f[6] == "1";
    r.invert_j = f[7] == "1";
    return r;
}

}  // namespace

MetricResult run_metric(const std::string& run_dir, const std::string& task,
                        const LoadedDataset& data) {
    if (task != "polar" && task != "cartesian")
        throw std::invalid_argument("task must be 'polar' or 'cartesian', got '" + task + "'");
    const std::string cache = run_dir + "/metrics_" + task + ".csv";
    if (!fs::exists(cache)) {
        const LoadedCheckpoint ck = load_checkpoint(run_dir);
        const WeakLabelSet* labels = nullptr;
        if (ck.meta.config.m() > 0)
            labels = &data.labels_by_p.at(ck.meta.config.label_dims[0]);
        const RepresentationMatrix rep = represent(ck.params, ck.meta.config, data.ds, labels);
        const MetricResult r =
            task == "polar" ? polar_mse(rep, data.ds.side) : cartesian_mse(rep, data.ds.side);

        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%llu,%s,%.17g,%d,%d,%d,%d\n",
                      fs::path(run_dir).filename().string().c_str(),
                      static_cast<unsigned long long>(ck.meta.seed), task.c_str(), r.mse, r.ch_i,
                      r.ch_j, r.invert_i ? 1 : 0, r.invert_j ? 1 : 0);
        write_file_bytes(cache, std::string("run,seed,task,mse,ch_i,ch_j,invert_i,invert_j\n") + buf);
    }
    // Stats always come from the cached file so report recomputation from the
    // raw CSVs is exact.
    return parse_metric_cache(cache);
}

double run_mse(const std::string& run_dir, const std::string& task, const LoadedDataset& data) {
    return run_metric(run_dir, task, data).mse;
}

double mean_best_tenth(std::vector<double> scores) {
    if (scores.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(scores.begin(), scores.end());
    const std::size_t take =
        static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(scores.size())));
    double acc = 0.0;
    for (std::size_t i = 0; i < take; ++i) acc += scores[i];
    return acc / static_cast<double>(take);
}

std::vector<ReportRow> build_report(const std::string& runs_dir, const LoadedDataset& data,
                                    const std::string& task) {
    std::vector<std::string> dirs;
    if (fs::exists(runs_dir))
        for (const auto& entry : fs::directory_iterator(runs_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "run.json"))
                dirs.push_back(entry.path().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw std::runtime_error("no runs found in " + runs_dir);

    struct Group {
        std::vector<RunRecord> ok;
        int failed = 0;
    };
    std::map<std::string, Group> groups;  // key sorts tcvae first, then wela by p
    std::map<std::string, RunRecord> sample;
    for (const std::string& dir : dirs) {
        const nlohmann::json j = nlohmann::json::parse(read_file_bytes(dir + "/run.json"));
        RunRecord rec = record_from_json(j, dir);
        char key[128];
        std::snprintf(key, sizeof(key), "%s_p%02d_b%g_g%g", rec.family == "tcvae" ? "0" : "1",
                      rec.p, rec.beta, rec.gamma);
        auto& g = groups[key];
        if (rec.status == "failed") {
            ++g.failed;
        } else {
            g.ok.push_back(rec);
        }
        sample.emplace(key, rec);
    }

    std::vector<ReportRow> rows;
    for (auto& [key, g] : groups) {
        const RunRecord& proto = sample.at(key);
        ReportRow row;
        row.family = proto.family;
        row.p = proto.p;
        row.beta = proto.beta;
        row.gamma = proto.gamma;
        row.seeds_failed = g.failed;
        row.seeds_ok = static_cast<int>(g.ok.size());
        if (g.ok.empty()) {
            row.available = false;
            rows.push_back(row);
            continue;
        }
        std::sort(g.ok.begin(), g.ok.end(),
                  [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
        std::vector<double> mses;
        std::size_t lowest_idx = 0;
        for (std::size_t i = 0; i < g.ok.size(); ++i) {
            mses.push_back(run_mse(g.ok[i].run_dir, task, data));
            if (mses[i] < mses[lowest_idx]) lowest_idx = i;
        }
        row.available = true;
        row.mse_lowest = *std::min_element(mses.begin(), mses.end());
        double acc = 0.0;
        for (double v : mses) acc += v;
        row.mse_mean = acc / static_cast<double>(mses.size());
        row.mse_best10 = mean_best_tenth(mses);
        const auto& accs = g.ok[lowest_idx].label_accuracies;
        row.acc_angle = accs.size() > 0 ? accs[0] : std::numeric_limits<double>::quiet_NaN();
        row.acc_distance = accs.size() > 1 ? accs[1] : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
    }
    return rows;
}

void write_report(const std::vector<ReportRow>& rows, const std::string& task,
                  const std::string& out_prefix) {
    std::string csv =
        "family,p,beta,gamma,seeds_ok,seeds_failed,acc_angle,acc_distance,"
        "mse_lowest,mse_mean,mse_best10\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g,%d,%d,%.6g,%.6g,%.17g,%.17g,%.17g\n",
                      r.family.c_str(), r.p, r.beta, r.gamma, r.seeds_ok, r.seeds_failed,
                      r.acc_angle, r.acc_distance, r.mse_lowest, r.mse_mean, r.mse_best10);
        csv += buf;
    }
    write_file_bytes(out_prefix + ".csv", csv);

    std::string txt = "MSE report, task: " + task + "\n";
    std::snprintf(buf, sizeof(buf), "%-8s %6s %8s %5s | %7s %7s | %12s %12s %12s | %s\n", "model",
                  "beta", "gamma", "p", "acc_phi", "acc_d", "lowest", "mean", "best10%",
                  "seeds ok/fail");
    txt += buf;
    txt += std::string(100, '-') + "\n";
    for (const auto& r : rows) {
        if (!r.available) {
            std::snprintf(buf, sizeof(buf), "%-8s %6g %8s %5s | %7s %7s | %12s %12s %12s | %d/%d\n",
                          r.family.c_str(), r.beta, r.family == "tcvae" ? "-" : "?",
                          r.p > 0 ? std::to_string(r.p).c_str() : "-", "-", "-", "unavailable", "-",
                          "-", r.seeds_ok, r.seeds_failed);
            txt += buf;
            continue;
        }
        char gstr[32] = "-", pstr[16] = "-", astr[16] = "-", dstr[16] = "-";
        if (r.family != "tcvae") {
            std::snprintf(gstr, sizeof(gstr), "%g", r.gamma);
            std::snprintf(pstr, sizeof(pstr), "%d", r.p);
            std::snprintf(astr, sizeof(astr), "%.2f", r.acc_angle);
            std::snprintf(dstr, sizeof(dstr), "%.2f", r.acc_distance);
        }
        std::snprintf(buf, sizeof(buf), "%-8s %6g %8s %5s | %7s %7s | %12.2f %12.2f %12.2f | %d/%d\n",
                      r.family.c_str(), r.beta, gstr, pstr, astr, dstr, r.mse_lowest, r.mse_mean,
                      r.mse_best10, r.seeds_ok, r.seeds_failed);
        txt += buf;
    }
    write_file_bytes(out_prefix + ".txt", txt);
}

// ---------------------------------------------------------------------------
// CLI.

namespace {

std::vector<int> parse_int_list(const std::string& spec) {
    std::vector<int> out;
    for (const std::string& tok : split(spec, ',')) {
        if (tok.empty()) continue;
        const auto dots = tok.find("..");
        if (dots != std::string::npos) {
            const int lo = std::stoi(tok.substr(0, dots));
            const int hi = std::stoi(tok.substr(dots + 2));
            if (hi < lo) throw std::invalid_argument("bad range '" + tok + "'");
            for (int v = lo; v <= hi; ++v) out.push_back(v);
        } else {
            out.push_back(std::stoi(tok));
        }
    }
    if (out.empty()) throw std::invalid_argument("empty list '" + spec + "'");
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
    std::vector<std::uint64_t> out;
    for (int v : parse_int_list(spec)) {
        if (v < 0) throw std::invalid_argument("seeds must be non-negative");
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

std::map<int, double> parse_gamma_map(const std::string& spec) {
    std::map<int, double> out;
    for (const std::string& tok : split(spec, ',')) {
        if (tok.empty()) continue;
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("gamma map entries look like p=value, got '" + tok + "'");
        out[std::stoi(tok.substr(0, eq))] = std::stod(tok.substr(eq + 1));
    }
    return out;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"WeLa-VAE and beta-TCVAE lab: blobs dataset, training, sweeps, metrics"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    app.add_option("--threads", threads, "worker threads (matmul rows or sweep jobs)")
        ->capture_default_str();

    // dataset generate
    auto* ds_cmd = app.add_subcommand("dataset", "dataset tools")->require_subcommand(1);
    auto* gen = ds_cmd->add_subcommand("generate", "generate the blobs dataset with weak labels");
    int side = 64, variants = 25;
    double sigma_min = 1.5, sigma_max = 4.0;
    std::string p_spec = "2..8";
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--side", side, "canvas side in pixels")->capture_default_str();
    gen->add_option("--variants", variants, "blobs per position")->capture_default_str();
    gen->add_option("--sigma-min", sigma_min, "smallest blob sigma")->capture_default_str();
    gen->add_option("--sigma-max", sigma_max, "largest blob sigma")->capture_default_str();
    gen->add_option("--p", p_spec, "label dims, e.g. 2..8 or 2,3,5")->capture_default_str();
    gen->add_option("--seed", gen_seed, "generation seed (reserved)")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a single model");
    std::string tr_data, tr_family, tr_out = "runs";
    int tr_p = 0, tr_k = -1, tr_hidden = 1200, tr_layers = 2, tr_epochs = 150, tr_batch = 256;
    double tr_gamma = -1.0, tr_beta = 40.0, tr_lr = 1e-4;
    std::uint64_t tr_seed = 0;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--family", tr_family, "tcvae | wela")->required();
    tr->add_option("--p", tr_p, "label dimensionality (wela)");
    tr->add_option("--gamma", tr_gamma, "label weight; default D / (2 p)");
    tr->add_option("--beta", tr_beta, "total-correlation weight")->capture_default_str();
    tr->add_option("--k", tr_k, "latent size; default 5 (tcvae) or 2 (wela)");
    tr->add_option("--hidden", tr_hidden, "hidden width")->capture_default_str();
    tr->add_option("--hidden-layers", tr_layers, "hidden layers")->capture_default_str();
    tr->add_option("--epochs", tr_epochs, "epochs")->capture_default_str();
    tr->add_option("--batch", tr_batch, "batch size")->capture_default_str();
    tr->add_option("--lr", tr_lr, "learning rate")->capture_default_str();
    tr->add_option("--seed", tr_seed, "weight init / shuffle / eps seed")->capture_default_str();
    tr->add_option("--out", tr_out, "runs directory")->capture_default_str();

    // sweep
    auto* sw = app.add_subcommand("sweep", "multi-seed sweep over one or both families");
    std::string sw_data, sw_family = "both", sw_p = "2..8", sw_seeds = "0..49", sw_gamma,
                sw_out = "runs";
    double sw_beta = 40.0, sw_lr = 1e-4;
    int sw_jobs = 0, sw_hidden = 1200, sw_layers = 2, sw_epochs = 150, sw_batch = 256;
    int sw_k_tcvae = 5, sw_k_wela = 2;
    sw->add_option("--data", sw_data, "dataset directory")->required();
    sw->add_option("--family", sw_family, "tcvae | wela | both")->capture_default_str();
    sw->add_option("--p", sw_p, "wela label dims")->capture_default_str();
    sw->add_option("--seeds", sw_seeds, "seed list, e.g. 0..49")->capture_default_str();
    sw->add_option("--beta", sw_beta, "total-correlation weight")->capture_default_str();
    sw->add_option("--gamma", sw_gamma, "overrides as p=value,... (default: built-in table)");
    sw->add_option("--jobs", sw_jobs, "concurrent runs (default --threads)");
    sw->add_option("--k-tcvae", sw_k_tcvae, "tcvae latent size")->capture_default_str();
    sw->add_option("--k-wela", sw_k_wela, "wela latent size")->capture_default_str();
    sw->add_option("--hidden", sw_hidden, "hidden width")->capture_default_str();
    sw->add_option("--hidden-layers", sw_layers, "hidden layers")->capture_default_str();
    sw->add_option("--epochs", sw_epochs, "epochs")->capture_default_str();
    sw->add_option("--batch", sw_batch, "batch size")->capture_default_str();
    sw->add_option("--lr", sw_lr, "learning rate")->capture_default_str();
    sw->add_option("--out", sw_out, "runs directory")->capture_default_str();

    // eval
    auto* ev = app.add_subcommand("eval", "coordinate-recovery MSE of a trained run");
    std::string ev_run, ev_data, ev_task = "both";
    ev->add_option("--checkpoint", ev_run, "run directory")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--task", ev_task, "cartesian | polar | both")->capture_default_str();

    // traverse
    auto* tv = app.add_subcommand("traverse", "latent traversal panels");
    std::string tv_run, tv_data, tv_out = "traversals";
    int tv_steps = 10;
    double tv_lo = -3.0, tv_hi = 3.0;
    tv->add_option("--checkpoint", tv_run, "run directory")->required();
    tv->add_option("--data", tv_data, "dataset directory")->required();
    tv->add_option("--steps", tv_steps, "sweep steps per channel")->capture_default_str();
    tv->add_option("--lo", tv_lo, "sweep lower bound")->capture_default_str();
    tv->add_option("--hi", tv_hi, "sweep upper bound")->capture_default_str();
    tv->add_option("--out", tv_out, "output directory")->capture_default_str();

    // heatmap
    auto* hm = app.add_subcommand("heatmap", "positional heat maps of the latent channels");
    std::string hm_run, hm_data, hm_out = "heatmaps";
    hm->add_option("--checkpoint", hm_run, "run directory")->required();
    hm->add_option("--data", hm_data, "dataset directory")->required();
    hm->add_option("--out", hm_out, "output directory")->capture_default_str();

    // report
    auto* rp = app.add_subcommand("report", "aggregate per-seed metrics into a table");
    std::string rp_in, rp_data, rp_task = "polar", rp_out;
    rp->add_option("--in", rp_in, "runs directory")->required();
    rp->add_option("--data", rp_data, "dataset directory")->required();
    rp->add_option("--task", rp_task, "cartesian | polar")->capture_default_str();
    rp->add_option("--out", rp_out, "output prefix (default <in>/report_<task>)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        set_num_threads(threads);

        if (gen->parsed()) {
            const BlobDataset ds = generate_dataset(side, variants, sigma_min, sigma_max, gen_seed);
            std::vector<WeakLabelSet> labels;
            for (int p : parse_int_list(p_spec))
                labels.push_back(build_weak_labels(ds, WeakLabelConfig::canonical(p, side)));
            save_dataset(ds, labels, gen_out);
            const LoadedDataset reread = load_dataset(gen_out);
            std::printf("wrote %s (n=%lld, hash %s)\n", gen_out.c_str(),
                        static_cast<long long>(ds.n()),
                        reread.ds.manifest.value("content_hash", "?").c_str());
            return 0;
        }

        if (tr->parsed()) {
            if (tr_family != "tcvae" && tr_family != "wela")
                throw std::invalid_argument("train: family must be tcvae or wela");
            const LoadedDataset data = load_dataset(tr_data);
            ModelConfig model;
            model.obs_dim = data.ds.dim();
            model.hidden = tr_hidden;
            model.hidden_layers = tr_layers;
            model.beta = tr_beta;
            if (tr_family == "wela") {
                if (tr_p < 2) throw std::invalid_argument("train: wela needs --p >= 2");
                model.latent_dim = tr_k > 0 ? tr_k : 2;
                model.label_dims = {tr_p, tr_p};
                if (model.latent_dim != model.m())
                    throw std::invalid_argument(
                        "train: wela uses latent size equal to the label count (2)");
                model.gamma = tr_gamma > 0 ? tr_gamma
                                           : rule_of_thumb_gamma(model.obs_dim, model.label_total());
                check_gamma_rule(model.gamma, model.label_total(), model.obs_dim, tr_p);
            } else {
                model.latent_dim = tr_k > 0 ? tr_k : 5;
            }
            model.validate();
            const RunRecord rec = run_single(data, model, tr_lr, tr_batch, tr_epochs, tr_seed,
                                             tr_family, tr_family == "wela" ? tr_p : 0, tr_out);
            std::printf("%s: %s", rec.run_dir.c_str(), rec.status.c_str());
            if (rec.status == "failed") {
                std::printf(" (%s)\n", rec.error.c_str());
                return 2;
            }
            std::printf(" final_total=%.6g", rec.final_total);
            for (std::size_t i = 0; i < rec.label_accuracies.size(); ++i)
                std::printf(" acc%zu=%.4f", i, rec.label_accuracies[i]);
            std::printf("\n");
            return 0;
        }

        if (sw->parsed()) {
            SweepConfig scfg;
            scfg.data_dir = sw_data;
            scfg.out_dir = sw_out;
            scfg.beta = sw_beta;
            scfg.p_values = parse_int_list(sw_p);
            scfg.seeds = parse_seed_list(sw_seeds);
            scfg.latent_tcvae = sw_k_tcvae;
            scfg.latent_wela = sw_k_wela;
            scfg.hidden = sw_hidden;
            scfg.hidden_layers = sw_layers;
            scfg.epochs = sw_epochs;
            scfg.batch_size = sw_batch;
            scfg.learning_rate = sw_lr;
            scfg.jobs = sw_jobs > 0 ? sw_jobs : threads;
            if (scfg.jobs > 1) set_num_threads(1);  // parallelism across runs, not inside

            scfg.gamma_by_p = default_gamma_table();
            const LoadedDataset probe = load_dataset(sw_data);
            if (probe.ds.dim() != 4096)
                for (int p : scfg.p_values)
                    scfg.gamma_by_p[p] = rule_of_thumb_gamma(probe.ds.dim(), 2 * p);
            for (const auto& [p, g] : parse_gamma_map(sw_gamma)) scfg.gamma_by_p[p] = g;

            int failed = 0, ok = 0;
            std::vector<std::string> families;
            if (sw_family == "both") {
                families = {"tcvae", "wela"};
            } else {
                families = {sw_family};
            }
            for (const std::string& fam : families) {
                scfg.family = fam;
                for (const RunRecord& rec : run_sweep(scfg))
                    rec.status == "failed" ? ++failed : ++ok;
            }
            std::printf("sweep finished: %d ok, %d failed\n", ok, failed);
            return 0;
        }

        if (ev->parsed()) {
            const LoadedDataset data = load_dataset(ev_data);
            std::vector<std::string> tasks;
            if (ev_task == "both") {
                tasks = {"cartesian", "polar"};
            } else {
                tasks = {ev_task};
            }
            for (const std::string& task : tasks) {
                const MetricResult r = run_metric(ev_run, task, data);
                std::printf("%s mse=%.6g channels=(%d,%d) invert=(%d,%d)\n", task.c_str(), r.mse,
                            r.ch_i, r.ch_j, r.invert_i ? 1 : 0, r.invert_j ? 1 : 0);
            }
            return 0;
        }

        if (tv->parsed()) {
            const LoadedDataset data = load_dataset(tv_data);
            const LoadedCheckpoint ck = load_checkpoint(tv_run);
            const WeakLabelSet* labels =
                ck.meta.config.m() > 0 ? &data.labels_by_p.at(ck.meta.config.label_dims[0])
                                       : nullptr;
            fs::create_directories(tv_out);
            int panel = 0;
            for (index_t idx : traversal_panel_indices(data.ds)) {
                Tensor x;
                std::vector<Tensor> y;
                make_batch(data.ds, labels, {idx}, x, y);
                const TraversalGrid grid =
                    traverse(ck.params, ck.meta.config, x, y, tv_lo, tv_hi, tv_steps);
                write_traversal(grid, tv_out + "/panel" + std::to_string(panel++));
            }
            std::printf("wrote %d traversal panels to %s\n", panel, tv_out.c_str());
            return 0;
        }

        if (hm->parsed()) {
            const LoadedDataset data = load_dataset(hm_data);
            const LoadedCheckpoint ck = load_checkpoint(hm_run);
            const WeakLabelSet* labels =
                ck.meta.config.m() > 0 ? &data.labels_by_p.at(ck.meta.config.label_dims[0])
                                       : nullptr;
            fs::create_directories(hm_out);
            const auto maps = heatmap(ck.params, ck.meta.config, data.ds, labels);
            write_heatmaps(maps, data.ds.side, hm_out + "/activation");
            std::printf("wrote %zu heat maps to %s\n", maps.size(), hm_out.c_str());
            return 0;
        }

        if (rp->parsed()) {
            const LoadedDataset data = load_dataset(rp_data);
            const std::vector<ReportRow> rows = build_report(rp_in, data, rp_task);
            const std::string prefix = rp_out.empty() ? rp_in + "/report_" + rp_task : rp_out;
            write_report(rows, rp_task, prefix);
            std::printf("%s\n", read_file_bytes(prefix + ".txt").c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

}  // namespace wela
