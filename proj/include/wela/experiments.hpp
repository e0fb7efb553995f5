#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wela/dataset.hpp"
#include "wela/evaluation.hpp"
#include "wela/trainer.hpp"

namespace wela {

/// Multi-seed sweep over one model family. Runs are content-addressed by
/// (config hash, seed): a completed run directory whose checkpoint verifies
/// is skipped, so interrupted sweeps resume cleanly.
struct SweepConfig {
    std::string data_dir;
    std::string out_dir;
    std::string family;                // "tcvae" | "wela"
    double beta = 40.0;
    std::map<int, double> gamma_by_p;  // label dim -> gamma (wela)
    std::vector<int> p_values;         // wela label dimensionalities
    int latent_tcvae = 5;
    int latent_wela = 2;
    int hidden = 1200;
    int hidden_layers = 2;
    int epochs = 150;
    int batch_size = 256;
    double learning_rate = 1e-4;
    std::vector<std::uint64_t> seeds;
    int jobs = 1;

    void validate() const;
};

struct RunRecord {
    std::string run_dir;
    std::string family;
    int p = 0;  // 0 for tcvae
    double beta = 0.0, gamma = 0.0;
    std::uint64_t seed = 0;
    std::string status;  // "ok" | "failed" | "cached"
    std::string error;
    std::vector<double> label_accuracies;
    double final_total = 0.0;
    double wall_seconds = 0.0;
};

/// Table-defaults for the canonical 4096-pixel dataset.
std::map<int, double> default_gamma_table();

/// gamma such that image dimension ~ gamma * total label dimension.
double rule_of_thumb_gamma(int obs_dim, int label_total);

/// Warns on stderr when gamma * label_total strays beyond a factor of two
/// from the image dimension.
void check_gamma_rule(double gamma, int label_total, int obs_dim, int p);

ModelConfig sweep_model_config(const SweepConfig& cfg, const BlobDataset& ds, int p);

std::vector<RunRecord> run_sweep(const SweepConfig& cfg);

/// One training run addressed by (model config, trainer knobs, seed);
/// reused by the `train` CLI and the sweep workers.
RunRecord run_single(const LoadedDataset& data, const ModelConfig& model, double learning_rate,
                     int batch_size, int epochs, std::uint64_t seed, const std::string& family,
                     int p, const std::string& out_root);

// ---------------------------------------------------------------------------
// Reporting.

struct ReportRow {
    std::string family;
    int p = 0;
    double beta = 0.0, gamma = 0.0;
    int seeds_ok = 0, seeds_failed = 0;
    double acc_angle = 0.0, acc_distance = 0.0;  // of the lowest-MSE run
    double mse_lowest = 0.0, mse_mean = 0.0, mse_best10 = 0.0;
    bool available = false;
};

/// Per-run metric, cached as metrics_<task>.csv inside the run directory.
/// Stats are computed from the cached file so a recomputation from the raw
/// CSVs reproduces the report exactly.
MetricResult run_metric(const std::string& run_dir, const std::string& task,
                        const LoadedDataset& data);
double run_mse(const std::string& run_dir, const std::string& task, const LoadedDataset& data);

std::vector<ReportRow> build_report(const std::string& runs_dir, const LoadedDataset& data,
                                    const std::string& task);

void write_report(const std::vector<ReportRow>& rows, const std::string& task,
                  const std::string& out_prefix);

/// Best-10% statistic: mean of the best ceil(0.1 * count) scores.
double mean_best_tenth(std::vector<double> scores);

int cli_main(int argc, char** argv);

}  // namespace wela
