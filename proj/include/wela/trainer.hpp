#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wela/dataset.hpp"
#include "wela/model.hpp"
#include "wela/objective.hpp"

namespace wela {

struct TrainConfig {
    ModelConfig model;
    double learning_rate = 1e-4;
    int batch_size = 256;
    int epochs = 150;
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::string out_dir;  // run artifacts: train_log.csv + checkpoint files

    void validate(index_t dataset_n) const;
};

struct RunResult {
    std::string out_dir;
    std::string log_path;
    LossBreakdown final_loss;
    double epoch1_mean_total = 0.0;
    std::vector<double> label_accuracies;  // one per factor, empty for TCVAE
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    int threads = 1;
    long steps = 0;
};

/// Raised when a loss term goes non-finite; carries the diagnostic snapshot.
struct DivergenceError : std::runtime_error {
    int epoch;
    long step;
    std::string term;
    DivergenceError(int epoch_, long step_, std::string term_)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch_) + ", step " +
                             std::to_string(step_) + ": non-finite " + term_),
          epoch(epoch_),
          step(step_),
          term(std::move(term_)) {}
};

/// Deterministic training loop: one stream derived from the seed drives
/// shuffling and the per-batch eps draws; weight init has its own
/// seed-derived stream. Writes one log row per optimizer step and a final
/// checkpoint under cfg.out_dir.
RunResult train(const BlobDataset& ds, const WeakLabelSet* labels, const TrainConfig& cfg);

/// Deterministic eps = 0 pass (z = mu); per factor, the fraction of samples
/// whose predicted label argmax matches the one-hot argmax. Ties break to
/// the lowest index.
std::vector<double> label_accuracy(const ParamStore& params, const ModelConfig& cfg,
                                   const BlobDataset& ds, const WeakLabelSet& labels);

/// Slices rows `idx` out of the dataset (and labels when given) as batch
/// tensors.
void make_batch(const BlobDataset& ds, const WeakLabelSet* labels,
                const std::vector<index_t>& idx, Tensor& x, std::vector<Tensor>& y);

}  // namespace wela
