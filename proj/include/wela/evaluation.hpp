#pragma once

#include <string>
#include <vector>

#include "wela/dataset.hpp"
#include "wela/model.hpp"

namespace wela {

/// Mean-vector representation of a whole dataset (eps = 0), with per-channel
/// value ranges used by the metric rescaling.
struct RepresentationMatrix {
    index_t n = 0;
    int k = 0;
    std::vector<float> mu;       // n * k
    std::vector<float> coords;   // n * 2 ground-truth (c1, c2)
    std::vector<float> ch_min, ch_max;
    std::vector<unsigned char> degenerate;  // max - min < 1e-9

    float mu_at(index_t i, int ch) const { return mu[static_cast<std::size_t>(i) * k + ch]; }
    void compute_ranges();
};

struct MetricResult {
    double mse = 0.0;
    int ch_i = -1, ch_j = -1;        // channel assignment (i != j)
    bool invert_i = false, invert_j = false;
    std::string task;                 // "cartesian" | "polar"
};

/// Builds the representation matrix for every sample in the dataset.
/// Labels must be supplied iff the model consumes them.
RepresentationMatrix represent(const ParamStore& params, const ModelConfig& cfg,
                               const BlobDataset& ds, const WeakLabelSet* labels);

/// Linear map of a channel's [min, max] onto [lo, hi]; `invert` reverses the
/// order within the same range. A degenerate channel (max - min < 1e-9) maps
/// to the constant midpoint and sets the flag.
std::vector<float> rescale_channel(const std::vector<float>& values, double lo, double hi,
                                   bool invert, bool* degenerate_flag = nullptr);

/// Distance cap of the polar metric: the canonical 64-pixel canvas uses the
/// rounded 90.5 constant, other sides use sqrt(2) * side.
double polar_distance_cap(int side);

/// Coordinate-recovery error, Cartesian task: each candidate channel pair
/// (i, j), i != j, with all four inversion combinations is rescaled to
/// [0, side] as (c1~, c2~); returns the minimum over candidates of
/// mean ||(c1, c2) - (c1~, c2~)||^2 together with the winning assignment.
MetricResult cartesian_mse(const RepresentationMatrix& rep, int side);

/// Polar task: channel i rescaled to [0, pi/2] as the angle, channel j to
/// [0, polar_distance_cap(side)] as the distance, mapped through
/// (d cos a, d sin a), same search and reduction as the Cartesian task.
MetricResult polar_mse(const RepresentationMatrix& rep, int side);

// ---------------------------------------------------------------------------
// Qualitative artifacts.

/// One traversal panel: rows = latent channels, columns = sweep steps;
/// decoded pixels passed through sigmoid, so all values lie in [0, 1].
struct TraversalGrid {
    int channels = 0;
    int steps = 0;
    int side = 0;
    double lo = -3.0, hi = 3.0;
    std::vector<float> images;  // channels * steps * side * side

    const float* cell(int ch, int step) const {
        return images.data() +
               (static_cast<std::size_t>(ch) * steps + step) * (side * side);
    }
};

TraversalGrid traverse(const ParamStore& params, const ModelConfig& cfg, const Tensor& x,
                       const std::vector<Tensor>& y, double lo = -3.0, double hi = 3.0,
                       int steps = 10);

/// Per-channel mean activation by blob position: map[k][c2 * side + c1] is
/// the mean of mu_k over the `variants` samples at that position. Requires
/// the canonical grid dataset.
std::vector<std::vector<float>> heatmap(const ParamStore& params, const ModelConfig& cfg,
                                        const BlobDataset& ds, const WeakLabelSet* labels);

/// Sample indices for the fixed traversal panel: corners, center and
/// mid-edge positions, first variant each.
std::vector<index_t> traversal_panel_indices(const BlobDataset& ds);

void write_traversal(const TraversalGrid& grid, const std::string& path_prefix);
void write_heatmaps(const std::vector<std::vector<float>>& maps, int side,
                    const std::string& path_prefix);

}  // namespace wela
