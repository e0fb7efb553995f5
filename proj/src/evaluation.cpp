#include "wela/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "wela/io.hpp"
#include "wela/objective.hpp"
#include "wela/trainer.hpp"

namespace wela {

void RepresentationMatrix::compute_ranges() {
    ch_min.assign(static_cast<std::size_t>(k), 0.0f);
    ch_max.assign(static_cast<std::size_t>(k), 0.0f);
    degenerate.assign(static_cast<std::size_t>(k), 0);
    for (int c = 0; c < k; ++c) {
        float lo = mu_at(0, c), hi = mu_at(0, c);
        for (index_t i = 1; i < n; ++i) {
            lo = std::min(lo, mu_at(i, c));
            hi = std::max(hi, mu_at(i, c));
        }
        ch_min[static_cast<std::size_t>(c)] = lo;
        ch_max[static_cast<std::size_t>(c)] = hi;
        degenerate[static_cast<std::size_t>(c)] =
            (static_cast<double>(hi) - static_cast<double>(lo) < 1e-9) ? 1 : 0;
    }
}

RepresentationMatrix represent(const ParamStore& params, const ModelConfig& cfg,
                               const BlobDataset& ds, const WeakLabelSet* labels) {
    if ((labels == nullptr) != (cfg.m() == 0))
        throw std::invalid_argument("represent: labels must be supplied iff the model uses them");
    RepresentationMatrix rep;
    rep.n = ds.n();
    rep.k = cfg.latent_dim;
    rep.mu.resize(static_cast<std::size_t>(rep.n) * rep.k);
    rep.coords = ds.coords;

    const index_t chunk = 1024;
    std::vector<index_t> idx;
    for (index_t start = 0; start < rep.n; start += chunk) {
        const index_t stop = std::min(rep.n, start + chunk);
        idx.resize(static_cast<std::size_t>(stop - start));
        std::iota(idx.begin(), idx.end(), start);
        Tensor x;
        std::vector<Tensor> y;
        make_batch(ds, labels, idx, x, y);
        const LatentCode code = encode(params, cfg, x, y);  // eps = 0: mu is the representation
        std::copy(code.mu.data.begin(), code.mu.data.end(),
                  rep.mu.begin() + static_cast<std::size_t>(start) * rep.k);
    }
    rep.compute_ranges();
    return rep;
}

std::vector<float> rescale_channel(const std::vector<float>& values, double lo, double hi,
                                   bool invert, bool* degenerate_flag) {
    if (values.empty()) throw std::invalid_argument("rescale_channel: empty channel");
    double vmin = values[0], vmax = values[0];
    for (float v : values) {
        vmin = std::min(vmin, static_cast<double>(v));
        vmax = std::max(vmax, static_cast<double>(v));
    }
    std::vector<float> out(values.size());
    if (vmax - vmin < 1e-9) {
        std::fill(out.begin(), out.end(), static_cast<float>((lo + hi) / 2.0));
        if (degenerate_flag) *degenerate_flag = true;
        return out;
    }
    if (degenerate_flag) *degenerate_flag = false;
    const double scale = (hi - lo) / (vmax - vmin);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = (static_cast<double>(values[i]) - vmin) * scale + lo;
        if (invert) v = hi + lo - v;
        out[i] = static_cast<float>(v);
    }
    return out;
}

double polar_distance_cap(int side) { return side == 64 ? 90.5 : std::sqrt(2.0) * side; }

namespace {

/// Rescaled copies of one channel: [invert 0/1] -> values.
std::array<std::vector<float>, 2> channel_variants(const RepresentationMatrix& rep, int ch,
                                                   double lo, double hi) {
    std::vector<float> raw(static_cast<std::size_t>(rep.n));
    for (index_t i = 0; i < rep.n; ++i) raw[static_cast<std::size_t>(i)] = rep.mu_at(i, ch);
    return {rescale_channel(raw, lo, hi, false), rescale_channel(raw, lo, hi, true)};
}

}  // namespace

MetricResult cartesian_mse(const RepresentationMatrix& rep, int side) {
    if (rep.k < 2) throw std::invalid_argument("cartesian_mse: needs K >= 2, got K = " +
                                               std::to_string(rep.k));
    std::vector<std::array<std::vector<float>, 2>> scaled;
    for (int c = 0; c < rep.k; ++c)
        scaled.push_back(channel_variants(rep, c, 0.0, static_cast<double>(side)));

    MetricResult best;
    best.task = "cartesian";
    best.mse = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rep.k; ++i)
        for (int j = 0; j < rep.k; ++j) {
            if (i == j) continue;
            for (int vi = 0; vi < 2; ++vi)
                for (int vj = 0; vj < 2; ++vj) {
                    const auto& c1t = scaled[static_cast<std::size_t>(i)][static_cast<std::size_t>(vi)];
                    const auto& c2t = scaled[static_cast<std::size_t>(j)][static_cast<std::size_t>(vj)];
                    double acc = 0.0;
                    for (index_t s = 0; s < rep.n; ++s) {
                        const double d1 = rep.coords[static_cast<std::size_t>(s) * 2 + 0] -
                                          c1t[static_cast<std::size_t>(s)];
                        const double d2 = rep.coords[static_cast<std::size_t>(s) * 2 + 1] -
                                          c2t[static_cast<std::size_t>(s)];
                        acc += d1 * d1 + d2 * d2;
                    }
                    acc /= static_cast<double>(rep.n);
                    if (acc < best.mse) {
                        best.mse = acc;
                        best.ch_i = i;
                        best.ch_j = j;
                        best.invert_i = vi == 1;
                        best.invert_j = vj == 1;
                    }
                }
        }
    return best;
}

MetricResult polar_mse(const RepresentationMatrix& rep, int side) {
    if (rep.k < 2)
        throw std::invalid_argument("polar_mse: needs K >= 2, got K = " + std::to_string(rep.k));
    const double dmax = polar_distance_cap(side);

    // Angle variants carry precomputed cos/sin; distance variants are raw.
    std::vector<std::array<std::vector<float>, 2>> ang_cos(static_cast<std::size_t>(rep.k));
    std::vector<std::array<std::vector<float>, 2>> ang_sin(static_cast<std::size_t>(rep.k));
    std::vector<std::array<std::vector<float>, 2>> dist(static_cast<std::size_t>(rep.k));
    for (int c = 0; c < rep.k; ++c) {
        const auto ang = channel_variants(rep, c, 0.0, M_PI / 2.0);
        for (int v = 0; v < 2; ++v) {
            auto& cs = ang_cos[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)];
            auto& sn = ang_sin[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)];
            cs.resize(static_cast<std::size_t>(rep.n));
            sn.resize(static_cast<std::size_t>(rep.n));
            for (index_t s = 0; s < rep.n; ++s) {
                const double a = ang[static_cast<std::size_t>(v)][static_cast<std::size_t>(s)];
                cs[static_cast<std::size_t>(s)] = static_cast<float>(std::cos(a));
                sn[static_cast<std::size_t>(s)] = static_cast<float>(std::sin(a));
            }
        }
        dist[static_cast<std::size_t>(c)] = channel_variants(rep, c, 0.0, dmax);
    }

    MetricResult best;
    best.task = "polar";
    best.mse = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rep.k; ++i)      // angle channel
        for (int j = 0; j < rep.k; ++j) {  // distance channel
            if (i == j) continue;
            for (int vi = 0; vi < 2; ++vi)
                for (int vj = 0; vj < 2; ++vj) {
                    const auto& cs = ang_cos[static_cast<std::size_t>(i)][static_cast<std::size_t>(vi)];
                    const auto& sn = ang_sin[static_cast<std::size_t>(i)][static_cast<std::size_t>(vi)];
                    const auto& dd = dist[static_cast<std::size_t>(j)][static_cast<std::size_t>(vj)];
                    double acc = 0.0;
                    for (index_t s = 0; s < rep.n; ++s) {
                        const double d = dd[static_cast<std::size_t>(s)];
                        const double d1 = rep.coords[static_cast<std::size_t>(s) * 2 + 0] -
                                          d * cs[static_cast<std::size_t>(s)];
                        const double d2 = rep.coords[static_cast<std::size_t>(s) * 2 + 1] -
                                          d * sn[static_cast<std::size_t>(s)];
                        acc += d1 * d1 + d2 * d2;
                    }
                    acc /= static_cast<double>(rep.n);
                    if (acc < best.mse) {
                        best.mse = acc;
                        best.ch_i = i;
                        best.ch_j = j;
                        best.invert_i = vi == 1;
                        best.invert_j = vj == 1;
                    }
                }
        }
    return best;
}

// ---------------------------------------------------------------------------
// Artifacts.

TraversalGrid traverse(const ParamStore& params, const ModelConfig& cfg, const Tensor& x,
                       const std::vector<Tensor>& y, double lo, double hi, int steps) {
    if (steps < 2) throw std::invalid_argument("traverse: steps must be >= 2");
    if (x.rows() != 1) throw std::invalid_argument("traverse: expects a single sample");
    const int k = cfg.latent_dim;
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cfg.obs_dim))));

    const LatentCode code = encode(params, cfg, x, y);

    // One decode batch: row (ch * steps + s) sweeps channel ch at step s.
    Tensor zs({static_cast<index_t>(k) * steps, k});
    for (int ch = 0; ch < k; ++ch)
        for (int s = 0; s < steps; ++s) {
            const index_t row = static_cast<index_t>(ch) * steps + s;
            for (int d = 0; d < k; ++d) zs.at(row, d) = code.mu.at(0, d);
            zs.at(row, ch) = static_cast<float>(lo + (hi - lo) * s / (steps - 1.0));
        }
    const DecoderOutput out = decode(params, cfg, zs);

    TraversalGrid grid;
    grid.channels = k;
    grid.steps = steps;
    grid.side = side;
    grid.lo = lo;
    grid.hi = hi;
    grid.images.resize(out.pixel_logits.data.size());
    for (std::size_t i = 0; i < grid.images.size(); ++i)
        grid.images[i] = static_cast<float>(detail::sigmoid(out.pixel_logits.data[i]));
    return grid;
}

std::vector<std::vector<float>> heatmap(const ParamStore& params, const ModelConfig& cfg,
                                        const BlobDataset& ds, const WeakLabelSet* labels) {
    const int side = ds.side;
    const RepresentationMatrix rep = represent(params, cfg, ds, labels);

    std::vector<long> counts(static_cast<std::size_t>(side) * side, 0);
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(rep.k),
        std::vector<double>(static_cast<std::size_t>(side) * side, 0.0));
    for (index_t i = 0; i < rep.n; ++i) {
        const int c1 = static_cast<int>(std::lround(rep.coords[static_cast<std::size_t>(i) * 2 + 0]));
        const int c2 = static_cast<int>(std::lround(rep.coords[static_cast<std::size_t>(i) * 2 + 1]));
        if (c1 < 0 || c1 >= side || c2 < 0 || c2 >= side)
            throw std::invalid_argument("heatmap: sample position off the canvas grid");
        const std::size_t cell = static_cast<std::size_t>(c2) * side + c1;
        ++counts[cell];
        for (int ch = 0; ch < rep.k; ++ch)
            sums[static_cast<std::size_t>(ch)][cell] += rep.mu_at(i, ch);
    }
    for (long c : counts)
        if (c != ds.variants)
            throw std::invalid_argument("heatmap: dataset is not the canonical position grid");

    std::vector<std::vector<float>> maps(static_cast<std::size_t>(rep.k));
    for (int ch = 0; ch < rep.k; ++ch) {
        auto& m = maps[static_cast<std::size_t>(ch)];
        m.resize(static_cast<std::size_t>(side) * side);
        for (std::size_t cell = 0; cell < m.size(); ++cell)
            m[cell] = static_cast<float>(sums[static_cast<std::size_t>(ch)][cell] /
                                         static_cast<double>(ds.variants));
    }
    return maps;
}

std::vector<index_t> traversal_panel_indices(const BlobDataset& ds) {
    const int s = ds.side;
    const std::vector<std::pair<int, int>> positions = {
        {0, 0}, {s - 1, s - 1}, {s / 2, s / 2}, {s - 1, 0}, {0, s - 1},
        {s / 2, 0}, {0, s / 2}};
    std::vector<index_t> idx;
    for (auto [c1, c2] : positions)
        idx.push_back((static_cast<index_t>(c2) * s + c1) * ds.variants);  // first variant
    return idx;
}

void write_traversal(const TraversalGrid& grid, const std::string& path_prefix) {
    const int w = grid.steps * grid.side;
    const int h = grid.channels * grid.side;
    std::vector<unsigned char> gray(static_cast<std::size_t>(w) * h, 0);
    for (int ch = 0; ch < grid.channels; ++ch)
        for (int s = 0; s < grid.steps; ++s) {
            const float* cell = grid.cell(ch, s);
            for (int v = 0; v < grid.side; ++v)
                for (int u = 0; u < grid.side; ++u) {
                    const double val = std::clamp(static_cast<double>(cell[v * grid.side + u]), 0.0, 1.0);
                    gray[static_cast<std::size_t>(ch * grid.side + v) * w + s * grid.side + u] =
                        static_cast<unsigned char>(std::lround(val * 255.0));
                }
        }
    write_pgm(path_prefix + ".pgm", w, h, gray);

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "grid: rows = %d latent channels, cols = %d sweep steps in [%g, %g]\n"
                  "gray = round(pixel * 255), pixel = sigmoid(logit) in [0, 1]\n",
                  grid.channels, grid.steps, grid.lo, grid.hi);
    write_file_bytes(path_prefix + ".txt", buf);
}

void write_heatmaps(const std::vector<std::vector<float>>& maps, int side,
                    const std::string& path_prefix) {
    for (std::size_t ch = 0; ch < maps.size(); ++ch) {
        const auto& m = maps[ch];
        std::vector<unsigned char> gray(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double v = std::clamp((static_cast<double>(m[i]) + 3.0) / 6.0, 0.0, 1.0);
            gray[i] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        const std::string stem = path_prefix + "_ch" + std::to_string(ch);
        write_pgm(stem + ".pgm", side, side, gray);

        // Raw values as CSV for exactness; row index is c2, column index c1.
        std::string csv;
        char buf[32];
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                std::snprintf(buf, sizeof(buf), c + 1 == side ? "%.9g" : "%.9g,",
                              static_cast<double>(m[static_cast<std::size_t>(r) * side + c]));
                csv += buf;
            }
            csv += "\n";
        }
        write_file_bytes(stem + ".csv", csv);
    }
    write_file_bytes(path_prefix + "_scale.txt",
                     "gray = round(clamp((value + 3) / 6, 0, 1) * 255); value clipped to [-3, 3]\n");
}

}  // namespace wela
