#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wela/tensor.hpp"

namespace wela {

/// One Gaussian blob: center in pixels (c1 horizontal / column, c2 vertical /
/// row, origin at the top-left corner) and standard deviation in pixels.
struct BlobSpec {
    int c1 = 0;
    int c2 = 0;
    double sigma = 1.0;
};

/// The Blobs training set: one white Gaussian blob per image on a black
/// side x side canvas, every integer center position repeated `variants`
/// times with a fixed sigma grid.
struct BlobDataset {
    int side = 64;
    int variants = 25;
    double sigma_min = 1.5;
    double sigma_max = 4.0;
    std::uint64_t seed = 0;

    std::vector<float> images;  // n * dim, row-major per image
    std::vector<float> coords;  // n * 2, (c1, c2)
    std::vector<float> sigmas;  // n
    nlohmann::json manifest;

    index_t n() const { return static_cast<index_t>(sigmas.size()); }
    int dim() const { return side * side; }

    const float* image(index_t i) const { return images.data() + i * dim(); }
};

enum class Factor { angle, distance };

const char* factor_name(Factor f);
Factor factor_from_name(const std::string& name);

/// Membership-label construction: each factor's value range is split into p
/// equal-width bins and a sample's label is the one-hot of its bin.
struct WeakLabelConfig {
    int p = 2;
    std::vector<Factor> factors{Factor::angle, Factor::distance};
    double angle_lo = 0.0;
    double angle_hi = M_PI / 2.0;
    double dist_lo = 0.0;
    double dist_hi = 0.0;  // sqrt(2) * side for the canonical canvas

    static WeakLabelConfig canonical(int p, int side);
    int m() const { return static_cast<int>(factors.size()); }
    void range_of(Factor f, double& lo, double& hi) const;
    void validate() const;
};

/// Per-factor one-hot matrices (n x p each), aligned with the dataset rows.
struct WeakLabelSet {
    int p = 0;
    std::vector<Factor> factors;
    std::vector<std::vector<float>> onehot;  // one n*p matrix per factor

    int m() const { return static_cast<int>(factors.size()); }
};

/// pixel(u, v) = exp(-((u - c1)^2 + (v - c2)^2) / (2 sigma^2)); row-major,
/// so entry v * side + u. Peak value 1 at the center pixel.
std::vector<float> render_blob(const BlobSpec& spec, int side);

/// Canonical generation: for every integer position, `variants` images whose
/// sigmas are evenly spaced in [sigma_min, sigma_max]. Position-major,
/// sigma-minor ordering. The seed is recorded for a future jitter mode but
/// unused by the canonical grid.
BlobDataset generate_dataset(int side, int variants, double sigma_min, double sigma_max,
                             std::uint64_t seed);

/// Polar view of a center position; angle_of(0, 0) is defined as 0.
double angle_of(double c1, double c2);
double distance_of(double c1, double c2);

/// Equal-width binning with the top boundary folded into the last bin.
int bin_index(double value, double lo, double hi, int p);
std::vector<float> bin_label(double value, double lo, double hi, int p);

WeakLabelSet build_weak_labels(const BlobDataset& ds, const WeakLabelConfig& cfg);

/// Labels computed straight from a coordinate list (n x 2, (c1, c2) pairs).
WeakLabelSet labels_for_coords(const std::vector<float>& coords, const WeakLabelConfig& cfg);

// ---------------------------------------------------------------------------
// On-disk form: <dir>/manifest.json plus <dir>/data.bin, a little-endian
// float32 blob laid out [images | coords | sigmas | labels per factor] with
// offsets (in floats) recorded in the manifest.

void save_dataset(const BlobDataset& ds, const std::vector<WeakLabelSet>& labels,
                  const std::string& dir);

struct LoadedDataset {
    BlobDataset ds;
    std::map<int, WeakLabelSet> labels_by_p;
};

LoadedDataset load_dataset(const std::string& dir);

std::string dataset_content_hash(const BlobDataset& ds, const std::vector<WeakLabelSet>& labels);

}  // namespace wela
