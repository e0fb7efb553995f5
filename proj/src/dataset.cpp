#include "wela/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wela/io.hpp"

namespace wela {

const char* factor_name(Factor f) { return f == Factor::angle ? "angle" : "distance"; }

Factor factor_from_name(const std::string& name) {
    if (name == "angle") return Factor::angle;
    if (name == "distance") return Factor::distance;
    throw std::invalid_argument("unknown label factor '" + name + "'");
}

WeakLabelConfig WeakLabelConfig::canonical(int p, int side) {
    WeakLabelConfig cfg;
    cfg.p = p;
    cfg.dist_hi = std::sqrt(2.0) * side;
    cfg.validate();
    return cfg;
}

void WeakLabelConfig::range_of(Factor f, double& lo, double& hi) const {
    if (f == Factor::angle) {
        lo = angle_lo;
        hi = angle_hi;
    } else {
        lo = dist_lo;
        hi = dist_hi;
    }
}

void WeakLabelConfig::validate() const {
    if (p < 2) throw std::invalid_argument("weak labels: p must be >= 2, got " + std::to_string(p));
    if (factors.empty()) throw std::invalid_argument("weak labels: no factors configured");
    if (!(angle_hi > angle_lo) || !(dist_hi > dist_lo))
        throw std::invalid_argument("weak labels: empty value range");
}

std::vector<float> render_blob(const BlobSpec& spec, int side) {
    if (spec.sigma <= 0.0)
        throw std::invalid_argument("render_blob: sigma must be positive, got " +
                                    std::to_string(spec.sigma));
    if (side < 1) throw std::invalid_argument("render_blob: side must be >= 1");
    std::vector<float> img(static_cast<std::size_t>(side) * side);
    const double inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
    for (int v = 0; v < side; ++v) {
        const double dv = v - static_cast<double>(spec.c2);
        for (int u = 0; u < side; ++u) {
            const double du = u - static_cast<double>(spec.c1);
            img[static_cast<std::size_t>(v) * side + u] =
                static_cast<float>(std::exp(-(du * du + dv * dv) * inv));
        }
    }
    return img;
}

BlobDataset generate_dataset(int side, int variants, double sigma_min, double sigma_max,
                             std::uint64_t seed) {
    if (side < 2) throw std::invalid_argument("generate_dataset: side must be >= 2");
    if (variants < 1) throw std::invalid_argument("generate_dataset: variants must be >= 1");
    if (!(sigma_min > 0.0) || sigma_max < sigma_min)
        throw std::invalid_argument("generate_dataset: invalid sigma range [" +
                                    std::to_string(sigma_min) + ", " + std::to_string(sigma_max) +
                                    "]");
    BlobDataset ds;
    ds.side = side;
    ds.variants = variants;
    ds.sigma_min = sigma_min;
    ds.sigma_max = sigma_max;
    ds.seed = seed;

    std::vector<double> sigma_grid(static_cast<std::size_t>(variants));
    for (int v = 0; v < variants; ++v)
        sigma_grid[static_cast<std::size_t>(v)] =
            variants == 1 ? sigma_min
                          : sigma_min + (sigma_max - sigma_min) * v / (variants - 1.0);

    const index_t n = static_cast<index_t>(side) * side * variants;
    const int dim = side * side;
    ds.images.resize(static_cast<std::size_t>(n) * dim);
    ds.coords.resize(static_cast<std::size_t>(n) * 2);
    ds.sigmas.resize(static_cast<std::size_t>(n));

    // Position-major, sigma-minor; deterministic regardless of threading.
    parallel_for(static_cast<index_t>(side) * side, [&](index_t p0, index_t p1) {
        for (index_t pos = p0; pos < p1; ++pos) {
            const int c2 = static_cast<int>(pos / side);
            const int c1 = static_cast<int>(pos % side);
            for (int v = 0; v < variants; ++v) {
                const index_t i = pos * variants + v;
                const BlobSpec spec{c1, c2, sigma_grid[static_cast<std::size_t>(v)]};
                const std::vector<float> img = render_blob(spec, side);
                std::copy(img.begin(), img.end(), ds.images.begin() + i * dim);
                ds.coords[static_cast<std::size_t>(i) * 2 + 0] = static_cast<float>(c1);
                ds.coords[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>(c2);
                ds.sigmas[static_cast<std::size_t>(i)] =
                    static_cast<float>(sigma_grid[static_cast<std::size_t>(v)]);
            }
        }
    });

    ds.manifest = nlohmann::json{
        {"format", "blobs-v1"},
        {"side", side},
        {"variants", variants},
        {"sigma_min", sigma_min},
        {"sigma_max", sigma_max},
        {"sigma_grid", sigma_grid},
        {"seed", seed},
        {"n", n},
        {"dim", dim},
        {"dtype", "f32"},
        {"endianness", "little"},
    };
    return ds;
}

double angle_of(double c1, double c2) {
    if (c1 == 0.0 && c2 == 0.0) return 0.0;
    return std::atan2(c2, c1);
}

double distance_of(double c1, double c2) { return std::sqrt(c1 * c1 + c2 * c2); }

int bin_index(double value, double lo, double hi, int p) {
    if (p < 1) throw std::invalid_argument("bin_index: p must be >= 1");
    if (!(value >= lo) || !(value <= hi))
        throw std::domain_error("bin_index: value " + std::to_string(value) +
                                " outside range [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
    const int idx = static_cast<int>(std::floor(p * (value - lo) / (hi - lo)));
    return std::min(p - 1, idx);
}

std::vector<float> bin_label(double value, double lo, double hi, int p) {
    std::vector<float> onehot(static_cast<std::size_t>(p), 0.0f);
    onehot[static_cast<std::size_t>(bin_index(value, lo, hi, p))] = 1.0f;
    return onehot;
}

WeakLabelSet labels_for_coords(const std::vector<float>& coords, const WeakLabelConfig& cfg) {
    cfg.validate();
    const std::size_t n = coords.size() / 2;
    WeakLabelSet set;
    set.p = cfg.p;
    set.factors = cfg.factors;
    set.onehot.resize(cfg.factors.size());
    for (std::size_t f = 0; f < cfg.factors.size(); ++f) {
        double lo, hi;
        cfg.range_of(cfg.factors[f], lo, hi);
        auto& mat = set.onehot[f];
        mat.assign(n * static_cast<std::size_t>(cfg.p), 0.0f);
        for (std::size_t i = 0; i < n; ++i) {
            const double c1 = coords[i * 2 + 0];
            const double c2 = coords[i * 2 + 1];
            const double value =
                cfg.factors[f] == Factor::angle ? angle_of(c1, c2) : distance_of(c1, c2);
            mat[i * static_cast<std::size_t>(cfg.p) +
                static_cast<std::size_t>(bin_index(value, lo, hi, cfg.p))] = 1.0f;
        }
    }
    return set;
}

WeakLabelSet build_weak_labels(const BlobDataset& ds, const WeakLabelConfig& cfg) {
    return labels_for_coords(ds.coords, cfg);
}

// ---------------------------------------------------------------------------
// Persistence.

namespace {

std::string section_name(int p, Factor f) {
    return "labels_p" + std::to_string(p) + "_" + factor_name(f);
}

void append_section(nlohmann::json& sections, std::string name, std::size_t& cursor,
                    std::size_t count) {
    sections[name] = {{"offset", cursor}, {"count", count}};
    cursor += count;
}

}  // namespace

std::string dataset_content_hash(const BlobDataset& ds, const std::vector<WeakLabelSet>& labels) {
    std::uint64_t h = fnv1a64(ds.images.data(), ds.images.size() * sizeof(float));
    h = fnv1a64(ds.coords.data(), ds.coords.size() * sizeof(float), h);
    h = fnv1a64(ds.sigmas.data(), ds.sigmas.size() * sizeof(float), h);
    for (const auto& set : labels)
        for (const auto& mat : set.onehot) h = fnv1a64(mat.data(), mat.size() * sizeof(float), h);
    return "fnv1a64:" + hash_hex(h);
}

void save_dataset(const BlobDataset& ds, const std::vector<WeakLabelSet>& labels,
                  const std::string& dir) {
    std::filesystem::create_directories(dir);

    nlohmann::json manifest = ds.manifest;
    nlohmann::json sections = nlohmann::json::object();
    std::size_t cursor = 0;
    append_section(sections, "images", cursor, ds.images.size());
    append_section(sections, "coords", cursor, ds.coords.size());
    append_section(sections, "sigmas", cursor, ds.sigmas.size());

    nlohmann::json label_cfgs = nlohmann::json::array();
    for (const auto& set : labels) {
        nlohmann::json cfg;
        cfg["p"] = set.p;
        cfg["factors"] = nlohmann::json::array();
        for (std::size_t f = 0; f < set.factors.size(); ++f) {
            cfg["factors"].push_back(factor_name(set.factors[f]));
            append_section(sections, section_name(set.p, set.factors[f]), cursor,
                           set.onehot[f].size());
        }
        label_cfgs.push_back(cfg);
    }
    manifest["sections"] = sections;
    manifest["labels"] = label_cfgs;
    manifest["content_hash"] = dataset_content_hash(ds, labels);

    {
        std::ofstream os(dir + "/data.bin", std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: " + dir + "/data.bin");
        write_f32_le(os, ds.images.data(), ds.images.size());
        write_f32_le(os, ds.coords.data(), ds.coords.size());
        write_f32_le(os, ds.sigmas.data(), ds.sigmas.size());
        for (const auto& set : labels)
            for (const auto& mat : set.onehot) write_f32_le(os, mat.data(), mat.size());
    }
    write_file_bytes(dir + "/manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset load_dataset(const std::string& dir) {
    nlohmann::json manifest = nlohmann::json::parse(read_file_bytes(dir + "/manifest.json"));
    if (manifest.value("format", "") != "blobs-v1")
        throw std::runtime_error("load_dataset: unsupported manifest format in " + dir);

    LoadedDataset out;
    BlobDataset& ds = out.ds;
    ds.side = manifest.at("side").get<int>();
    ds.variants = manifest.at("variants").get<int>();
    ds.sigma_min = manifest.at("sigma_min").get<double>();
    ds.sigma_max = manifest.at("sigma_max").get<double>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.manifest = manifest;

    std::ifstream is(dir + "/data.bin", std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + dir + "/data.bin");

    const auto& sections = manifest.at("sections");
    auto read_section = [&](const std::string& name) {
        const auto& sec = sections.at(name);
        is.seekg(static_cast<std::streamoff>(sec.at("offset").get<std::size_t>() * 4));
        return read_f32_le(is, sec.at("count").get<std::size_t>());
    };
    ds.images = read_section("images");
    ds.coords = read_section("coords");
    ds.sigmas = read_section("sigmas");

    for (const auto& cfg : manifest.at("labels")) {
        WeakLabelSet set;
        set.p = cfg.at("p").get<int>();
        for (const auto& f : cfg.at("factors")) {
            set.factors.push_back(factor_from_name(f.get<std::string>()));
            set.onehot.push_back(read_section(section_name(set.p, set.factors.back())));
        }
        out.labels_by_p.emplace(set.p, std::move(set));
    }

    std::vector<WeakLabelSet> label_list;
    label_list.reserve(out.labels_by_p.size());
    for (const auto& [p, set] : out.labels_by_p) label_list.push_back(set);
    const std::string want = manifest.value("content_hash", "");
    const std::string got = dataset_content_hash(ds, label_list);
    if (!want.empty() && want != got)
        throw std::runtime_error("load_dataset: content hash mismatch in " + dir + " (manifest " +
                                 want + ", data " + got + ")");
    return out;
}

}  // namespace wela
