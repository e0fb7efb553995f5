#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "wela/experiments.hpp"
#include "wela/io.hpp"

using namespace wela;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
    const auto dir = fs::temp_directory_path() / (std::string("wela_exp_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

/// Micro dataset on disk with p = 2 and p = 3 labels.
std::string make_micro_dataset(const char* tag) {
    const std::string dir = temp_dir(tag);
    const BlobDataset ds = generate_dataset(6, 1, 1.0, 1.8, 0);
    save_dataset(ds,
                 {build_weak_labels(ds, WeakLabelConfig::canonical(2, 6)),
                  build_weak_labels(ds, WeakLabelConfig::canonical(3, 6))},
                 dir);
    return dir;
}

SweepConfig micro_sweep(const std::string& data, const std::string& out) {
    SweepConfig cfg;
    cfg.data_dir = data;
    cfg.out_dir = out;
    cfg.family = "tcvae";
    cfg.beta = 1.0;
    cfg.latent_tcvae = 2;
    cfg.latent_wela = 2;
    cfg.hidden = 8;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.seeds = {0, 1};
    cfg.gamma_by_p = {{2, 18.0}, {3, 12.0}};
    cfg.p_values = {2, 3};
    return cfg;
}

int run_cli(std::vector<std::string> args) {
    std::vector<char*> argv;
    args.insert(args.begin(), "wela");
    for (auto& a : args) argv.push_back(a.data());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("report statistics arithmetic") {
    std::vector<double> scores;
    for (int i = 1; i <= 10; ++i) scores.push_back(10.0 * i);
    CHECK(mean_best_tenth(scores) == 10.0);  // ceil(0.1 * 10) = 1 score

    CHECK(mean_best_tenth({42.0}) == 42.0);  // single seed: lowest = mean = best10%

    std::vector<double> fifteen;
    for (int i = 1; i <= 15; ++i) fifteen.push_back(static_cast<double>(i));
    CHECK(mean_best_tenth(fifteen) == doctest::Approx(1.5));  // ceil(1.5) = 2 scores
}

TEST_CASE("gamma rule-of-thumb helper") {
    CHECK(rule_of_thumb_gamma(4096, 4) == 1024.0);
    CHECK(rule_of_thumb_gamma(256, 6) == 43.0);
    const auto table = default_gamma_table();
    CHECK(table.at(2) == 2000.0);
    CHECK(table.at(8) == 500.0);
}

TEST_CASE("sweep validates its configuration") {
    SweepConfig cfg = micro_sweep("x", "y");
    cfg.seeds = {3, 3};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = micro_sweep("x", "y");
    cfg.family = "wela";
    cfg.gamma_by_p.erase(3);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = micro_sweep("x", "y");
    cfg.family = "nope";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("sweep runs the family cross product and resumes from completed runs") {
    const std::string data = make_micro_dataset("sweep_data");
    const std::string out = temp_dir("sweep_out");

    SweepConfig cfg = micro_sweep(data, out);
    const auto tcvae_records = run_sweep(cfg);  // 2 seeds, no labels
    CHECK(tcvae_records.size() == 2);
    for (const auto& r : tcvae_records) {
        CHECK(r.status == "ok");
        CHECK(r.p == 0);
        CHECK(r.label_accuracies.empty());
    }

    cfg.family = "wela";
    const auto wela_records = run_sweep(cfg);  // 2 p values x 2 seeds
    CHECK(wela_records.size() == 4);
    for (const auto& r : wela_records) {
        CHECK(r.status == "ok");
        CHECK((r.gamma == 18.0 || r.gamma == 12.0));
        CHECK(r.label_accuracies.size() == 2);
    }

    // second invocation reuses every completed run
    const auto again = run_sweep(cfg);
    for (const auto& r : again) CHECK(r.status == "cached");

    // reports are byte-identical across the resume
    const LoadedDataset ld = load_dataset(data);
    write_report(build_report(out, ld, "cartesian"), "cartesian", out + "/r1");
    const std::string first = read_file_bytes(out + "/r1.csv");
    run_sweep(cfg);
    write_report(build_report(out, ld, "cartesian"), "cartesian", out + "/r2");
    CHECK(read_file_bytes(out + "/r2.csv") == first);

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("interrupted sweeps extend without retraining finished seeds") {
    const std::string data = make_micro_dataset("resume_data");
    const std::string out = temp_dir("resume_out");

    SweepConfig cfg = micro_sweep(data, out);
    cfg.seeds = {0};
    run_sweep(cfg);
    cfg.seeds = {0, 1};
    const auto records = run_sweep(cfg);
    REQUIRE(records.size() == 2);
    CHECK(records[0].status == "cached");
    CHECK(records[1].status == "ok");

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("report stats recompute exactly from the per-seed metric CSVs") {
    const std::string data = make_micro_dataset("report_data");
    const std::string out = temp_dir("report_out");
    SweepConfig cfg = micro_sweep(data, out);
    cfg.seeds = {0, 1, 2};
    run_sweep(cfg);

    const LoadedDataset ld = load_dataset(data);
    const auto rows = build_report(out, ld, "cartesian");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].seeds_ok == 3);
    CHECK(rows[0].seeds_failed == 0);

    // recompute from the raw cached CSVs
    std::vector<double> mses;
    for (const auto& entry : fs::directory_iterator(out)) {
        const auto cache = entry.path() / "metrics_cartesian.csv";
        if (!fs::exists(cache)) continue;
        std::ifstream is(cache);
        std::string header, row;
        std::getline(is, header);
        std::getline(is, row);
        const auto pos = row.find(",cartesian,");
        REQUIRE(pos != std::string::npos);
        mses.push_back(std::stod(row.substr(pos + 11)));
    }
    REQUIRE(mses.size() == 3);
    const double lowest = *std::min_element(mses.begin(), mses.end());
    const double mean = (mses[0] + mses[1] + mses[2]) / 3.0;
    CHECK(rows[0].mse_lowest == lowest);
    CHECK(rows[0].mse_mean == mean);
    CHECK(rows[0].mse_best10 == mean_best_tenth(mses));
    CHECK(rows[0].mse_lowest <= rows[0].mse_best10);
    CHECK(rows[0].mse_best10 <= rows[0].mse_mean);

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("failed runs are recorded and excluded from statistics") {
    const std::string data = make_micro_dataset("fail_data");
    const std::string out = temp_dir("fail_out");
    SweepConfig cfg = micro_sweep(data, out);
    cfg.seeds = {0, 1};
    cfg.learning_rate = 1e20;  // diverges immediately
    const auto records = run_sweep(cfg);
    CHECK(records.size() == 2);
    for (const auto& r : records) {
        CHECK(r.status == "failed");
        CHECK(r.error.find("non-finite") != std::string::npos);
    }

    // one good batch of runs alongside, different config hash
    cfg.learning_rate = 1e-3;
    run_sweep(cfg);

    const LoadedDataset ld = load_dataset(data);
    const auto rows = build_report(out, ld, "cartesian");
    REQUIRE(rows.size() == 1);  // same family/p/beta/gamma grouping
    CHECK(rows[0].seeds_ok == 2);
    CHECK(rows[0].seeds_failed == 2);

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("report on an empty directory names the failure") {
    const std::string out = temp_dir("empty_runs");
    const std::string data = make_micro_dataset("empty_data");
    const LoadedDataset ld = load_dataset(data);
    CHECK_THROWS_WITH_AS(build_report(out, ld, "polar"), doctest::Contains("no runs found"),
                         std::runtime_error);
    fs::remove_all(out);
    fs::remove_all(data);
}

TEST_CASE("cli dispatch: dataset generation, training, reporting and exit codes") {
    const std::string data = temp_dir("cli_data");
    const std::string runs = temp_dir("cli_runs");

    CHECK(run_cli({"dataset", "generate", "--side", "6", "--variants", "1", "--sigma-min", "1.0",
                   "--sigma-max", "1.8", "--p", "2,3", "--out", data}) == 0);
    CHECK(fs::exists(data + "/manifest.json"));
    CHECK(fs::exists(data + "/data.bin"));

    // usage errors exit 1
    CHECK(run_cli({"dataset", "generate", "--nonsense"}) == 1);
    CHECK(run_cli({"definitely-not-a-command"}) == 1);

    // report before any runs exist exits 2
    CHECK(run_cli({"report", "--in", runs, "--data", data}) == 2);

    CHECK(run_cli({"train", "--data", data, "--family", "wela", "--p", "2", "--gamma", "18",
                   "--beta", "1", "--hidden", "8", "--epochs", "2", "--batch", "16", "--lr",
                   "1e-3", "--seed", "0", "--out", runs}) == 0);
    CHECK(run_cli({"train", "--data", data, "--family", "tcvae", "--k", "2", "--beta", "1",
                   "--hidden", "8", "--epochs", "2", "--batch", "16", "--lr", "1e-3", "--seed",
                   "1", "--out", runs}) == 0);

    // find the wela run directory for the artifact commands
    std::string wela_run;
    for (const auto& entry : fs::directory_iterator(runs))
        if (entry.path().filename().string().rfind("wela_", 0) == 0)
            wela_run = entry.path().string();
    REQUIRE(!wela_run.empty());

    CHECK(run_cli({"eval", "--checkpoint", wela_run, "--data", data, "--task", "both"}) == 0);
    CHECK(fs::exists(wela_run + "/metrics_polar.csv"));
    CHECK(fs::exists(wela_run + "/metrics_cartesian.csv"));

    const std::string art = temp_dir("cli_art");
    CHECK(run_cli({"traverse", "--checkpoint", wela_run, "--data", data, "--steps", "3", "--out",
                   art + "/trav"}) == 0);
    CHECK(fs::exists(art + "/trav/panel0.pgm"));
    CHECK(run_cli({"heatmap", "--checkpoint", wela_run, "--data", data, "--out", art + "/hm"}) == 0);
    CHECK(fs::exists(art + "/hm/activation_ch0.pgm"));
    CHECK(fs::exists(art + "/hm/activation_ch0.csv"));

    CHECK(run_cli({"report", "--in", runs, "--data", data, "--task", "polar"}) == 0);
    CHECK(fs::exists(runs + "/report_polar.csv"));
    CHECK(fs::exists(runs + "/report_polar.txt"));

    for (const auto& d : {data, runs, art}) fs::remove_all(d);
}
