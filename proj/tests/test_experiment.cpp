#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "dot/experiment.hpp"
#include "json.hpp"

using namespace dot;
using nlohmann::json;

namespace {

// A micro configuration that runs the whole pipeline in seconds.
ExperimentConfig micro_config() {
    ExperimentConfig cfg;
    cfg.l_g = 8;
    cfg.n_steps = 10;
    cfg.diffusion_epochs = 1;
    cfg.estimator_epochs = 2;
    cfg.batch_size = 16;
    cfg.infer_batch = 16;
    cfg.denoiser.l_d = 1;
    cfg.denoiser.d = 16;
    cfg.denoiser.base_channels = 8;
    cfg.d_e = 16;
    cfg.l_e = 1;
    cfg.seed = 123;
    cfg.synth.n_trajectories = 120;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config JSON round-trips and accepts overrides") {
    ExperimentConfig cfg = micro_config();
    ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.l_g == cfg.l_g);
    CHECK(back.n_steps == cfg.n_steps);
    CHECK(back.denoiser.l_d == cfg.denoiser.l_d);
    CHECK(back.d_e == cfg.d_e);
    CHECK(back.synth.n_trajectories == cfg.synth.n_trajectories);
    CHECK(back.to_json() == cfg.to_json());

    // Defaults follow the optimal hyper-parameter table.
    ExperimentConfig defaults;
    CHECK(defaults.l_g == 20);
    CHECK(defaults.n_steps == 1000);
    CHECK(defaults.denoiser.l_d == 3);
    CHECK(defaults.d_e == 128);
    CHECK(defaults.l_e == 2);
    CHECK(defaults.diffusion_epochs == 50);
    CHECK(defaults.estimator_epochs == 50);
    CHECK(defaults.lr == 0.001);
}

TEST_CASE("prepared data is consistent with the splits") {
    ExperimentConfig cfg = micro_config();
    PreparedData data = prepare_data(cfg);
    CHECK(data.train_pits.size() == data.splits.train.size());
    CHECK(data.val_pits.size() == data.splits.val.size());
    CHECK(data.test_pits.size() == data.splits.test.size());
    CHECK(data.train_pits.size() + data.val_pits.size() + data.test_pits.size() >= 100);
    for (const auto& pit : data.train_pits) CHECK(pit.l_g == cfg.l_g);
    for (double m : data.train_minutes) {
        CHECK(m >= 5.0);
        CHECK(m <= 60.0);
    }
}

TEST_CASE("the micro experiment runs end to end and is deterministic") {
    ExperimentConfig cfg = micro_config();
    const std::string out1 = "/tmp/dot_exp_a", out2 = "/tmp/dot_exp_b";
    std::filesystem::remove_all(out1);
    std::filesystem::remove_all(out2);

    ExperimentResult r1 = run_experiment(cfg, out1);
    ExperimentResult r2 = run_experiment(cfg, out2);

    // Byte-identical deterministic reports.
    CHECK(r1.report_json == r2.report_json);
    CHECK(slurp(out1 + "/report.json") == slurp(out2 + "/report.json"));
    CHECK(slurp(out1 + "/denoiser.ckpt") == slurp(out2 + "/denoiser.ckpt"));
    CHECK(slurp(out1 + "/estimator.ckpt") == slurp(out2 + "/estimator.ckpt"));

    // Schema: every required key is present.
    json report = json::parse(r1.report_json);
    for (const char* key : {"config", "dataset", "diffusion", "estimator", "metrics", "fallbacks"})
        CHECK(report.contains(key));
    for (const char* key : {"dot", "temp", "dijkstra", "pit_all_cells", "pit_valid_cells", "route"})
        CHECK(report["metrics"].contains(key));
    CHECK(report["metrics"]["dot"].contains("rmse_minutes"));
    CHECK(report["metrics"]["dot"].contains("mae_minutes"));
    CHECK(report["metrics"]["dot"].contains("mape_percent"));

    // RMSE >= MAE holds on every regression report.
    for (const char* m : {"dot", "temp", "dijkstra"})
        CHECK(double(report["metrics"][m]["rmse_minutes"]) >= double(report["metrics"][m]["mae_minutes"]));

    // A different seed changes the report.
    cfg.seed = 321;
    ExperimentResult r3 = run_experiment(cfg, "");
    CHECK(r3.report_json != r1.report_json);
}

TEST_CASE("attention benchmark favors the masked path and grows with the grid") {
    auto rows = bench_attention({10, 20, 30}, 20, 32, 2, 3, 7);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.valid == 20);
        CHECK(r.flops_masked > 0);
        CHECK(r.flops_dense > r.flops_masked);
    }
    // Fixed valid count: masked cost is grid-independent, dense cost grows.
    CHECK(rows[0].flops_masked == rows[1].flops_masked);
    CHECK(rows[1].flops_masked == rows[2].flops_masked);
    CHECK(rows[0].flops_dense < rows[1].flops_dense);
    CHECK(rows[1].flops_dense < rows[2].flops_dense);
    CHECK(rows[1].ratio > 5.0);
}
