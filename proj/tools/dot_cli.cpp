// Command-line front end for the two-stage OD travel-time oracle: data
// generation, preprocessing, rasterization, both training stages, single
// queries, baselines, evaluation, the attention benchmark, and the full
// experiment pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dot/baselines.hpp"
#include "dot/checkpoint.hpp"
#include "dot/data.hpp"
#include "dot/diffusion.hpp"
#include "dot/experiment.hpp"
#include "dot/metrics.hpp"

using namespace dot;
using nlohmann::json;

namespace {

struct SharedFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    int l_g = 0, n_steps = 0, l_d = 0, d_e = 0, l_e = 0;
    bool seed_set = false;

    ExperimentConfig build() const {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = ExperimentConfig::from_json_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (l_g > 0) cfg.l_g = l_g;
        if (n_steps > 0) cfg.n_steps = n_steps;
        if (l_d > 0) cfg.denoiser.l_d = l_d;
        if (d_e > 0) cfg.d_e = d_e;
        if (l_e > 0) cfg.l_e = l_e;
        cfg.validate();
        return cfg;
    }
};

void add_shared_flags(CLI::App* cmd, SharedFlags& f) {
    cmd->add_option("--config", f.config_path, "Experiment config JSON");
    cmd->add_option("--out", f.out_dir, "Output directory");
    cmd->add_option("--seed", f.seed, "Run seed")->each([&f](const std::string&) { f.seed_set = true; });
    cmd->add_option("--L_G", f.l_g, "Grid length per axis");
    cmd->add_option("--N", f.n_steps, "Diffusion steps");
    cmd->add_option("--L_D", f.l_d, "Denoiser down/up block count");
    cmd->add_option("--d_E", f.d_e, "Estimator embedding width");
    cmd->add_option("--L_E", f.l_e, "Estimator layer count");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void dump_pit_csv(const std::string& path, const PiT& pit) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fprintf(f, "%d,%d,3\n", pit.l_g, pit.l_g);
    for (std::int64_t p = 0; p < pit.cells(); ++p)
        std::fprintf(f, "%.9g,%.9g,%.9g\n", pit.v[size_t(p) * 3], pit.v[size_t(p) * 3 + 1], pit.v[size_t(p) * 3 + 2]);
    std::fclose(f);
}

// PiT sets are stored as a checkpoint tensor table, one [L,L,3] tensor per
// query, named pit_<index>.
void dump_pits_ckpt(const std::string& path, const std::vector<PiT>& pits, const std::string& meta) {
    ParamStore store;
    char name[32];
    for (size_t i = 0; i < pits.size(); ++i) {
        std::snprintf(name, sizeof name, "pit_%06zu", i);
        store.add(name, pit_to_tensor<float>(pits[i]));
    }
    save_checkpoint(store, meta, path);
}

Denoiser load_denoiser(const std::string& path, ExperimentConfig& cfg_out, AreaOfInterest& aoi_out) {
    auto [store, meta] = load_checkpoint(path);
    json m = json::parse(meta);
    cfg_out = ExperimentConfig::from_json(m.at("config").dump());
    aoi_out = aoi_from_meta_json(meta);
    Denoiser model(cfg_out.denoiser, 0);
    load_into(model.store(), store);
    return model;
}

MViT load_estimator(const std::string& path, ExperimentConfig& cfg_out, AreaOfInterest& aoi_out) {
    auto [store, meta] = load_checkpoint(path);
    json m = json::parse(meta);
    cfg_out = ExperimentConfig::from_json(m.at("config").dump());
    aoi_out = aoi_from_meta_json(meta);
    MViTConfig mc;
    mc.l_g = cfg_out.l_g;
    mc.d_e = cfg_out.d_e;
    mc.l_e = cfg_out.l_e;
    mc.heads = cfg_out.estimator_heads;
    MViT model(mc, 0);
    load_into(model.store(), store);
    return model;
}

json regression_to_json(const RegressionReport& r) {
    return json{{"rmse_minutes", r.rmse}, {"mae_minutes", r.mae}, {"mape_percent", r.mape}, {"n", r.n}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DOT: diffusion-based origin-destination travel time oracle"};
    app.require_subcommand(1);

    SharedFlags flags;
    std::string input_csv;
    std::string denoiser_ckpt, estimator_ckpt;
    std::string split_name = "test";
    std::string baseline_name;
    std::string dump_pit_path;
    double q_from_lng = 0, q_from_lat = 0, q_to_lng = 0, q_to_lat = 0;
    std::int64_t q_depart = 0;

    auto* cmd_generate = app.add_subcommand("generate", "Write a synthetic trajectory CSV");
    add_shared_flags(cmd_generate, flags);

    auto* cmd_preprocess = app.add_subcommand("preprocess", "Filter a trajectory CSV");
    add_shared_flags(cmd_preprocess, flags);
    cmd_preprocess->add_option("--input", input_csv, "Trajectory CSV")->required();

    auto* cmd_rasterize = app.add_subcommand("rasterize", "Rasterize trajectories into PiTs");
    add_shared_flags(cmd_rasterize, flags);
    cmd_rasterize->add_option("--input", input_csv, "Trajectory CSV")->required();

    auto* cmd_train_diff = app.add_subcommand("train-diffusion", "Train the PiT inference stage");
    add_shared_flags(cmd_train_diff, flags);
    cmd_train_diff->add_option("--input", input_csv, "Trajectory CSV (default: synthesize)");

    auto* cmd_infer = app.add_subcommand("infer-pit", "Infer PiTs for a data split");
    add_shared_flags(cmd_infer, flags);
    cmd_infer->add_option("--denoiser", denoiser_ckpt, "Denoiser checkpoint")->required();
    cmd_infer->add_option("--input", input_csv, "Trajectory CSV (default: synthesize)");
    cmd_infer->add_option("--split", split_name, "Split to infer: val or test");

    auto* cmd_train_est = app.add_subcommand("train-estimator", "Train the travel-time estimation stage");
    add_shared_flags(cmd_train_est, flags);
    cmd_train_est->add_option("--denoiser", denoiser_ckpt, "Denoiser checkpoint")->required();
    cmd_train_est->add_option("--input", input_csv, "Trajectory CSV (default: synthesize)");

    auto* cmd_estimate = app.add_subcommand("estimate", "Answer a single ODT query");
    add_shared_flags(cmd_estimate, flags);
    cmd_estimate->add_option("--denoiser", denoiser_ckpt, "Denoiser checkpoint")->required();
    cmd_estimate->add_option("--estimator", estimator_ckpt, "Estimator checkpoint")->required();
    cmd_estimate->add_option("--from-lng", q_from_lng)->required();
    cmd_estimate->add_option("--from-lat", q_from_lat)->required();
    cmd_estimate->add_option("--to-lng", q_to_lng)->required();
    cmd_estimate->add_option("--to-lat", q_to_lat)->required();
    cmd_estimate->add_option("--depart", q_depart, "Departure Unix seconds")->required();
    cmd_estimate->add_option("--dump-pit", dump_pit_path, "Write the inferred PiT as CSV");

    auto* cmd_baseline = app.add_subcommand("baseline", "Evaluate a non-learned baseline on the test split");
    add_shared_flags(cmd_baseline, flags);
    cmd_baseline->add_option("name", baseline_name, "temp or dijkstra")->required();
    cmd_baseline->add_option("--input", input_csv, "Trajectory CSV (default: synthesize)");

    auto* cmd_evaluate = app.add_subcommand("evaluate", "Evaluate trained checkpoints on the test split");
    add_shared_flags(cmd_evaluate, flags);
    cmd_evaluate->add_option("--denoiser", denoiser_ckpt, "Denoiser checkpoint")->required();
    cmd_evaluate->add_option("--estimator", estimator_ckpt, "Estimator checkpoint")->required();
    cmd_evaluate->add_option("--input", input_csv, "Trajectory CSV (default: synthesize)");

    auto* cmd_bench = app.add_subcommand("bench-attention", "Masked vs dense transformer cost");
    add_shared_flags(cmd_bench, flags);

    auto* cmd_run = app.add_subcommand("run", "Full experiment: train, infer, evaluate, report");
    add_shared_flags(cmd_run, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_generate->parsed()) {
            ExperimentConfig cfg = flags.build();
            SynthConfig synth = cfg.synth;
            if (flags.seed_set) synth.seed = cfg.seed;
            auto trajs = generate_synthetic(synth);
            std::filesystem::create_directories(flags.out_dir);
            const std::string path = flags.out_dir + "/trajectories.csv";
            write_trajectories_csv(path, trajs);
            std::printf("wrote %zu trajectories to %s\n", trajs.size(), path.c_str());
        } else if (cmd_preprocess->parsed()) {
            auto trajs = parse_trajectories(input_csv);
            auto kept = preprocess(trajs);
            std::filesystem::create_directories(flags.out_dir);
            const std::string path = flags.out_dir + "/preprocessed.csv";
            write_trajectories_csv(path, kept);
            std::printf("kept %zu of %zu trajectories, wrote %s\n", kept.size(), trajs.size(), path.c_str());
        } else if (cmd_rasterize->parsed()) {
            ExperimentConfig cfg = flags.build();
            cfg.data_csv = input_csv;
            PreparedData data = prepare_data(cfg);
            std::filesystem::create_directories(flags.out_dir);
            const std::string meta = experiment_meta_json(cfg, data.aoi);
            dump_pits_ckpt(flags.out_dir + "/pits_train.ckpt", data.train_pits, meta);
            dump_pits_ckpt(flags.out_dir + "/pits_val.ckpt", data.val_pits, meta);
            dump_pits_ckpt(flags.out_dir + "/pits_test.ckpt", data.test_pits, meta);
            std::printf("rasterized %zu/%zu/%zu PiTs into %s\n", data.train_pits.size(), data.val_pits.size(),
                        data.test_pits.size(), flags.out_dir.c_str());
        } else if (cmd_train_diff->parsed()) {
            ExperimentConfig cfg = flags.build();
            cfg.data_csv = input_csv;
            PreparedData data = prepare_data(cfg);
            NoiseSchedule sched = linear_schedule(cfg.n_steps);
            Denoiser model(cfg.denoiser, derive_seed(cfg.seed, 2));
            train_diffusion_stage(cfg, data, model, sched);
            std::filesystem::create_directories(flags.out_dir);
            save_checkpoint(model.store(), experiment_meta_json(cfg, data.aoi), flags.out_dir + "/denoiser.ckpt");
            std::printf("wrote %s/denoiser.ckpt\n", flags.out_dir.c_str());
        } else if (cmd_infer->parsed()) {
            ExperimentConfig cfg_ckpt;
            AreaOfInterest aoi;
            Denoiser model = load_denoiser(denoiser_ckpt, cfg_ckpt, aoi);
            ExperimentConfig cfg = flags.config_path.empty() ? cfg_ckpt : flags.build();
            cfg.data_csv = input_csv.empty() ? cfg.data_csv : input_csv;
            if (flags.seed_set) cfg.seed = flags.seed;
            PreparedData data = prepare_data(cfg);
            NoiseSchedule sched = linear_schedule(cfg.n_steps);
            const bool use_val = split_name == "val";
            auto pits = infer_split(cfg, model, sched, use_val ? data.val_odts : data.test_odts, use_val ? 4 : 5);
            std::filesystem::create_directories(flags.out_dir);
            const std::string path = flags.out_dir + "/pits_inferred_" + split_name + ".ckpt";
            dump_pits_ckpt(path, pits, experiment_meta_json(cfg, data.aoi));
            std::printf("wrote %zu inferred PiTs to %s\n", pits.size(), path.c_str());
        } else if (cmd_train_est->parsed()) {
            ExperimentConfig cfg_ckpt;
            AreaOfInterest aoi;
            Denoiser model = load_denoiser(denoiser_ckpt, cfg_ckpt, aoi);
            ExperimentConfig cfg = flags.config_path.empty() ? cfg_ckpt : flags.build();
            cfg.data_csv = input_csv.empty() ? cfg.data_csv : input_csv;
            if (flags.seed_set) cfg.seed = flags.seed;
            PreparedData data = prepare_data(cfg);
            NoiseSchedule sched = linear_schedule(cfg.n_steps);
            auto inferred_val = infer_split(cfg, model, sched, data.val_odts, 4);
            MViTConfig mc;
            mc.l_g = cfg.l_g;
            mc.d_e = cfg.d_e;
            mc.l_e = cfg.l_e;
            mc.heads = cfg.estimator_heads;
            MViT estimator(mc, derive_seed(cfg.seed, 6));
            train_estimator_stage(cfg, data, inferred_val, estimator);
            std::filesystem::create_directories(flags.out_dir);
            save_checkpoint(estimator.store(), experiment_meta_json(cfg, data.aoi),
                            flags.out_dir + "/estimator.ckpt");
            std::printf("wrote %s/estimator.ckpt\n", flags.out_dir.c_str());
        } else if (cmd_estimate->parsed()) {
            ExperimentConfig cfg;
            AreaOfInterest aoi;
            Denoiser denoiser = load_denoiser(denoiser_ckpt, cfg, aoi);
            ExperimentConfig cfg2;
            AreaOfInterest aoi2;
            MViT estimator = load_estimator(estimator_ckpt, cfg2, aoi2);
            NoiseSchedule sched = linear_schedule(cfg.n_steps);
            ODTInput odt = make_odt_input({q_from_lng, q_from_lat}, {q_to_lng, q_to_lat}, q_depart, aoi);
            const std::uint64_t seed = flags.seed_set ? flags.seed : cfg.seed;
            PiT pit = infer_pit<float>(odt, denoiser, sched, cfg.l_g, seed);
            json out;
            FlatPiT flat = flatten_pit(pit);
            out["valid_cells"] = flat.valid_count();
            out["minutes"] = flat.valid_count() > 0 ? estimator.estimate_minutes(flat) : -1.0;
            if (!dump_pit_path.empty()) {
                dump_pit_csv(dump_pit_path, pit);
                out["pit_csv"] = dump_pit_path;
            }
            std::printf("%s\n", out.dump(2).c_str());
        } else if (cmd_baseline->parsed()) {
            if (baseline_name != "temp" && baseline_name != "dijkstra")
                throw std::runtime_error("baseline: expected temp or dijkstra");
            ExperimentConfig cfg = flags.build();
            if (!input_csv.empty()) cfg.data_csv = input_csv;
            PreparedData data = prepare_data(cfg);
            std::vector<double> preds;
            if (baseline_name == "temp") {
                std::vector<HistoryIndex::Record> records;
                for (size_t i = 0; i < data.train_odts.size(); ++i)
                    records.push_back({data.train_odts[i], data.train_minutes[i]});
                HistoryIndex history(std::move(records));
                double train_mean = 0.0;
                for (double m : data.train_minutes) train_mean += m;
                train_mean /= double(data.train_minutes.size());
                for (const auto& q : data.test_odts) {
                    try {
                        preds.push_back(temp_estimate(q, history, cfg.temp));
                    } catch (const std::runtime_error&) {
                        preds.push_back(train_mean);
                    }
                }
            } else {
                CellGraph graph = build_cell_graph(data.train_pits, data.grid);
                for (const auto& q : data.test_odts) preds.push_back(dijkstra_estimate(q, graph));
            }
            json out;
            out[baseline_name] = regression_to_json(regression_metrics(preds, data.test_minutes));
            std::printf("%s\n", out.dump(2).c_str());
        } else if (cmd_evaluate->parsed()) {
            ExperimentConfig cfg;
            AreaOfInterest aoi;
            Denoiser denoiser = load_denoiser(denoiser_ckpt, cfg, aoi);
            ExperimentConfig cfg2;
            AreaOfInterest aoi2;
            MViT estimator = load_estimator(estimator_ckpt, cfg2, aoi2);
            if (!input_csv.empty()) cfg.data_csv = input_csv;
            if (flags.seed_set) cfg.seed = flags.seed;
            PreparedData data = prepare_data(cfg);
            NoiseSchedule sched = linear_schedule(cfg.n_steps);
            auto inferred = infer_split(cfg, denoiser, sched, data.test_odts, 5);
            std::vector<double> preds;
            std::int64_t fallbacks = 0;
            double train_mean = 0.0;
            for (double m : data.train_minutes) train_mean += m;
            train_mean /= double(data.train_minutes.size());
            for (size_t i = 0; i < inferred.size(); ++i) {
                FlatPiT flat = flatten_pit(inferred[i]);
                if (flat.valid_count() == 0) {
                    ++fallbacks;
                    preds.push_back(train_mean);
                } else {
                    preds.push_back(estimator.estimate_minutes(flat));
                }
            }
            json out;
            out["dot"] = regression_to_json(regression_metrics(preds, data.test_minutes));
            RouteReport route = route_metrics(inferred, data.test_pits);
            out["route"] = {{"precision_percent", route.precision},
                            {"recall_percent", route.recall},
                            {"f1_percent", route.f1}};
            PiTReport pr = pit_metrics(inferred, data.test_pits);
            out["pit"] = {{"rmse_overall", pr.rmse_overall}, {"mae_overall", pr.mae_overall}};
            out["fallbacks"] = fallbacks;
            std::printf("%s\n", out.dump(2).c_str());
        } else if (cmd_bench->parsed()) {
            ExperimentConfig cfg = flags.build();
            auto rows = bench_attention({10, 20, 30}, 20, cfg.d_e, cfg.l_e, 100, cfg.seed);
            std::printf("l_g,valid,flops_masked,flops_dense,ratio,us_masked,us_dense\n");
            for (const auto& r : rows)
                std::printf("%d,%d,%lld,%lld,%.3f,%.2f,%.2f\n", r.l_g, r.valid, (long long)r.flops_masked,
                            (long long)r.flops_dense, r.ratio, r.us_masked, r.us_dense);
        } else if (cmd_run->parsed()) {
            ExperimentConfig cfg = flags.build();
            ExperimentResult res = run_experiment(cfg, flags.out_dir);
            std::printf("%s\n", res.report_json.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
