#include "dot/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dot/checkpoint.hpp"
#include "dot/diffusion.hpp"
#include "json.hpp"

namespace dot {

using nlohmann::json;

namespace {

// Seed stream tags.
constexpr std::uint64_t kTagGenerate = 1;
constexpr std::uint64_t kTagDenoiserInit = 2;
constexpr std::uint64_t kTagTrainDiffusion = 3;
constexpr std::uint64_t kTagInferVal = 4;
constexpr std::uint64_t kTagInferTest = 5;
constexpr std::uint64_t kTagEstimatorInit = 6;
constexpr std::uint64_t kTagTrainEstimator = 7;
constexpr std::uint64_t kTagInferTrain = 8;
constexpr std::uint64_t kTagBench = 9;

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void shuffle_indices(std::vector<int>& idx, SeededRng& rng) {
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
}

json regression_json(const RegressionReport& r) {
    return json{{"rmse_minutes", r.rmse}, {"mae_minutes", r.mae}, {"mape_percent", r.mape}, {"n", r.n}};
}

json pit_json(const PiTReport& r) {
    return json{{"rmse_overall", r.rmse_overall},
                {"mae_overall", r.mae_overall},
                {"rmse_mask", r.rmse_channel[0]},
                {"rmse_tod", r.rmse_channel[1]},
                {"rmse_offset", r.rmse_channel[2]},
                {"mae_mask", r.mae_channel[0]},
                {"mae_tod", r.mae_channel[1]},
                {"mae_offset", r.mae_channel[2]}};
}

json route_json(const RouteReport& r) {
    return json{{"precision_percent", r.precision},
                {"recall_percent", r.recall},
                {"f1_percent", r.f1},
                {"true_pos", r.true_pos},
                {"false_pos", r.false_pos},
                {"false_neg", r.false_neg},
                {"skipped", r.skipped}};
}

}  // namespace

void ExperimentConfig::validate() const {
    if (l_g < 2) throw std::invalid_argument("config: L_G must be >= 2");
    if (n_steps < 2) throw std::invalid_argument("config: N must be >= 2");
    if (batch_size < 1 || infer_batch < 1) throw std::invalid_argument("config: batch sizes must be positive");
    if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
    if (d_e < 2 || d_e % 2 != 0) throw std::invalid_argument("config: d_E must be even and positive");
    if (l_e < 1) throw std::invalid_argument("config: L_E must be >= 1");
    denoiser.validate();
}

std::string ExperimentConfig::to_json() const {
    json j{{"seed", seed},
           {"l_g", l_g},
           {"n_steps", n_steps},
           {"diffusion_epochs", diffusion_epochs},
           {"estimator_epochs", estimator_epochs},
           {"batch_size", batch_size},
           {"infer_batch", infer_batch},
           {"lr", lr},
           {"patience", patience},
           {"train_estimator_on_inferred", train_estimator_on_inferred},
           {"data_csv", data_csv},
           {"denoiser",
            {{"l_d", denoiser.l_d},
             {"d", denoiser.d},
             {"base_channels", denoiser.base_channels},
             {"heads", denoiser.heads}}},
           {"estimator", {{"d_e", d_e}, {"l_e", l_e}, {"heads", estimator_heads}}},
           {"synth",
            {{"road_grid_n", synth.road_grid_n},
             {"n_trajectories", synth.n_trajectories},
             {"speed_base", synth.speed_base},
             {"congestion_amplitude", synth.congestion_amplitude},
             {"gps_interval_s", synth.gps_interval_s},
             {"gps_noise_m", synth.gps_noise_m},
             {"outlier_rate", synth.outlier_rate},
             {"seed", synth.seed}}},
           {"temp",
            {{"radius_m", temp.radius_m},
             {"window_min", temp.window_min},
             {"k_min", temp.k_min},
             {"max_expansions", temp.max_expansions}}}};
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.l_g = j.value("l_g", c.l_g);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.diffusion_epochs = j.value("diffusion_epochs", c.diffusion_epochs);
    c.estimator_epochs = j.value("estimator_epochs", c.estimator_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.infer_batch = j.value("infer_batch", c.infer_batch);
    c.lr = j.value("lr", c.lr);
    c.patience = j.value("patience", c.patience);
    c.train_estimator_on_inferred = j.value("train_estimator_on_inferred", c.train_estimator_on_inferred);
    c.data_csv = j.value("data_csv", c.data_csv);
    if (j.contains("denoiser")) {
        const json& d = j["denoiser"];
        c.denoiser.l_d = d.value("l_d", c.denoiser.l_d);
        c.denoiser.d = d.value("d", c.denoiser.d);
        c.denoiser.base_channels = d.value("base_channels", c.denoiser.base_channels);
        c.denoiser.heads = d.value("heads", c.denoiser.heads);
    }
    if (j.contains("estimator")) {
        const json& e = j["estimator"];
        c.d_e = e.value("d_e", c.d_e);
        c.l_e = e.value("l_e", c.l_e);
        c.estimator_heads = e.value("heads", c.estimator_heads);
    }
    if (j.contains("synth")) {
        const json& s = j["synth"];
        c.synth.road_grid_n = s.value("road_grid_n", c.synth.road_grid_n);
        c.synth.n_trajectories = s.value("n_trajectories", c.synth.n_trajectories);
        c.synth.speed_base = s.value("speed_base", c.synth.speed_base);
        c.synth.congestion_amplitude = s.value("congestion_amplitude", c.synth.congestion_amplitude);
        c.synth.gps_interval_s = s.value("gps_interval_s", c.synth.gps_interval_s);
        c.synth.gps_noise_m = s.value("gps_noise_m", c.synth.gps_noise_m);
        c.synth.outlier_rate = s.value("outlier_rate", c.synth.outlier_rate);
        c.synth.seed = s.value("seed", c.synth.seed);
    }
    if (j.contains("temp")) {
        const json& t = j["temp"];
        c.temp.radius_m = t.value("radius_m", c.temp.radius_m);
        c.temp.window_min = t.value("window_min", c.temp.window_min);
        c.temp.k_min = t.value("k_min", c.temp.k_min);
        c.temp.max_expansions = t.value("max_expansions", c.temp.max_expansions);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string experiment_meta_json(const ExperimentConfig& cfg, const AreaOfInterest& aoi) {
    json j;
    j["config"] = json::parse(cfg.to_json());
    j["aoi"] = {{"lng_min", aoi.lng_min}, {"lng_max", aoi.lng_max}, {"lat_min", aoi.lat_min}, {"lat_max", aoi.lat_max}};
    return j.dump(2);
}

AreaOfInterest aoi_from_meta_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.contains("aoi")) throw std::runtime_error("checkpoint meta: missing aoi");
    const json& a = j["aoi"];
    return AreaOfInterest{a.at("lng_min"), a.at("lng_max"), a.at("lat_min"), a.at("lat_max")};
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<Trajectory> raw;
    if (cfg.data_csv.empty()) {
        SynthConfig synth = cfg.synth;
        synth.seed = derive_seed(cfg.seed, kTagGenerate);
        raw = generate_synthetic(synth);
    } else {
        raw = parse_trajectories(cfg.data_csv);
    }
    std::vector<Trajectory> kept = preprocess(raw);
    std::fprintf(stderr, "[data] %zu trajectories, %zu after preprocessing\n", raw.size(), kept.size());

    PreparedData data;
    data.aoi = compute_area_of_interest(kept);
    data.grid = make_grid(data.aoi, cfg.l_g);
    data.splits = split(kept);

    auto fill = [&](const std::vector<Trajectory>& trajs, std::vector<PiT>& pits, std::vector<ODTInput>& odts,
                    std::vector<double>& minutes) {
        pits.reserve(trajs.size());
        odts.reserve(trajs.size());
        minutes.reserve(trajs.size());
        for (const auto& t : trajs) {
            pits.push_back(rasterize(t, data.grid));
            odts.push_back(odt_input_of(t, data.aoi));
            minutes.push_back(travel_time_of(t));
        }
    };
    fill(data.splits.train, data.train_pits, data.train_odts, data.train_minutes);
    fill(data.splits.val, data.val_pits, data.val_odts, data.val_minutes);
    fill(data.splits.test, data.test_pits, data.test_odts, data.test_minutes);
    return data;
}

DiffusionTraining train_diffusion_stage(const ExperimentConfig& cfg, const PreparedData& data, Denoiser& model,
                                        const NoiseSchedule& sched) {
    const int n = int(data.train_pits.size());
    if (n < 1) throw std::runtime_error("train-diffusion: empty training split");
    const int l = cfg.l_g;
    SeededRng rng(derive_seed(cfg.seed, kTagTrainDiffusion));
    AdamState adam;
    DiffusionTraining log;

    std::vector<int> order(size_t(n), 0);
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;

    std::vector<Tensor> cached;  // PiTs as tensors, converted once
    cached.reserve(size_t(n));
    for (const auto& pit : data.train_pits) cached.push_back(pit_to_tensor<float>(pit));

    for (int epoch = 0; epoch < cfg.diffusion_epochs; ++epoch) {
        shuffle_indices(order, rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (int begin = 0; begin < n; begin += cfg.batch_size) {
            const int B = std::min(cfg.batch_size, n - begin);
            DiffusionBatchT<float> batch;
            batch.x0 = Tensor({B, l, l, 3});
            batch.eps = Tensor({B, l, l, 3});
            batch.odt = Tensor({B, 5});
            const std::int64_t per = std::int64_t(l) * l * 3;
            for (int b = 0; b < B; ++b) {
                const int i = order[size_t(begin + b)];
                const Tensor& x0 = cached[size_t(i)];
                for (std::int64_t k = 0; k < per; ++k) batch.x0[b * per + k] = x0[k];
                for (std::int64_t k = 0; k < per; ++k) batch.eps[b * per + k] = float(rng.normal());
                for (int k = 0; k < 5; ++k)
                    batch.odt[std::int64_t(b) * 5 + k] = float(data.train_odts[size_t(i)].encoded[k]);
                batch.n.push_back(int(rng.uniform_int(1, sched.n_steps)));
            }
            loss_sum += train_denoiser_step(model, batch, sched, adam, cfg.lr);
            ++batches;
        }
        log.epoch_losses.push_back(loss_sum / std::max(1, batches));
        std::fprintf(stderr, "[diffusion] epoch %d/%d loss %.5f\n", epoch + 1, cfg.diffusion_epochs,
                     log.epoch_losses.back());
    }
    return log;
}

std::vector<PiT> infer_split(const ExperimentConfig& cfg, Denoiser& model, const NoiseSchedule& sched,
                             const std::vector<ODTInput>& odts, std::uint64_t split_tag) {
    std::vector<std::uint64_t> seeds(odts.size());
    for (size_t i = 0; i < odts.size(); ++i) seeds[i] = derive_seed(cfg.seed, split_tag, std::uint64_t(i));
    std::vector<PiT> out(odts.size());
    const size_t chunk = size_t(std::max(1, cfg.infer_batch));
    for (size_t begin = 0; begin < odts.size(); begin += chunk) {
        const size_t end = std::min(odts.size(), begin + chunk);
        std::vector<ODTInput> part(odts.begin() + std::ptrdiff_t(begin), odts.begin() + std::ptrdiff_t(end));
        std::vector<std::uint64_t> part_seeds(seeds.begin() + std::ptrdiff_t(begin),
                                              seeds.begin() + std::ptrdiff_t(end));
        auto pits = infer_pit_batch<float>(part, model, sched, cfg.l_g, part_seeds, cfg.infer_batch);
        for (size_t i = 0; i < pits.size(); ++i) out[begin + i] = std::move(pits[i]);
        std::fprintf(stderr, "[infer] %zu/%zu queries\n", end, odts.size());
    }
    return out;
}

EstimatorTraining train_estimator_stage(const ExperimentConfig& cfg, const PreparedData& data,
                                        const std::vector<PiT>& inferred_val, MViT& model) {
    const auto& pits = data.train_pits;
    const auto& minutes = data.train_minutes;
    if (pits.empty()) throw std::runtime_error("train-estimator: empty training split");

    double mu = 0.0;
    for (double m : minutes) mu += m;
    mu /= double(minutes.size());
    double var = 0.0;
    for (double m : minutes) var += (m - mu) * (m - mu);
    var /= double(minutes.size());
    model.set_target_norm(mu, std::max(1e-6, std::sqrt(var)));

    SeededRng rng(derive_seed(cfg.seed, kTagTrainEstimator));
    AdamState adam;
    EstimatorTraining log;
    std::vector<int> order(pits.size());
    for (size_t i = 0; i < pits.size(); ++i) order[i] = int(i);

    auto val_mae = [&]() {
        double ae = 0.0;
        int n = 0;
        for (size_t i = 0; i < inferred_val.size(); ++i) {
            FlatPiT flat = flatten_pit(inferred_val[i]);
            if (flat.valid_count() == 0) continue;
            ae += std::abs(model.estimate_minutes(flat) - data.val_minutes[i]);
            ++n;
        }
        return n > 0 ? ae / n : std::numeric_limits<double>::infinity();
    };

    std::map<std::string, Tensor> best_params;
    log.best_val_mae = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.estimator_epochs; ++epoch) {
        shuffle_indices(order, rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (size_t begin = 0; begin < order.size(); begin += size_t(cfg.batch_size)) {
            const size_t end = std::min(order.size(), begin + size_t(cfg.batch_size));
            std::vector<const PiT*> bp;
            std::vector<double> bm;
            for (size_t k = begin; k < end; ++k) {
                bp.push_back(&pits[size_t(order[k])]);
                bm.push_back(minutes[size_t(order[k])]);
            }
            loss_sum += train_estimator_step(model, bp, bm, adam, cfg.lr);
            ++batches;
        }
        log.train_losses.push_back(loss_sum / std::max(1, batches));
        const double mae = val_mae();
        log.val_maes.push_back(mae);
        std::fprintf(stderr, "[estimator] epoch %d/%d loss %.5f val-mae %.4f\n", epoch + 1, cfg.estimator_epochs,
                     log.train_losses.back(), mae);
        if (mae < log.best_val_mae) {
            log.best_val_mae = mae;
            log.best_epoch = epoch;
            best_params = model.store().params;
        } else if (epoch - log.best_epoch >= cfg.patience) {
            std::fprintf(stderr, "[estimator] early stop at epoch %d (best %d)\n", epoch + 1, log.best_epoch + 1);
            break;
        }
    }
    if (!best_params.empty()) model.store().params = best_params;
    return log;
}

std::vector<AttentionBenchRow> bench_attention(const std::vector<int>& grid_sizes, int valid_cells, int d_e, int l_e,
                                               int reps, std::uint64_t seed) {
    std::vector<AttentionBenchRow> rows;
    for (int l_g : grid_sizes) {
        MViTConfig mc;
        mc.l_g = l_g;
        mc.d_e = d_e;
        mc.l_e = l_e;
        MViT model(mc, derive_seed(seed, kTagBench));
        model.set_target_norm(10.0, 5.0);

        // Fixed number of valid cells spread over the grid.
        PiT pit(l_g);
        SeededRng rng(derive_seed(seed, kTagBench, std::uint64_t(l_g)));
        const std::int64_t cells = pit.cells();
        for (int i = 0; i < valid_cells; ++i) {
            const std::int64_t p = (std::int64_t(i) * cells) / valid_cells;
            pit.v[size_t(p) * 3] = rng.uniform(0.0, 1.0);
            pit.v[size_t(p) * 3 + 1] = rng.uniform(-1.0, 1.0);
            pit.v[size_t(p) * 3 + 2] = rng.uniform(-1.0, 1.0);
        }
        FlatPiT flat = flatten_pit(pit);

        AttentionBenchRow row;
        row.l_g = l_g;
        row.valid = flat.valid_count();

        FlopCounter::reset();
        FlopCounter::enabled() = true;
        model.estimate_minutes(flat);
        FlopCounter::enabled() = false;
        row.flops_masked = FlopCounter::flops();

        FlopCounter::reset();
        FlopCounter::enabled() = true;
        model.estimate_minutes_dense(flat);
        FlopCounter::enabled() = false;
        row.flops_dense = FlopCounter::flops();
        row.ratio = double(row.flops_dense) / double(std::max<std::int64_t>(1, row.flops_masked));

        double t0 = now_seconds();
        for (int r = 0; r < reps; ++r) model.estimate_minutes(flat);
        row.us_masked = (now_seconds() - t0) * 1e6 / reps;
        t0 = now_seconds();
        for (int r = 0; r < reps; ++r) model.estimate_minutes_dense(flat);
        row.us_dense = (now_seconds() - t0) * 1e6 / reps;
        rows.push_back(row);
    }
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::vector<std::pair<std::string, double>> timings;
    auto timed = [&](const std::string& name, auto&& fn) {
        const double t0 = now_seconds();
        fn();
        timings.push_back({name, now_seconds() - t0});
        std::fprintf(stderr, "[timing] %s: %.1f s\n", name.c_str(), timings.back().second);
    };

    PreparedData data;
    timed("prepare_data", [&] { data = prepare_data(cfg); });

    NoiseSchedule sched = linear_schedule(cfg.n_steps);
    Denoiser denoiser(cfg.denoiser, derive_seed(cfg.seed, kTagDenoiserInit));
    DiffusionTraining diff_log;
    timed("train_diffusion", [&] { diff_log = train_diffusion_stage(cfg, data, denoiser, sched); });

    std::vector<PiT> inferred_val, inferred_test;
    timed("infer_val", [&] { inferred_val = infer_split(cfg, denoiser, sched, data.val_odts, kTagInferVal); });
    timed("infer_test", [&] { inferred_test = infer_split(cfg, denoiser, sched, data.test_odts, kTagInferTest); });

    MViTConfig mc;
    mc.l_g = cfg.l_g;
    mc.d_e = cfg.d_e;
    mc.l_e = cfg.l_e;
    mc.heads = cfg.estimator_heads;
    MViT estimator(mc, derive_seed(cfg.seed, kTagEstimatorInit));
    EstimatorTraining est_log;
    PreparedData* train_view = &data;
    PreparedData swapped;
    if (cfg.train_estimator_on_inferred) {
        std::vector<PiT> inferred_train;
        timed("infer_train",
              [&] { inferred_train = infer_split(cfg, denoiser, sched, data.train_odts, kTagInferTrain); });
        swapped = data;
        swapped.train_pits = std::move(inferred_train);
        train_view = &swapped;
    }
    timed("train_estimator", [&] { est_log = train_estimator_stage(cfg, *train_view, inferred_val, estimator); });

    ExperimentResult res;

    // Baselines share the training history.
    std::vector<HistoryIndex::Record> records;
    records.reserve(data.train_odts.size());
    for (size_t i = 0; i < data.train_odts.size(); ++i)
        records.push_back({data.train_odts[i], data.train_minutes[i]});
    HistoryIndex history(std::move(records));
    double train_mean = 0.0;
    for (double m : data.train_minutes) train_mean += m;
    train_mean /= double(std::max<size_t>(1, data.train_minutes.size()));

    auto temp_or_mean = [&](const ODTInput& q, std::int64_t& fallbacks) {
        try {
            return temp_estimate(q, history, cfg.temp);
        } catch (const std::runtime_error&) {
            ++fallbacks;
            return train_mean;
        }
    };

    std::vector<double> dot_pred, temp_pred, dijkstra_pred;
    timed("evaluate", [&] {
        CellGraph graph = build_cell_graph(data.train_pits, data.grid);
        for (size_t i = 0; i < data.test_odts.size(); ++i) {
            const ODTInput& q = data.test_odts[i];
            temp_pred.push_back(temp_or_mean(q, res.temp_fallbacks));
            dijkstra_pred.push_back(dijkstra_estimate(q, graph));
            FlatPiT flat = flatten_pit(inferred_test[i]);
            if (flat.valid_count() == 0) {
                ++res.dot_fallbacks;
                std::int64_t scratch = 0;
                dot_pred.push_back(temp_or_mean(q, scratch));
            } else {
                dot_pred.push_back(estimator.estimate_minutes(flat));
            }
        }
        res.dot = regression_metrics(dot_pred, data.test_minutes);
        res.temp = regression_metrics(temp_pred, data.test_minutes);
        res.dijkstra = regression_metrics(dijkstra_pred, data.test_minutes);
        res.pit_all = pit_metrics(inferred_test, data.test_pits);
        res.pit_valid = pit_metrics_valid_cells(inferred_test, data.test_pits);
        res.route = route_metrics(inferred_test, data.test_pits);
    });

    std::vector<AttentionBenchRow> bench;
    timed("bench_attention", [&] { bench = bench_attention({10, 20, 30}, 20, cfg.d_e, cfg.l_e, 100, cfg.seed); });

    // Deterministic report document; wall-clock data goes to timings.json.
    json report;
    report["config"] = json::parse(cfg.to_json());
    report["dataset"] = {{"train", data.splits.train.size()},
                         {"val", data.splits.val.size()},
                         {"test", data.splits.test.size()},
                         {"aoi",
                          {{"lng_min", data.aoi.lng_min},
                           {"lng_max", data.aoi.lng_max},
                           {"lat_min", data.aoi.lat_min},
                           {"lat_max", data.aoi.lat_max}}}};
    report["diffusion"] = {{"epoch_losses", diff_log.epoch_losses}};
    report["estimator"] = {{"train_losses", est_log.train_losses},
                           {"val_maes", est_log.val_maes},
                           {"best_epoch", est_log.best_epoch},
                           {"best_val_mae", est_log.best_val_mae},
                           {"target_mu", estimator.target_mu()},
                           {"target_sigma", estimator.target_sigma()}};
    report["metrics"] = {{"dot", regression_json(res.dot)},
                         {"temp", regression_json(res.temp)},
                         {"dijkstra", regression_json(res.dijkstra)},
                         {"pit_all_cells", pit_json(res.pit_all)},
                         {"pit_valid_cells", pit_json(res.pit_valid)},
                         {"route", route_json(res.route)}};
    report["fallbacks"] = {{"dot_empty_pit", res.dot_fallbacks}, {"temp_no_history", res.temp_fallbacks}};
    res.report_json = report.dump(2);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        auto write_text = [&](const std::string& name, const std::string& text) {
            std::ofstream out(out_dir + "/" + name, std::ios::binary);
            out << text;
        };
        write_text("report.json", res.report_json);

        json tj;
        for (const auto& [name, sec] : timings) tj[name] = sec;
        write_text("timings.json", tj.dump(2));

        std::string bench_csv = "l_g,valid,flops_masked,flops_dense,ratio,us_masked,us_dense\n";
        for (const auto& r : bench) {
            char line[256];
            std::snprintf(line, sizeof line, "%d,%d,%lld,%lld,%.3f,%.2f,%.2f\n", r.l_g, r.valid,
                          (long long)r.flops_masked, (long long)r.flops_dense, r.ratio, r.us_masked, r.us_dense);
            bench_csv += line;
        }
        write_text("bench.csv", bench_csv);

        std::string metrics_csv = "method,rmse_minutes,mae_minutes,mape_percent,n\n";
        const std::pair<const char*, const RegressionReport*> method_rows[] = {
            {"dot", &res.dot}, {"temp", &res.temp}, {"dijkstra", &res.dijkstra}};
        for (const auto& [name, r] : method_rows) {
            char line[160];
            std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%lld\n", name, r->rmse, r->mae, r->mape,
                          (long long)r->n);
            metrics_csv += line;
        }
        write_text("metrics.csv", metrics_csv);

        const std::string meta = experiment_meta_json(cfg, data.aoi);
        save_checkpoint(denoiser.store(), meta, out_dir + "/denoiser.ckpt");
        save_checkpoint(estimator.store(), meta, out_dir + "/estimator.ckpt");
    }
    return res;
}

}  // namespace dot
