#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dot/baselines.hpp"
#include "dot/data.hpp"
#include "dot/denoiser.hpp"
#include "dot/estimator.hpp"
#include "dot/metrics.hpp"
#include "dot/schedule.hpp"

namespace dot {

/// Full experiment configuration. Defaults follow the optimal
/// hyper-parameters: L_G 20, N 1000, L_D 3, d_E 128, L_E 2, 50 epochs,
/// Adam at lr 0.001.
struct ExperimentConfig {
    int l_g = 20;
    int n_steps = 1000;
    int diffusion_epochs = 50;
    int estimator_epochs = 50;
    int batch_size = 32;
    double lr = 0.001;
    DenoiserConfig denoiser;  // L_D 3, d 128, base 32, heads 4
    int d_e = 128;
    int l_e = 2;
    int estimator_heads = 4;
    int patience = 5;
    bool train_estimator_on_inferred = false;
    int infer_batch = 64;
    std::uint64_t seed = 42;
    std::string data_csv;  // empty = synthesize
    SynthConfig synth;
    TempConfig temp;

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
};

struct PreparedData {
    AreaOfInterest aoi;
    GridSpec grid;
    SplitDataset splits;
    std::vector<PiT> train_pits, val_pits, test_pits;
    std::vector<ODTInput> train_odts, val_odts, test_odts;
    std::vector<double> train_minutes, val_minutes, test_minutes;
};

/// Generate or load, preprocess, split chronologically, rasterize.
PreparedData prepare_data(const ExperimentConfig& cfg);

struct DiffusionTraining {
    std::vector<double> epoch_losses;
};

/// Stage one: train the conditioned denoiser on the training PiTs.
DiffusionTraining train_diffusion_stage(const ExperimentConfig& cfg, const PreparedData& data, Denoiser& model,
                                        const NoiseSchedule& sched);

/// Reverse-process inference for a whole split; per-query seeds are derived
/// from the run seed and query index, so results do not depend on batching.
std::vector<PiT> infer_split(const ExperimentConfig& cfg, Denoiser& model, const NoiseSchedule& sched,
                             const std::vector<ODTInput>& odts, std::uint64_t split_tag);

struct EstimatorTraining {
    std::vector<double> train_losses;
    std::vector<double> val_maes;
    int best_epoch = -1;
    double best_val_mae = 0.0;
};

/// Stage two: train the MViT estimator with early stopping (patience on the
/// validation MAE over inferred validation PiTs). Restores the best weights.
EstimatorTraining train_estimator_stage(const ExperimentConfig& cfg, const PreparedData& data,
                                        const std::vector<PiT>& inferred_val, MViT& model);

struct AttentionBenchRow {
    int l_g = 0;
    int valid = 0;
    std::int64_t flops_masked = 0;
    std::int64_t flops_dense = 0;
    double ratio = 0.0;
    double us_masked = 0.0;
    double us_dense = 0.0;
};

/// Masked vs dense transformer cost at fixed valid-cell count, by exact
/// FLOP counting and wall time averaged over reps.
std::vector<AttentionBenchRow> bench_attention(const std::vector<int>& grid_sizes, int valid_cells, int d_e, int l_e,
                                               int reps, std::uint64_t seed);

struct ExperimentResult {
    RegressionReport dot, temp, dijkstra;
    PiTReport pit_all, pit_valid;
    RouteReport route;
    std::int64_t dot_fallbacks = 0;   // empty inferred PiTs answered by TEMP
    std::int64_t temp_fallbacks = 0;  // queries with no history, answered by the train mean
    std::string report_json;          // deterministic report document
};

/// The full two-stage pipeline plus baselines and reports. Writes
/// report.json (deterministic), timings.json and bench.csv (wall clock),
/// metrics.csv, and both checkpoints under out_dir; out_dir empty = no
/// files.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

/// Meta JSON stored as the checkpoint config echo: the run config plus the
/// dataset area of interest and target normalization, so a query-only
/// invocation can rebuild geometry without the dataset.
std::string experiment_meta_json(const ExperimentConfig& cfg, const AreaOfInterest& aoi);
AreaOfInterest aoi_from_meta_json(const std::string& text);

}  // namespace dot
