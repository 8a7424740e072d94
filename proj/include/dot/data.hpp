#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dot/geo.hpp"

namespace dot {

struct Dataset {
    std::vector<Trajectory> trajectories;
    AreaOfInterest aoi;
    GridSpec grid;
};

/// Chronological 8:1:1 split of a trajectory set by departure time.
struct SplitDataset {
    std::vector<Trajectory> train, val, test;
};

/// Configuration of the synthetic Manhattan-grid city generator.
struct SynthConfig {
    int road_grid_n = 21;              // intersections per axis
    int n_trajectories = 5000;
    double speed_base = 8.0;           // m/s free-flow speed
    double congestion_amplitude = 0.4; // fractional rush-hour slowdown
    double gps_interval_s = 30.0;
    double gps_noise_m = 20.0;
    double outlier_rate = 0.15;        // probability of a detour via a distant waypoint
    std::uint64_t seed = 1;
};

/// Parses the trajectory CSV (header traj_id,lng,lat,timestamp). Rows for an
/// id need not be contiguous; points are grouped by id and sorted by
/// timestamp. Duplicate timestamps within an id are rejected so the result
/// is independent of row order.
std::vector<Trajectory> parse_trajectories(const std::string& path);

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajs);

/// Keeps exactly the trajectories with path length >= 500 m, duration within
/// [5 min, 60 min], and mean inter-point interval <= 80 s.
std::vector<Trajectory> preprocess(const std::vector<Trajectory>& trajs);

/// Stable sort by departure time, then contiguous 80%/10%/10% slices.
SplitDataset split(const std::vector<Trajectory>& trajs);

/// Deterministic synthetic-city trajectory generator; see SynthConfig.
std::vector<Trajectory> generate_synthetic(const SynthConfig& cfg);

}  // namespace dot
