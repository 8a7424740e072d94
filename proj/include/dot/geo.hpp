#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dot {

struct GeoPoint {
    double lng = 0.0;
    double lat = 0.0;
};

struct TimedPoint {
    GeoPoint g;
    std::int64_t t = 0;  // Unix seconds
};

/// A sequence of timestamped GPS points. Timestamps are non-decreasing and
/// the trip has positive duration.
struct Trajectory {
    std::string id;
    std::vector<TimedPoint> points;

    std::int64_t t_first() const { return points.front().t; }
    std::int64_t t_last() const { return points.back().t; }
};

/// Validates the Trajectory invariants; throws on violation.
Trajectory make_trajectory(std::string id, std::vector<TimedPoint> points);

struct AreaOfInterest {
    double lng_min = 0.0, lng_max = 0.0;
    double lat_min = 0.0, lat_max = 0.0;

    bool contains(const GeoPoint& g) const {
        return g.lng >= lng_min && g.lng <= lng_max && g.lat >= lat_min && g.lat <= lat_max;
    }
};

struct GridSpec {
    AreaOfInterest aoi;
    int l_g = 0;  // cells per axis
};

GridSpec make_grid(AreaOfInterest aoi, int l_g);

/// 1-based cell coordinates: x indexes longitude bins eastward, y latitude
/// bins northward.
struct CellIdx {
    int x = 0;
    int y = 0;
    bool operator==(const CellIdx& o) const { return x == o.x && y == o.y; }
};

/// Pixelated Trajectory: an L_G x L_G x 3 raster with channels
/// 1 = Mask, 2 = Time of day, 3 = Time offset. All entries live in [-1, 1];
/// cells never visited hold -1 in every channel. Stored in flatten order, so
/// the three channels of flattened item p are contiguous.
struct PiT {
    int l_g = 0;
    std::vector<double> v;

    PiT() = default;
    explicit PiT(int grid_len) : l_g(grid_len), v(size_t(grid_len) * grid_len * 3, -1.0) {}

    // 1-based (x, y, channel) access.
    double& at(int x, int y, int c) { return v[size_t((y - 1) * l_g + (x - 1)) * 3 + (c - 1)]; }
    double at(int x, int y, int c) const { return v[size_t((y - 1) * l_g + (x - 1)) * 3 + (c - 1)]; }

    std::int64_t cells() const { return std::int64_t(l_g) * l_g; }
};

/// The (origin, destination, departure time) query together with its
/// normalized 5-vector encoding (lng_o, lat_o, lng_d, lat_d, tod), each
/// entry in [-1, 1].
struct ODTInput {
    GeoPoint g_o, g_d;
    std::int64_t t_o = 0;
    double encoded[5] = {0, 0, 0, 0, 0};
};

/// Tight bounding box over all points of all trajectories, expanded by a
/// relative margin of 1e-6 of each axis extent so max-edge points fall
/// strictly inside.
AreaOfInterest compute_area_of_interest(const std::vector<Trajectory>& trajectories);

/// Maps a point to its grid cell. Throws "out of area" if the point lies
/// outside the grid's area of interest.
CellIdx cell_of(const GeoPoint& g, const GridSpec& grid);

/// Rasterizes a trajectory into a PiT. For each cell the earliest point
/// that falls in it determines the channels; equal timestamps break ties by
/// sequence order (first occurrence wins).
PiT rasterize(const Trajectory& traj, const GridSpec& grid);

/// Builds the ODT-Input of a trajectory: first point, last point, departure
/// time, plus the normalized encoding over the given area of interest.
ODTInput odt_input_of(const Trajectory& traj, const AreaOfInterest& aoi);

ODTInput make_odt_input(const GeoPoint& g_o, const GeoPoint& g_d, std::int64_t t_o, const AreaOfInterest& aoi);

/// 1-based flattened position of a cell: x + (y - 1) * L_G.
inline int flatten_index(const CellIdx& cell, int l_g) { return cell.x + (cell.y - 1) * l_g; }

/// Inverse of flatten_index.
inline CellIdx unflatten_index(int pos, int l_g) {
    return CellIdx{(pos - 1) % l_g + 1, (pos - 1) / l_g + 1};
}

/// Trip duration in minutes.
double travel_time_of(const Trajectory& traj);

/// Great-circle distance in meters.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Sum of consecutive haversine distances along the trajectory, in meters.
double path_length_m(const Trajectory& traj);

constexpr std::int64_t kSecondsPerDay = 86400;

/// Time of day normalized to [-1, 1].
inline double tod_norm(std::int64_t t) {
    std::int64_t s = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
    return (2.0 * double(s) - double(kSecondsPerDay)) / double(kSecondsPerDay);
}

}  // namespace dot
