#include "dot/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dot {

Trajectory make_trajectory(std::string id, std::vector<TimedPoint> points) {
    if (points.size() < 2) throw std::invalid_argument("trajectory " + id + ": needs at least 2 points");
    for (size_t i = 1; i < points.size(); ++i)
        if (points[i].t < points[i - 1].t)
            throw std::invalid_argument("trajectory " + id + ": timestamps not non-decreasing");
    if (points.back().t <= points.front().t)
        throw std::invalid_argument("trajectory " + id + ": zero duration");
    for (const auto& p : points)
        if (p.g.lng < -180.0 || p.g.lng > 180.0 || p.g.lat < -90.0 || p.g.lat > 90.0)
            throw std::invalid_argument("trajectory " + id + ": coordinate out of range");
    Trajectory t;
    t.id = std::move(id);
    t.points = std::move(points);
    return t;
}

GridSpec make_grid(AreaOfInterest aoi, int l_g) {
    if (l_g < 2) throw std::invalid_argument("grid: L_G must be >= 2");
    if (!(aoi.lng_min < aoi.lng_max) || !(aoi.lat_min < aoi.lat_max))
        throw std::invalid_argument("grid: degenerate area of interest");
    return GridSpec{aoi, l_g};
}

AreaOfInterest compute_area_of_interest(const std::vector<Trajectory>& trajectories) {
    bool any = false;
    AreaOfInterest box{1e30, -1e30, 1e30, -1e30};
    for (const auto& traj : trajectories) {
        for (const auto& p : traj.points) {
            any = true;
            box.lng_min = std::min(box.lng_min, p.g.lng);
            box.lng_max = std::max(box.lng_max, p.g.lng);
            box.lat_min = std::min(box.lat_min, p.g.lat);
            box.lat_max = std::max(box.lat_max, p.g.lat);
        }
    }
    if (!any) throw std::runtime_error("no trajectories");
    const double dlng = box.lng_max - box.lng_min;
    const double dlat = box.lat_max - box.lat_min;
    if (dlng <= 0.0 || dlat <= 0.0) throw std::runtime_error("degenerate area of interest");
    box.lng_min -= 1e-6 * dlng;
    box.lng_max += 1e-6 * dlng;
    box.lat_min -= 1e-6 * dlat;
    box.lat_max += 1e-6 * dlat;
    return box;
}

CellIdx cell_of(const GeoPoint& g, const GridSpec& grid) {
    const AreaOfInterest& a = grid.aoi;
    if (!a.contains(g)) throw std::runtime_error("out of area");
    const int l = grid.l_g;
    int x = 1 + int(std::floor(double(l) * (g.lng - a.lng_min) / (a.lng_max - a.lng_min)));
    int y = 1 + int(std::floor(double(l) * (g.lat - a.lat_min) / (a.lat_max - a.lat_min)));
    x = std::clamp(x, 1, l);
    y = std::clamp(y, 1, l);
    return CellIdx{x, y};
}

PiT rasterize(const Trajectory& traj, const GridSpec& grid) {
    const std::int64_t t1 = traj.t_first();
    const std::int64_t tn = traj.t_last();
    if (tn == t1) throw std::runtime_error("zero duration");

    // Earliest visit per cell; ties keep the first point in sequence order.
    const int l = grid.l_g;
    std::vector<std::int64_t> earliest(size_t(l) * l, -1);
    for (const auto& p : traj.points) {
        CellIdx c = cell_of(p.g, grid);
        size_t idx = size_t(flatten_index(c, l) - 1);
        if (earliest[idx] < 0 || p.t < earliest[idx]) earliest[idx] = p.t;
    }

    PiT pit(l);
    for (int y = 1; y <= l; ++y) {
        for (int x = 1; x <= l; ++x) {
            std::int64_t t = earliest[size_t(flatten_index(CellIdx{x, y}, l) - 1)];
            if (t < 0) continue;
            pit.at(x, y, 1) = 1.0;
            pit.at(x, y, 2) = tod_norm(t);
            pit.at(x, y, 3) = (2.0 * double(t - t1) - double(tn - t1)) / double(tn - t1);
        }
    }
    return pit;
}

static double axis_norm(double v, double lo, double hi) { return (2.0 * (v - lo) - (hi - lo)) / (hi - lo); }

ODTInput make_odt_input(const GeoPoint& g_o, const GeoPoint& g_d, std::int64_t t_o, const AreaOfInterest& aoi) {
    ODTInput odt;
    odt.g_o = g_o;
    odt.g_d = g_d;
    odt.t_o = t_o;
    odt.encoded[0] = axis_norm(g_o.lng, aoi.lng_min, aoi.lng_max);
    odt.encoded[1] = axis_norm(g_o.lat, aoi.lat_min, aoi.lat_max);
    odt.encoded[2] = axis_norm(g_d.lng, aoi.lng_min, aoi.lng_max);
    odt.encoded[3] = axis_norm(g_d.lat, aoi.lat_min, aoi.lat_max);
    odt.encoded[4] = tod_norm(t_o);
    return odt;
}

ODTInput odt_input_of(const Trajectory& traj, const AreaOfInterest& aoi) {
    return make_odt_input(traj.points.front().g, traj.points.back().g, traj.t_first(), aoi);
}

double travel_time_of(const Trajectory& traj) { return double(traj.t_last() - traj.t_first()) / 60.0; }

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDegToRad = 0.017453292519943295;
    const double lat1 = a.lat * kDegToRad, lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlng = (b.lng - a.lng) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0), s2 = std::sin(dlng / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double path_length_m(const Trajectory& traj) {
    double total = 0.0;
    for (size_t i = 1; i < traj.points.size(); ++i) total += haversine_m(traj.points[i - 1].g, traj.points[i].g);
    return total;
}

}  // namespace dot
