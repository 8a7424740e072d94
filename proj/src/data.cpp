#include "dot/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "dot/rng.hpp"

namespace dot {

namespace {

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

bool parse_int64(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stoll(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::vector<Trajectory> parse_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) return {};  // empty file
    {
        auto header = split_csv_row(line);
        if (header != std::vector<std::string>{"traj_id", "lng", "lat", "timestamp"})
            throw std::runtime_error(path + " line 1: expected header traj_id,lng,lat,timestamp");
    }

    std::map<std::string, std::vector<TimedPoint>> groups;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = split_csv_row(line);
        TimedPoint p;
        if (f.size() != 4 || f[0].empty() || !parse_double(f[1], p.g.lng) || !parse_double(f[2], p.g.lat) ||
            !parse_int64(f[3], p.t))
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": malformed row");
        groups[f[0]].push_back(p);
    }

    std::vector<Trajectory> out;
    out.reserve(groups.size());
    for (auto& [id, pts] : groups) {
        std::stable_sort(pts.begin(), pts.end(), [](const TimedPoint& a, const TimedPoint& b) { return a.t < b.t; });
        for (size_t i = 1; i < pts.size(); ++i)
            if (pts[i].t == pts[i - 1].t)
                throw std::runtime_error("non-monotone timestamps in trajectory " + id);
        out.push_back(make_trajectory(id, std::move(pts)));
    }
    return out;
}

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajs) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fputs("traj_id,lng,lat,timestamp\n", f);
    for (const auto& t : trajs)
        for (const auto& p : t.points)
            std::fprintf(f, "%s,%.7f,%.7f,%lld\n", t.id.c_str(), p.g.lng, p.g.lat, (long long)p.t);
    std::fclose(f);
}

std::vector<Trajectory> preprocess(const std::vector<Trajectory>& trajs) {
    std::vector<Trajectory> keep;
    for (const auto& t : trajs) {
        const double duration_s = double(t.t_last() - t.t_first());
        if (duration_s < 300.0 || duration_s > 3600.0) continue;
        if (path_length_m(t) < 500.0) continue;
        const double mean_interval = duration_s / double(t.points.size() - 1);
        if (mean_interval > 80.0) continue;
        keep.push_back(t);
    }
    return keep;
}

SplitDataset split(const std::vector<Trajectory>& trajs) {
    const size_t n = trajs.size();
    if (n < 10) throw std::runtime_error("split: need at least 10 trajectories");
    std::vector<Trajectory> sorted = trajs;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Trajectory& a, const Trajectory& b) { return a.t_first() < b.t_first(); });
    const size_t n_train = n * 8 / 10;
    const size_t n_trainval = n * 9 / 10;
    SplitDataset s;
    s.train.assign(sorted.begin(), sorted.begin() + n_train);
    s.val.assign(sorted.begin() + n_train, sorted.begin() + n_trainval);
    s.test.assign(sorted.begin() + n_trainval, sorted.end());
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic city generator
// ---------------------------------------------------------------------------

namespace {

constexpr double kBlockM = 500.0;  // street block edge length
constexpr int kNumDays = 10;
constexpr double kBaseLng = 104.00;
constexpr double kBaseLat = 30.65;
constexpr int kMinTripBlocks = 6;
constexpr int kMaxTripBlocks = 12;
constexpr int kMaxRouteBlocks = 28;  // keeps detour trips under the 1 h filter

// Rush-hour slowdown profile in [0, 1], peaking near 08:30 and 18:00.
double peak_profile(double tod_s) {
    const double h = tod_s / 3600.0;
    auto bump = [](double x, double c) {
        const double z = (x - c) / 1.5;
        return std::exp(-0.5 * z * z);
    };
    return std::min(1.0, bump(h, 8.5) + bump(h, 18.0));
}

struct StreetGrid {
    int n;
    double lng_per_m, lat_per_m;

    int node(int i, int j) const { return i * n + j; }

    GeoPoint pos(double i, double j) const {
        return GeoPoint{kBaseLng + i * kBlockM * lng_per_m, kBaseLat + j * kBlockM * lat_per_m};
    }
};

// Shortest path over 4-neighbor intersections with per-trip jittered edge
// weights; returns the sequence of (i, j) nodes including both endpoints.
std::vector<std::pair<int, int>> route_between(const StreetGrid& g, std::pair<int, int> from, std::pair<int, int> to,
                                               SeededRng& rng) {
    const int n = g.n;
    const int total = n * n;
    std::vector<double> dist(size_t(total), 1e30);
    std::vector<int> prev(size_t(total), -1);

    // One jitter seed per call; jitter is keyed on the undirected edge so
    // both directions agree.
    const std::uint64_t jitter_seed = rng.next_u64();
    auto weight = [&](int a, int b) {
        const std::uint64_t key = std::uint64_t(std::min(a, b)) * 0x10001ull + std::uint64_t(std::max(a, b));
        SeededRng er(derive_seed(jitter_seed, key));
        return kBlockM * (0.8 + 0.4 * er.uniform());
    };

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    const int src = g.node(from.first, from.second);
    const int dst = g.node(to.first, to.second);
    dist[size_t(src)] = 0.0;
    pq.push({0.0, src});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[size_t(u)]) continue;
        if (u == dst) break;
        const int ui = u / n, uj = u % n;
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int vi = ui + di[k], vj = uj + dj[k];
            if (vi < 0 || vi >= n || vj < 0 || vj >= n) continue;
            const int v = g.node(vi, vj);
            const double nd = d + weight(u, v);
            if (nd < dist[size_t(v)]) {
                dist[size_t(v)] = nd;
                prev[size_t(v)] = u;
                pq.push({nd, v});
            }
        }
    }
    std::vector<std::pair<int, int>> path;
    for (int u = dst; u != -1; u = prev[size_t(u)]) path.push_back({u / n, u % n});
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

std::vector<Trajectory> generate_synthetic(const SynthConfig& cfg) {
    if (cfg.road_grid_n < kMaxTripBlocks + 2) throw std::invalid_argument("synth: road_grid_n too small");
    if (cfg.outlier_rate < 0.0 || cfg.outlier_rate > 1.0) throw std::invalid_argument("synth: outlier_rate out of range");
    if (cfg.gps_interval_s <= 0.0 || cfg.gps_interval_s > 80.0)
        throw std::invalid_argument("synth: gps_interval_s must be in (0, 80]");
    if (cfg.n_trajectories <= 0) throw std::invalid_argument("synth: n_trajectories must be positive");

    StreetGrid grid;
    grid.n = cfg.road_grid_n;
    grid.lat_per_m = 1.0 / 111320.0;
    grid.lng_per_m = 1.0 / (111320.0 * std::cos(kBaseLat * 0.017453292519943295));

    std::vector<Trajectory> out;
    out.reserve(size_t(cfg.n_trajectories));

    for (int trip = 0; trip < cfg.n_trajectories; ++trip) {
        SeededRng rng(derive_seed(cfg.seed, std::uint64_t(trip)));

        auto rand_node = [&]() {
            return std::pair<int, int>{int(rng.uniform_int(0, grid.n - 1)), int(rng.uniform_int(0, grid.n - 1))};
        };
        auto manhattan = [](std::pair<int, int> a, std::pair<int, int> b) {
            return std::abs(a.first - b.first) + std::abs(a.second - b.second);
        };

        std::pair<int, int> o, d;
        do {
            o = rand_node();
            d = rand_node();
        } while (manhattan(o, d) < kMinTripBlocks || manhattan(o, d) > kMaxTripBlocks);

        const std::int64_t day = rng.uniform_int(0, kNumDays - 1);
        const std::int64_t depart = day * kSecondsPerDay + rng.uniform_int(0, kSecondsPerDay - 1);

        std::vector<std::pair<int, int>> route;
        if (rng.uniform() < cfg.outlier_rate) {
            // Detour via a distant waypoint, roughly doubling the trip.
            const int direct = manhattan(o, d);
            std::pair<int, int> w;
            int detour;
            do {
                w = rand_node();
                detour = manhattan(o, w) + manhattan(w, d);
            } while (detour < (direct * 16) / 10 || detour > std::min((direct * 24) / 10, kMaxRouteBlocks));
            route = route_between(grid, o, w, rng);
            auto second = route_between(grid, w, d, rng);
            route.insert(route.end(), second.begin() + 1, second.end());
        } else {
            route = route_between(grid, o, d, rng);
        }

        // Walk the route; speed is re-evaluated at each intersection.
        std::vector<std::pair<double, GeoPoint>> track;  // (elapsed seconds, exact position)
        double elapsed = 0.0;
        track.push_back({0.0, grid.pos(route[0].first, route[0].second)});
        std::vector<double> node_time(route.size(), 0.0);
        for (size_t e = 1; e < route.size(); ++e) {
            const double tod = double((depart + std::int64_t(elapsed)) % kSecondsPerDay);
            const double speed = cfg.speed_base * (1.0 - cfg.congestion_amplitude * peak_profile(tod));
            elapsed += kBlockM / speed;
            node_time[e] = elapsed;
        }
        const double duration = elapsed;

        auto position_at = [&](double t_el) {
            size_t e = 1;
            while (e < route.size() && node_time[e] < t_el) ++e;
            if (e >= route.size()) return grid.pos(route.back().first, route.back().second);
            const double t0 = node_time[e - 1], t1 = node_time[e];
            const double f = (t1 > t0) ? (t_el - t0) / (t1 - t0) : 0.0;
            const double i = route[e - 1].first + f * (route[e].first - route[e - 1].first);
            const double j = route[e - 1].second + f * (route[e].second - route[e - 1].second);
            return grid.pos(i, j);
        };

        for (double t_el = cfg.gps_interval_s; t_el < duration; t_el += cfg.gps_interval_s)
            track.push_back({t_el, position_at(t_el)});
        track.push_back({duration, grid.pos(route.back().first, route.back().second)});

        std::vector<TimedPoint> pts;
        pts.reserve(track.size());
        const double noise_deg_lng = cfg.gps_noise_m * grid.lng_per_m;
        const double noise_deg_lat = cfg.gps_noise_m * grid.lat_per_m;
        std::int64_t last_t = -1;
        for (const auto& [t_el, g] : track) {
            TimedPoint p;
            p.t = depart + std::llround(t_el);
            if (p.t <= last_t) continue;  // integer-second collision
            last_t = p.t;
            p.g.lng = g.lng + rng.normal() * noise_deg_lng;
            p.g.lat = g.lat + rng.normal() * noise_deg_lat;
            pts.push_back(p);
        }

        char id[16];
        std::snprintf(id, sizeof(id), "syn%06d", trip);
        out.push_back(make_trajectory(id, std::move(pts)));
    }
    return out;
}

}  // namespace dot
