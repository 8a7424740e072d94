#include "dot/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace dot {

namespace {

double circular_tod_diff_s(std::int64_t a, std::int64_t b) {
    const std::int64_t day = kSecondsPerDay;
    std::int64_t d = ((a - b) % day + day) % day;
    return double(std::min(d, day - d));
}

}  // namespace

HistoryIndex::HistoryIndex(std::vector<Record> records) : records_(std::move(records)) {
    if (records_.empty()) return;
    double lng_max = -1e30, lat_max = -1e30;
    lng_min_ = 1e30;
    lat_min_ = 1e30;
    for (const auto& r : records_) {
        lng_min_ = std::min(lng_min_, r.odt.g_o.lng);
        lng_max = std::max(lng_max, r.odt.g_o.lng);
        lat_min_ = std::min(lat_min_, r.odt.g_o.lat);
        lat_max = std::max(lat_max, r.odt.g_o.lat);
    }
    // Bucket edge of roughly 1 km at the dataset latitude.
    const double mid_lat = (lat_min_ + lat_max) / 2.0;
    bucket_deg_ = 1000.0 / (111320.0 * std::max(0.2, std::cos(mid_lat * 0.017453292519943295)));
    nx_ = std::max(1, int((lng_max - lng_min_) / bucket_deg_) + 1);
    ny_ = std::max(1, int((lat_max - lat_min_) / bucket_deg_) + 1);
    buckets_.assign(size_t(nx_) * ny_, {});
    for (std::int64_t i = 0; i < std::int64_t(records_.size()); ++i)
        buckets_[size_t(bucket_of(records_[size_t(i)].odt.g_o.lng, records_[size_t(i)].odt.g_o.lat))].push_back(i);
}

int HistoryIndex::bucket_of(double lng, double lat) const {
    int bx = std::clamp(int((lng - lng_min_) / bucket_deg_), 0, nx_ - 1);
    int by = std::clamp(int((lat - lat_min_) / bucket_deg_), 0, ny_ - 1);
    return by * nx_ + bx;
}

std::vector<std::int64_t> HistoryIndex::origin_candidates(const GeoPoint& g_o, double radius_m) const {
    std::vector<std::int64_t> out;
    if (records_.empty()) return out;
    const double mid_lat = g_o.lat * 0.017453292519943295;
    const double deg_lng = radius_m / (111320.0 * std::max(0.2, std::cos(mid_lat)));
    const double deg_lat = radius_m / 111320.0;
    const int bx0 = std::clamp(int((g_o.lng - deg_lng - lng_min_) / bucket_deg_), 0, nx_ - 1);
    const int bx1 = std::clamp(int((g_o.lng + deg_lng - lng_min_) / bucket_deg_), 0, nx_ - 1);
    const int by0 = std::clamp(int((g_o.lat - deg_lat - lat_min_) / bucket_deg_), 0, ny_ - 1);
    const int by1 = std::clamp(int((g_o.lat + deg_lat - lat_min_) / bucket_deg_), 0, ny_ - 1);
    for (int by = by0; by <= by1; ++by)
        for (int bx = bx0; bx <= bx1; ++bx)
            for (std::int64_t i : buckets_[size_t(by) * nx_ + size_t(bx)])
                if (haversine_m(records_[size_t(i)].odt.g_o, g_o) <= radius_m) out.push_back(i);
    std::sort(out.begin(), out.end());
    return out;
}

double temp_estimate(const ODTInput& odt, const HistoryIndex& hist, const TempConfig& cfg) {
    if (hist.records().empty()) throw std::runtime_error("no history");
    double r = cfg.radius_m;
    double w_s = cfg.window_min * 60.0;
    for (int attempt = 0; attempt <= cfg.max_expansions; ++attempt) {
        double sum = 0.0;
        int count = 0;
        for (std::int64_t i : hist.origin_candidates(odt.g_o, r)) {
            const auto& rec = hist.records()[size_t(i)];
            if (haversine_m(rec.odt.g_d, odt.g_d) > r) continue;
            if (circular_tod_diff_s(rec.odt.t_o, odt.t_o) > w_s) continue;
            sum += rec.minutes;
            ++count;
        }
        if (count >= cfg.k_min || attempt == cfg.max_expansions) {
            if (count == 0) break;
            return sum / double(count);
        }
        r *= 2.0;
        w_s *= 2.0;
    }
    throw std::runtime_error("no history");
}

constexpr int CellGraph::kDx[8];
constexpr int CellGraph::kDy[8];

CellGraph build_cell_graph(const std::vector<PiT>& train_pits, const GridSpec& grid) {
    if (train_pits.empty()) throw std::invalid_argument("cell graph: need at least one PiT");
    const int l = grid.l_g;
    CellGraph g;
    g.grid = grid;
    g.w.assign(size_t(l) * l, std::array<double, 8>{});
    std::vector<std::array<double, 8>> sum(size_t(l) * l, std::array<double, 8>{});
    std::vector<std::array<int, 8>> cnt(size_t(l) * l, std::array<int, 8>{});

    for (const auto& pit : train_pits) {
        if (pit.l_g != l) throw std::invalid_argument("cell graph: PiT grid mismatch");
        // Valid cells in visiting order (offset ascending, position-stable).
        std::vector<std::pair<double, int>> order;
        for (int p = 1; p <= int(pit.cells()); ++p) {
            CellIdx c = unflatten_index(p, l);
            if (pit.at(c.x, c.y, 1) >= 0.0) order.push_back({pit.at(c.x, c.y, 3), p});
        }
        std::stable_sort(order.begin(), order.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (size_t i = 1; i < order.size(); ++i) {
            const CellIdx a = unflatten_index(order[i - 1].second, l);
            const CellIdx b = unflatten_index(order[i].second, l);
            const int dx = b.x - a.x, dy = b.y - a.y;
            int dir = -1;
            for (int k = 0; k < 8; ++k)
                if (CellGraph::kDx[k] == dx && CellGraph::kDy[k] == dy) dir = k;
            if (dir < 0) continue;  // not 8-adjacent
            const double tod_a = pit.at(a.x, a.y, 2), tod_b = pit.at(b.x, b.y, 2);
            const double delta_s = ((tod_b + 1.0) / 2.0 - (tod_a + 1.0) / 2.0) * double(kSecondsPerDay);
            if (delta_s < 0.0) continue;  // midnight wrap
            const std::int64_t node = std::int64_t(a.x - 1) + std::int64_t(a.y - 1) * l;
            sum[size_t(node)][size_t(dir)] += delta_s;
            cnt[size_t(node)][size_t(dir)] += 1;
        }
    }

    double mean_sum = 0.0;
    std::int64_t mean_cnt = 0;
    for (size_t n = 0; n < sum.size(); ++n)
        for (int k = 0; k < 8; ++k)
            if (cnt[n][size_t(k)] > 0) {
                mean_sum += sum[n][size_t(k)] / double(cnt[n][size_t(k)]);
                ++mean_cnt;
            }
    g.fallback = mean_cnt > 0 ? mean_sum / double(mean_cnt) : 60.0;

    for (size_t n = 0; n < sum.size(); ++n)
        for (int k = 0; k < 8; ++k)
            g.w[n][size_t(k)] = cnt[n][size_t(k)] > 0 ? sum[n][size_t(k)] / double(cnt[n][size_t(k)]) : g.fallback;
    return g;
}

double dijkstra_estimate(const ODTInput& odt, const CellGraph& graph) {
    const int l = graph.grid.l_g;
    const CellIdx co = cell_of(odt.g_o, graph.grid);
    const CellIdx cd = cell_of(odt.g_d, graph.grid);
    const int src = (co.y - 1) * l + (co.x - 1);
    const int dst = (cd.y - 1) * l + (cd.x - 1);
    if (src == dst) return 0.0;

    std::vector<double> dist(size_t(l) * l, 1e30);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[size_t(src)] = 0.0;
    pq.push({0.0, src});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[size_t(u)]) continue;
        if (u == dst) break;
        const int ux = u % l, uy = u / l;
        for (int k = 0; k < 8; ++k) {
            const int vx = ux + CellGraph::kDx[k], vy = uy + CellGraph::kDy[k];
            if (vx < 0 || vx >= l || vy < 0 || vy >= l) continue;
            const int v = vy * l + vx;
            const double nd = d + graph.w[size_t(u)][size_t(k)];
            if (nd < dist[size_t(v)]) {
                dist[size_t(v)] = nd;
                pq.push({nd, v});
            }
        }
    }
    return dist[size_t(dst)] / 60.0;
}

}  // namespace dot
