#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dot/geo.hpp"

namespace dot {

struct TempConfig {
    double radius_m = 500.0;
    double window_min = 30.0;
    int k_min = 5;
    int max_expansions = 4;
};

/// Training-split history (ODT-Input, travel time) with a coarse spatial
/// bucket index on the origin for radius queries.
class HistoryIndex {
public:
    struct Record {
        ODTInput odt;
        double minutes = 0.0;
    };

    explicit HistoryIndex(std::vector<Record> records);

    const std::vector<Record>& records() const { return records_; }

    /// Indices of records with origin within radius_m of g_o (haversine).
    std::vector<std::int64_t> origin_candidates(const GeoPoint& g_o, double radius_m) const;

private:
    std::vector<Record> records_;
    double bucket_deg_ = 0.01;
    double lng_min_ = 0.0, lat_min_ = 0.0;
    int nx_ = 0, ny_ = 0;
    std::vector<std::vector<std::int64_t>> buckets_;

    int bucket_of(double lng, double lat) const;
};

/// TEMP baseline: mean travel time of history records with similar origin,
/// destination and departure time. Thresholds double up to
/// cfg.max_expansions times when fewer than cfg.k_min neighbors match.
/// Throws "no history" when no neighbor is found even after expansion.
double temp_estimate(const ODTInput& odt, const HistoryIndex& hist, const TempConfig& cfg = TempConfig{});

/// 8-neighbor grid graph with mean observed traversal seconds per directed
/// edge; unobserved edges carry the global fallback weight.
struct CellGraph {
    GridSpec grid;
    // w[node][dir], dir indexes the 8 neighbor offsets below.
    std::vector<std::array<double, 8>> w;
    double fallback = 0.0;

    static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
};

/// Builds the cell graph from training PiTs: valid cells ordered by the
/// offset channel; each 8-adjacent consecutive pair contributes the
/// time-of-day difference as a traversal sample (negative deltas are
/// midnight wraps and are discarded).
CellGraph build_cell_graph(const std::vector<PiT>& train_pits, const GridSpec& grid);

/// Shortest-path travel time in minutes between the origin and destination
/// cells of the query.
double dijkstra_estimate(const ODTInput& odt, const CellGraph& graph);

}  // namespace dot
