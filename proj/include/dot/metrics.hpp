#pragma once

#include <vector>

#include "dot/geo.hpp"

namespace dot {

struct RegressionReport {
    double rmse = 0.0;   // minutes
    double mae = 0.0;    // minutes
    double mape = 0.0;   // percent
    std::int64_t n = 0;
};

/// Per-channel and overall error over PiT entries, pooled across the set.
struct PiTReport {
    double rmse_overall = 0.0, mae_overall = 0.0;
    double rmse_channel[3] = {0, 0, 0};
    double mae_channel[3] = {0, 0, 0};
};

/// Micro-aggregated precision/recall/F1 (percent) over binarized masks.
struct RouteReport {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::int64_t true_pos = 0, false_pos = 0, false_neg = 0;
    std::int64_t skipped = 0;  // samples with no truth-positive cell
};

RegressionReport regression_metrics(const std::vector<double>& preds, const std::vector<double>& truths);

PiTReport pit_metrics(const std::vector<PiT>& inferred, const std::vector<PiT>& truth);

/// Same metric restricted to the cells whose truth mask is valid.
PiTReport pit_metrics_valid_cells(const std::vector<PiT>& inferred, const std::vector<PiT>& truth);

RouteReport route_metrics(const std::vector<PiT>& inferred, const std::vector<PiT>& truth);

inline RouteReport route_metrics_single(const PiT& inferred, const PiT& truth) {
    return route_metrics({inferred}, {truth});
}

}  // namespace dot
