#include "dot/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace dot {

RegressionReport regression_metrics(const std::vector<double>& preds, const std::vector<double>& truths) {
    if (preds.size() != truths.size()) throw std::invalid_argument("regression_metrics: length mismatch");
    if (preds.empty()) throw std::invalid_argument("regression_metrics: empty input");
    double se = 0.0, ae = 0.0, ape = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (truths[i] <= 0.0) throw std::invalid_argument("regression_metrics: non-positive truth");
        const double d = preds[i] - truths[i];
        se += d * d;
        ae += std::abs(d);
        ape += std::abs(d) / truths[i];
    }
    const double n = double(preds.size());
    RegressionReport r;
    r.rmse = std::sqrt(se / n);
    r.mae = ae / n;
    r.mape = 100.0 * ape / n;
    r.n = std::int64_t(preds.size());
    // Power-mean inequality; holds for every report.
    if (r.rmse < r.mae - 1e-12) throw std::logic_error("regression_metrics: rmse < mae");
    return r;
}

namespace {

PiTReport pit_metrics_impl(const std::vector<PiT>& inferred, const std::vector<PiT>& truth, bool valid_only) {
    if (inferred.size() != truth.size() || inferred.empty())
        throw std::invalid_argument("pit_metrics: size mismatch");
    double se[3] = {0, 0, 0}, ae[3] = {0, 0, 0};
    std::int64_t count = 0;
    for (size_t s = 0; s < inferred.size(); ++s) {
        const PiT& a = inferred[s];
        const PiT& b = truth[s];
        if (a.l_g != b.l_g) throw std::invalid_argument("pit_metrics: shape mismatch");
        for (std::int64_t p = 0; p < a.cells(); ++p) {
            if (valid_only && b.v[size_t(p) * 3] < 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                const double d = a.v[size_t(p) * 3 + size_t(c)] - b.v[size_t(p) * 3 + size_t(c)];
                se[c] += d * d;
                ae[c] += std::abs(d);
            }
            ++count;
        }
    }
    PiTReport r;
    if (count == 0) return r;
    double se_all = 0.0, ae_all = 0.0;
    for (int c = 0; c < 3; ++c) {
        r.rmse_channel[c] = std::sqrt(se[c] / double(count));
        r.mae_channel[c] = ae[c] / double(count);
        se_all += se[c];
        ae_all += ae[c];
    }
    r.rmse_overall = std::sqrt(se_all / double(3 * count));
    r.mae_overall = ae_all / double(3 * count);
    return r;
}

}  // namespace

PiTReport pit_metrics(const std::vector<PiT>& inferred, const std::vector<PiT>& truth) {
    return pit_metrics_impl(inferred, truth, false);
}

PiTReport pit_metrics_valid_cells(const std::vector<PiT>& inferred, const std::vector<PiT>& truth) {
    return pit_metrics_impl(inferred, truth, true);
}

RouteReport route_metrics(const std::vector<PiT>& inferred, const std::vector<PiT>& truth) {
    if (inferred.size() != truth.size() || inferred.empty())
        throw std::invalid_argument("route_metrics: size mismatch");
    RouteReport r;
    for (size_t s = 0; s < inferred.size(); ++s) {
        const PiT& a = inferred[s];
        const PiT& b = truth[s];
        if (a.l_g != b.l_g) throw std::invalid_argument("route_metrics: shape mismatch");
        bool any_truth = false;
        for (std::int64_t p = 0; p < b.cells(); ++p) any_truth = any_truth || b.v[size_t(p) * 3] >= 0.0;
        if (!any_truth) {
            ++r.skipped;
            continue;
        }
        for (std::int64_t p = 0; p < a.cells(); ++p) {
            const bool pred = a.v[size_t(p) * 3] >= 0.0;
            const bool pos = b.v[size_t(p) * 3] >= 0.0;
            if (pred && pos) ++r.true_pos;
            else if (pred && !pos) ++r.false_pos;
            else if (!pred && pos) ++r.false_neg;
        }
    }
    const double tp = double(r.true_pos);
    r.precision = (r.true_pos + r.false_pos) > 0 ? 100.0 * tp / double(r.true_pos + r.false_pos) : 0.0;
    r.recall = (r.true_pos + r.false_neg) > 0 ? 100.0 * tp / double(r.true_pos + r.false_neg) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

}  // namespace dot
