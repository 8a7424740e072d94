#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dot {

/// Variance schedule of the diffusion process. beta rises linearly from
/// 0.0001 to 0.02 over N steps; alpha_bar is the running product of
/// alpha_n = 1 - beta_n. Kept in double precision regardless of the model's
/// scalar type. Accessors take the paper's 1-based step index.
struct NoiseSchedule {
    int n_steps = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double beta(int n) const { return betas[size_t(n - 1)]; }
    double alpha(int n) const { return alphas[size_t(n - 1)]; }
    double alpha_bar(int n) const { return alpha_bars[size_t(n - 1)]; }
};

inline NoiseSchedule linear_schedule(int n_steps) {
    if (n_steps < 2) throw std::invalid_argument("schedule: N must be >= 2");
    constexpr double kBetaStart = 1e-4;
    constexpr double kBetaEnd = 0.02;
    NoiseSchedule s;
    s.n_steps = n_steps;
    s.betas.resize(size_t(n_steps));
    s.alphas.resize(size_t(n_steps));
    s.alpha_bars.resize(size_t(n_steps));
    double prod = 1.0;
    for (int n = 1; n <= n_steps; ++n) {
        const double beta = kBetaStart + double(n - 1) * (kBetaEnd - kBetaStart) / double(n_steps - 1);
        const double alpha = 1.0 - beta;
        prod *= alpha;
        s.betas[size_t(n - 1)] = beta;
        s.alphas[size_t(n - 1)] = alpha;
        s.alpha_bars[size_t(n - 1)] = prod;
    }
    return s;
}

}  // namespace dot
