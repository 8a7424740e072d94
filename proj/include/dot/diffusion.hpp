#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dot/geo.hpp"
#include "dot/params.hpp"
#include "dot/rng.hpp"
#include "dot/schedule.hpp"
#include "dot/tape.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// PiT as a model tensor, layout [y, x, channel] so the flattened item order
/// matches flatten_index.
template <class T>
TensorT<T> pit_to_tensor(const PiT& pit) {
    TensorT<T> t({pit.l_g, pit.l_g, 3});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = T(pit.v[size_t(i)]);
    return t;
}

/// Clamps every entry into [-1, 1] and converts back to a PiT.
template <class T>
PiT tensor_to_pit_clamped(const TensorT<T>& t) {
    if (t.ndim() != 3 || t.dim(0) != t.dim(1) || t.dim(2) != 3)
        throw std::invalid_argument("tensor_to_pit: expected [L,L,3]");
    PiT pit(t.dim(0));
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        double v = double(t[i]);
        pit.v[size_t(i)] = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    }
    return pit;
}

/// One training batch of the diffusion stage: clean PiTs, their ODT
/// encodings, per-sample step indices, and per-sample standard normal noise.
template <class T>
struct DiffusionBatchT {
    TensorT<T> x0;            // [B, L, L, 3]
    TensorT<T> odt;           // [B, 5]
    std::vector<int> n;       // per-sample step, 1-based
    TensorT<T> eps;           // [B, L, L, 3]

    int batch_size() const { return x0.dim(0); }
};

/// Closed-form forward corruption: sqrt(abar_n) X0 + sqrt(1 - abar_n) eps.
template <class T>
TensorT<T> q_sample(const TensorT<T>& x0, int n, const TensorT<T>& eps, const NoiseSchedule& sched) {
    if (n < 1 || n > sched.n_steps) throw std::invalid_argument("q_sample: step out of range");
    check_same_shape(x0, eps, "q_sample");
    const T a = T(std::sqrt(sched.alpha_bar(n)));
    const T b = T(std::sqrt(1.0 - sched.alpha_bar(n)));
    TensorT<T> out = x0;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

/// Batched q_sample with a per-sample step index.
template <class T>
TensorT<T> q_sample_batch(const TensorT<T>& x0, const std::vector<int>& n, const TensorT<T>& eps,
                          const NoiseSchedule& sched) {
    check_same_shape(x0, eps, "q_sample");
    const int B = x0.dim(0);
    if (int(n.size()) != B) throw std::invalid_argument("q_sample: step count != batch size");
    const std::int64_t per = x0.numel() / B;
    TensorT<T> out = x0;
    for (int b = 0; b < B; ++b) {
        if (n[size_t(b)] < 1 || n[size_t(b)] > sched.n_steps) throw std::invalid_argument("q_sample: step out of range");
        const T ca = T(std::sqrt(sched.alpha_bar(n[size_t(b)])));
        const T cb = T(std::sqrt(1.0 - sched.alpha_bar(n[size_t(b)])));
        const std::int64_t off = std::int64_t(b) * per;
        for (std::int64_t i = 0; i < per; ++i) out[off + i] = ca * x0[off + i] + cb * eps[off + i];
    }
    return out;
}

/// One optimization step of Algorithm "Training PiT inference model":
/// corrupt, predict the noise, take an Adam step on the MSE. Returns the
/// batch loss.
template <class T, class Model>
double train_denoiser_step(Model& model, const DiffusionBatchT<T>& batch, const NoiseSchedule& sched,
                           AdamStateT<T>& adam, double lr) {
    TensorT<T> xn = q_sample_batch(batch.x0, batch.n, batch.eps, sched);
    Tape<T> tape;
    Var xn_leaf = tape.leaf(std::move(xn), false);
    Var eps_hat = model.forward(tape, xn_leaf, batch.n, batch.odt, /*train=*/true);
    Var loss = tape.mse(eps_hat, batch.eps);
    const double loss_value = double(tape.val(loss)[0]);
    if (!std::isfinite(loss_value)) throw std::runtime_error("diverged");
    tape.backward(loss);
    model.store().zero_grads();
    model.harvest_grads(tape);
    adam_step(model.store(), adam, lr);
    return loss_value;
}

/// One reverse step: X_{n-1} = (X_n - beta_n / sqrt(1-abar_n) * eps_hat) / sqrt(alpha_n)
/// + sqrt(beta_n) * z, with z = 0 at the final step n = 1.
template <class T, class Model>
TensorT<T> p_sample_step(const TensorT<T>& xn, int n, const TensorT<T>& odt_row, Model& model,
                         const NoiseSchedule& sched, SeededRng& rng) {
    if (n < 1 || n > sched.n_steps) throw std::invalid_argument("p_sample: step out of range");
    Tape<T> tape;
    TensorT<T> xb = xn;
    xb.shape.insert(xb.shape.begin(), 1);  // batch of one
    Var eps_hat = model.forward(tape, tape.constant(std::move(xb)), {n}, odt_row, /*train=*/false);
    const TensorT<T>& eh = tape.val(eps_hat);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(n));
    const double coef = sched.beta(n) / std::sqrt(1.0 - sched.alpha_bar(n));
    const double sigma = std::sqrt(sched.beta(n));
    TensorT<T> out = xn;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        double v = inv_sqrt_alpha * (double(xn[i]) - coef * double(eh[i]));
        if (n > 1) v += sigma * rng.normal();
        out[i] = T(v);
    }
    if (!out.all_finite()) throw std::runtime_error("p_sample: non-finite output");
    return out;
}

/// Full reverse process of Algorithm "Inferring PiT given ODT-Input":
/// start from standard Gaussian noise, denoise N..1, clamp to [-1, 1].
template <class T, class Model>
PiT infer_pit(const ODTInput& odt, Model& model, const NoiseSchedule& sched, int l_g, std::uint64_t seed) {
    SeededRng rng(seed);
    TensorT<T> x({l_g, l_g, 3});
    for (auto& v : x.v) v = T(rng.normal());
    TensorT<T> odt_row({1, 5});
    for (int i = 0; i < 5; ++i) odt_row[i] = T(odt.encoded[i]);
    for (int n = sched.n_steps; n >= 1; --n) x = p_sample_step(x, n, odt_row, model, sched, rng);
    return tensor_to_pit_clamped(x);
}

/// Batched inference. Each query owns an independent noise stream, so the
/// result per query is bitwise identical to the single-query infer_pit with
/// the same seed, for any batch partition.
template <class T, class Model>
std::vector<PiT> infer_pit_batch(const std::vector<ODTInput>& odts, Model& model, const NoiseSchedule& sched, int l_g,
                                 const std::vector<std::uint64_t>& seeds, int max_batch = 64) {
    if (odts.size() != seeds.size()) throw std::invalid_argument("infer_pit_batch: seeds size mismatch");
    std::vector<PiT> out(odts.size());
    const std::int64_t per = std::int64_t(l_g) * l_g * 3;
    for (size_t begin = 0; begin < odts.size(); begin += size_t(max_batch)) {
        const int B = int(std::min(size_t(max_batch), odts.size() - begin));
        std::vector<SeededRng> rngs;
        rngs.reserve(size_t(B));
        TensorT<T> x({B, l_g, l_g, 3});
        TensorT<T> odt_rows({B, 5});
        for (int b = 0; b < B; ++b) {
            rngs.emplace_back(seeds[begin + size_t(b)]);
            for (std::int64_t i = 0; i < per; ++i) x[b * per + i] = T(rngs.back().normal());
            for (int i = 0; i < 5; ++i) odt_rows[std::int64_t(b) * 5 + i] = T(odts[begin + size_t(b)].encoded[i]);
        }
        for (int n = sched.n_steps; n >= 1; --n) {
            Tape<T> tape;
            std::vector<int> steps(size_t(B), n);
            Var eps_hat = model.forward(tape, tape.constant(x), steps, odt_rows, /*train=*/false);
            const TensorT<T>& eh = tape.val(eps_hat);
            const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(n));
            const double coef = sched.beta(n) / std::sqrt(1.0 - sched.alpha_bar(n));
            const double sigma = std::sqrt(sched.beta(n));
            for (int b = 0; b < B; ++b) {
                const std::int64_t off = b * per;
                for (std::int64_t i = 0; i < per; ++i) {
                    double v = inv_sqrt_alpha * (double(x[off + i]) - coef * double(eh[off + i]));
                    if (n > 1) v += sigma * rngs[size_t(b)].normal();
                    x[off + i] = T(v);
                }
            }
            if (!x.all_finite()) throw std::runtime_error("p_sample: non-finite output");
        }
        for (int b = 0; b < B; ++b) {
            TensorT<T> one({l_g, l_g, 3});
            for (std::int64_t i = 0; i < per; ++i) one[i] = x[b * per + i];
            out[begin + size_t(b)] = tensor_to_pit_clamped(one);
        }
    }
    return out;
}

}  // namespace dot
