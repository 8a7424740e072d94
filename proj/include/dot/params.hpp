#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "dot/rng.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// Named learnable parameters with matching gradient slots. Iteration order
/// is the name order, which keeps optimizer updates and checkpoints
/// deterministic.
template <class T>
struct ParamStoreT {
    std::map<std::string, TensorT<T>> params;
    std::map<std::string, TensorT<T>> grads;

    TensorT<T>& add(const std::string& name, TensorT<T> t) {
        auto [it, inserted] = params.emplace(name, std::move(t));
        if (!inserted) throw std::invalid_argument("param store: duplicate name " + name);
        return it->second;
    }

    TensorT<T>& at(const std::string& name) {
        auto it = params.find(name);
        if (it == params.end()) throw std::out_of_range("param store: missing " + name);
        return it->second;
    }
    const TensorT<T>& at(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw std::out_of_range("param store: missing " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params.count(name) != 0; }

    void zero_grads() {
        for (auto& [name, p] : params) {
            auto it = grads.find(name);
            if (it == grads.end())
                grads.emplace(name, TensorT<T>(p.shape));
            else
                for (auto& g : it->second.v) g = T(0);
        }
    }

    void accumulate_grad(const std::string& name, const TensorT<T>& g) {
        const TensorT<T>& p = at(name);
        if (!p.same_shape(g))
            throw std::invalid_argument("param store: gradient shape mismatch for " + name);
        auto it = grads.find(name);
        if (it == grads.end()) it = grads.emplace(name, TensorT<T>(p.shape)).first;
        for (std::int64_t i = 0; i < g.numel(); ++i) it->second[i] += g[i];
    }

    std::int64_t total_params() const {
        std::int64_t n = 0;
        for (const auto& [name, p] : params) n += p.numel();
        return n;
    }
};

using ParamStore = ParamStoreT<float>;

/// Adam optimizer state: per-parameter first/second moments plus the shared
/// step counter. beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
template <class T>
struct AdamStateT {
    std::map<std::string, TensorT<T>> m;
    std::map<std::string, TensorT<T>> v;
    std::int64_t step = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
};

using AdamState = AdamStateT<float>;

/// Bias-corrected Adam update applied in place; increments the step counter.
/// Throws if any parameter has no populated gradient slot.
template <class T>
void adam_step(ParamStoreT<T>& store, AdamStateT<T>& state, double lr) {
    state.step += 1;
    const double b1 = AdamStateT<T>::kBeta1, b2 = AdamStateT<T>::kBeta2;
    const double c1 = 1.0 - std::pow(b1, double(state.step));
    const double c2 = 1.0 - std::pow(b2, double(state.step));
    for (auto& [name, p] : store.params) {
        auto git = store.grads.find(name);
        if (git == store.grads.end()) throw std::runtime_error("adam: missing gradient for " + name);
        const TensorT<T>& g = git->second;
        if (!g.same_shape(p)) throw std::runtime_error("adam: gradient shape mismatch for " + name);
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(name, TensorT<T>(p.shape)).first;
            state.v.emplace(name, TensorT<T>(p.shape));
        }
        TensorT<T>& m = mit->second;
        TensorT<T>& v = state.v.at(name);
        for (std::int64_t i = 0; i < p.numel(); ++i) {
            const double gi = double(g[i]);
            const double mi = b1 * double(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * double(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = T(mi);
            v[i] = T(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            p[i] = T(double(p[i]) - lr * mhat / (std::sqrt(vhat) + AdamStateT<T>::kEps));
        }
    }
}

/// Glorot-uniform initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <class T>
TensorT<T> glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, SeededRng& rng) {
    TensorT<T> t(std::move(shape));
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    for (auto& x : t.v) x = T(rng.uniform(-a, a));
    return t;
}

}  // namespace dot
