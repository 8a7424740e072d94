#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dot/rng.hpp"

namespace dot {

/// Dense row-major tensor. The scalar type is a template parameter so the
/// same numeric code can run in 32-bit (production) and 64-bit (gradient
/// checks and oracles) precision.
template <class T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> v;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), v(count(shape), T(0)) {}
    TensorT(std::vector<int> s, std::vector<T> values) : shape(std::move(s)), v(std::move(values)) {
        if (std::int64_t(v.size()) != count(shape)) throw std::invalid_argument("tensor: value count does not match shape");
    }

    static TensorT full(std::vector<int> s, T value) {
        TensorT t(std::move(s));
        for (auto& x : t.v) x = value;
        return t;
    }

    static TensorT randn(std::vector<int> s, SeededRng& rng, double scale = 1.0) {
        TensorT t(std::move(s));
        for (auto& x : t.v) x = T(rng.normal() * scale);
        return t;
    }

    static std::int64_t count(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return std::int64_t(v.size()); }
    int ndim() const { return int(shape.size()); }
    int dim(int i) const { return shape[size_t(i)]; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    T& operator[](std::int64_t i) { return v[size_t(i)]; }
    const T& operator[](std::int64_t i) const { return v[size_t(i)]; }

    // 0-based multi-index accessors for the ranks the code uses.
    T& at(int i, int j) { return v[size_t(i) * shape[1] + j]; }
    T at(int i, int j) const { return v[size_t(i) * shape[1] + j]; }
    T& at(int i, int j, int k) { return v[(size_t(i) * shape[1] + j) * shape[2] + k]; }
    T at(int i, int j, int k) const { return v[(size_t(i) * shape[1] + j) * shape[2] + k]; }
    T& at(int i, int j, int k, int l) { return v[((size_t(i) * shape[1] + j) * shape[2] + k) * shape[3] + l]; }
    T at(int i, int j, int k, int l) const { return v[((size_t(i) * shape[1] + j) * shape[2] + k) * shape[3] + l]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (const T& x : v)
            if (!std::isfinite(double(x))) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << "]";
        return os.str();
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace dot
