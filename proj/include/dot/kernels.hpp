#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dot/tensor.hpp"

namespace dot {

/// Global multiply-accumulate counter used by the efficiency benchmarks.
/// Kernels add their MAC counts when enabled. Single-writer phases only.
inline bool in_parallel() {
#ifdef _OPENMP
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

struct FlopCounter {
    static std::atomic<bool>& enabled() {
        static std::atomic<bool> on{false};
        return on;
    }
    static std::atomic<std::int64_t>& macs() {
        static std::atomic<std::int64_t> n{0};
        return n;
    }
    static void add(std::int64_t n) {
        if (enabled().load(std::memory_order_relaxed)) macs().fetch_add(n, std::memory_order_relaxed);
    }
    static void reset() { macs().store(0); }
    static std::int64_t flops() { return 2 * macs().load(); }
};

// ---------------------------------------------------------------------------
// GEMM. Row-major. Each output element is accumulated in a fixed order, so
// results are bitwise reproducible for any thread count. The public entry
// points split output rows over threads; the row cores contain no OpenMP
// so nested calls (e.g. from inside a parallelized attention loop) run as
// plain loops with zero directive overhead.
// ---------------------------------------------------------------------------

namespace detail {

// Splits [0, M) into per-thread row ranges when parallelism pays off.
template <class Core>
void parallel_rows(int M, std::int64_t work, Core&& core) {
#ifdef _OPENMP
    if (!in_parallel() && work > 65536 && M > 1) {
#pragma omp parallel
        {
            const int nt = omp_get_num_threads();
            const int t = omp_get_thread_num();
            const int chunk = (M + nt - 1) / nt;
            const int i0 = t * chunk;
            const int i1 = std::min(M, i0 + chunk);
            if (i0 < i1) core(i0, i1);
        }
        return;
    }
#endif
    (void)work;
    core(0, M);
}

template <class T>
void gemm_rows(int i0, int i1, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C,
               bool accumulate) {
    for (int i = i0; i < i1; ++i) {
        T* c = C + std::int64_t(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = T(0);
        const T* a = A + std::int64_t(i) * K;
        for (int k = 0; k < K; ++k) {
            const T ak = a[k];
            const T* b = B + std::int64_t(k) * N;
            for (int j = 0; j < N; ++j) c[j] += ak * b[j];
        }
    }
}

template <class T>
void gemm_nt_rows(int i0, int i1, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C,
                  bool accumulate) {
    for (int i = i0; i < i1; ++i) {
        const T* a = A + std::int64_t(i) * K;
        T* c = C + std::int64_t(i) * N;
        for (int j = 0; j < N; ++j) {
            const T* b = B + std::int64_t(j) * K;
            T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
            int k = 0;
            for (; k + 4 <= K; k += 4) {
                s0 += a[k] * b[k];
                s1 += a[k + 1] * b[k + 1];
                s2 += a[k + 2] * b[k + 2];
                s3 += a[k + 3] * b[k + 3];
            }
            T s = (s0 + s1) + (s2 + s3);
            for (; k < K; ++k) s += a[k] * b[k];
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

template <class T>
void gemm_tn_rows(int i0, int i1, int M, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C,
                  bool accumulate) {
    for (int i = i0; i < i1; ++i) {
        T* c = C + std::int64_t(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = T(0);
        for (int k = 0; k < K; ++k) {
            const T ak = A[std::int64_t(k) * M + i];
            const T* b = B + std::int64_t(k) * N;
            for (int j = 0; j < N; ++j) c[j] += ak * b[j];
        }
    }
}

}  // namespace detail

/// C[M,N] (+)= A[M,K] * B[K,N]
template <class T>
void gemm(int M, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C, bool accumulate) {
    FlopCounter::add(std::int64_t(M) * N * K);
    detail::parallel_rows(M, std::int64_t(M) * N * K,
                          [&](int i0, int i1) { detail::gemm_rows(i0, i1, N, K, A, B, C, accumulate); });
}

/// C[M,N] (+)= A[M,K] * B[N,K]^T
template <class T>
void gemm_nt(int M, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C, bool accumulate) {
    FlopCounter::add(std::int64_t(M) * N * K);
    detail::parallel_rows(M, std::int64_t(M) * N * K,
                          [&](int i0, int i1) { detail::gemm_nt_rows(i0, i1, N, K, A, B, C, accumulate); });
}

/// C[M,N] (+)= A[K,M]^T * B[K,N]
template <class T>
void gemm_tn(int M, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C, bool accumulate) {
    FlopCounter::add(std::int64_t(M) * N * K);
    detail::parallel_rows(M, std::int64_t(M) * N * K,
                          [&](int i0, int i1) { detail::gemm_tn_rows(i0, i1, M, N, K, A, B, C, accumulate); });
}

// ---------------------------------------------------------------------------
// Convolution, NHWC layout, zero-padded "same" output (ceil(H/stride) rows).
// Implemented as im2col + GEMM. Kernel tensor layout is [k, k, Cin, Cout].
// ---------------------------------------------------------------------------

inline int conv_out_len(int len, int stride) { return (len + stride - 1) / stride; }

/// Expands input patches into rows of [B*Ho*Wo, k*k*Cin].
template <class T>
void im2col(const T* __restrict x, int B, int H, int W, int C, int k, int stride, T* __restrict col) {
    const int Ho = conv_out_len(H, stride), Wo = conv_out_len(W, stride);
    const int pad = k / 2;
    const int patch = k * k * C;
#pragma omp parallel for schedule(static) if (!in_parallel() && std::int64_t(B) * Ho * Wo * patch > 65536)
    for (std::int64_t r = 0; r < std::int64_t(B) * Ho * Wo; ++r) {
        const int b = int(r / (Ho * Wo));
        const int oy = int((r / Wo) % Ho);
        const int ox = int(r % Wo);
        T* dst = col + r * patch;
        for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
                    for (int c = 0; c < C; ++c) *dst++ = T(0);
                } else {
                    const T* src = x + ((std::int64_t(b) * H + iy) * W + ix) * C;
                    for (int c = 0; c < C; ++c) *dst++ = src[c];
                }
            }
        }
    }
}

/// Scatter-adds column rows back into input gradients (transpose of im2col).
template <class T>
void col2im_add(const T* __restrict col, int B, int H, int W, int C, int k, int stride, T* __restrict gx) {
    const int Ho = conv_out_len(H, stride), Wo = conv_out_len(W, stride);
    const int pad = k / 2;
    const int patch = k * k * C;
    // Serial over rows: overlapping patches write to shared input cells.
    for (std::int64_t r = 0; r < std::int64_t(B) * Ho * Wo; ++r) {
        const int b = int(r / (Ho * Wo));
        const int oy = int((r / Wo) % Ho);
        const int ox = int(r % Wo);
        const T* src = col + r * patch;
        for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * stride + kx - pad;
                if (iy >= 0 && iy < H && ix >= 0 && ix < W) {
                    T* dst = gx + ((std::int64_t(b) * H + iy) * W + ix) * C;
                    for (int c = 0; c < C; ++c) dst[c] += src[c];
                }
                src += C;
            }
        }
    }
}

/// Forward convolution; y must hold B*Ho*Wo*Cout elements.
template <class T>
void conv2d_forward(const T* x, int B, int H, int W, int Cin, const T* w, int k, int Cout, const T* bias, int stride,
                    T* y, std::vector<T>* col_cache = nullptr) {
    const int Ho = conv_out_len(H, stride), Wo = conv_out_len(W, stride);
    const std::int64_t rows = std::int64_t(B) * Ho * Wo;
    std::vector<T> local;
    std::vector<T>& col = col_cache ? *col_cache : local;
    col.assign(size_t(rows * k * k * Cin), T(0));
    im2col(x, B, H, W, Cin, k, stride, col.data());
    gemm(int(rows), Cout, k * k * Cin, col.data(), w, y, false);
#pragma omp parallel for schedule(static) if (!in_parallel() && rows * Cout > 65536)
    for (std::int64_t r = 0; r < rows; ++r) {
        T* yr = y + r * Cout;
        for (int c = 0; c < Cout; ++c) yr[c] += bias[c];
    }
}

/// Backward convolution. Accumulates into gw, gb, and (if nonnull) gx.
template <class T>
void conv2d_backward(const T* x, int B, int H, int W, int Cin, const T* w, int k, int Cout, int stride, const T* gy,
                     T* gx, T* gw, T* gb) {
    const int Ho = conv_out_len(H, stride), Wo = conv_out_len(W, stride);
    const std::int64_t rows = std::int64_t(B) * Ho * Wo;
    const int patch = k * k * Cin;
    std::vector<T> col(size_t(rows * patch));
    im2col(x, B, H, W, Cin, k, stride, col.data());
    // gw[patch, Cout] += col^T * gy
    gemm_tn(patch, Cout, int(rows), col.data(), gy, gw, true);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* g = gy + r * Cout;
        for (int c = 0; c < Cout; ++c) gb[c] += g[c];
    }
    if (gx) {
        std::vector<T> gcol(size_t(rows * patch));
        // gcol[rows, patch] = gy * w^T
        gemm_nt(int(rows), patch, Cout, gy, w, gcol.data(), false);
        col2im_add(gcol.data(), B, H, W, Cin, k, stride, gx);
    }
}

// ---------------------------------------------------------------------------
// Elementwise and normalization kernels
// ---------------------------------------------------------------------------

/// exp for the 32-bit path: 2^k * 2^r with a degree-6 polynomial for 2^r,
/// relative error around 3e-8. Branchless (inputs are clamped, so -inf maps
/// to a denormal-range value) and auto-vectorizable. The 64-bit
/// instantiation keeps std::exp so oracles and gradient checks see full
/// precision.
inline float exp_scalar(float x) {
    const float xc = std::min(88.0f, std::max(-87.0f, x));
    const float y = xc * 1.44269504088896341f;
    const float k = std::floor(y + 0.5f);
    const float r = y - k;
    // Taylor of exp(r ln 2) to degree 6.
    constexpr float c1 = 0.693147180559945f;
    constexpr float c2 = 0.240226506959101f;
    constexpr float c3 = 0.0555041086648216f;
    constexpr float c4 = 0.00961812910762848f;
    constexpr float c5 = 0.00133335581464284f;
    constexpr float c6 = 0.000154035303933816f;
    const float p = 1.0f + r * (c1 + r * (c2 + r * (c3 + r * (c4 + r * (c5 + r * c6)))));
    const std::int32_t ki = std::int32_t(k);
    std::uint32_t bits;
    std::memcpy(&bits, &p, sizeof bits);
    bits += std::uint32_t(ki) << 23;
    float out;
    std::memcpy(&out, &bits, sizeof out);
    return out;
}

inline double exp_scalar(double x) { return std::exp(x); }

// x * Phi(x) with the Gaussian CDF via erf (not the tanh shortcut). The
// float path uses the single-precision libm functions.
inline float gelu_scalar(float x) { return x * 0.5f * (1.0f + std::erff(x * 0.70710678118654752f)); }
inline double gelu_scalar(double x) { return x * 0.5 * (1.0 + std::erf(x * 0.7071067811865475244)); }

inline float gelu_grad_scalar(float x) {
    const float phi = 0.5f * (1.0f + std::erff(x * 0.70710678118654752f));
    const float pdf = exp_scalar(-0.5f * x * x) * 0.398942280401432678f;
    return phi + x * pdf;
}
inline double gelu_grad_scalar(double x) {
    const double phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
    return phi + x * pdf;
}

/// In-place exp over a row already shifted into (-inf, 0]; entries are
/// clamped at -87 in a separate pass so every loop body stays branch-free
/// and vectorizes (the clamp also keeps the int conversion defined for
/// -inf logits from masking).
inline void exp_row(float* __restrict row, int n) {
    for (int j = 0; j < n; ++j) row[j] = row[j] < -87.0f ? -87.0f : row[j];
    for (int j = 0; j < n; ++j) {
        const float y = row[j] * 1.44269504088896341f;
        const std::int32_t ki = std::int32_t(y + 12582912.0f) - 12582912;  // round to nearest
        const float r = y - float(ki);
        constexpr float c1 = 0.693147180559945f;
        constexpr float c2 = 0.240226506959101f;
        constexpr float c3 = 0.0555041086648216f;
        constexpr float c4 = 0.00961812910762848f;
        constexpr float c5 = 0.00133335581464284f;
        constexpr float c6 = 0.000154035303933816f;
        const float p = 1.0f + r * (c1 + r * (c2 + r * (c3 + r * (c4 + r * (c5 + r * c6)))));
        std::uint32_t bits;
        std::memcpy(&bits, &p, sizeof bits);
        bits += std::uint32_t(ki) << 23;
        std::memcpy(&row[j], &bits, sizeof(float));
    }
}

inline void exp_row(double* __restrict row, int n) {
    for (int j = 0; j < n; ++j) row[j] = std::exp(row[j]);
}

/// Softmax over rows of a [rows, n] matrix, in place. Separate max, shift,
/// exp, sum and scale passes so each one vectorizes.
template <class T>
void softmax_rows(T* a, std::int64_t rows, int n) {
    FlopCounter::add(rows * n * 2);
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = a + r * n;
        T mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        for (int j = 0; j < n; ++j) row[j] -= mx;
        exp_row(row, n);
        T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            s0 += row[j];
            s1 += row[j + 1];
            s2 += row[j + 2];
            s3 += row[j + 3];
        }
        T sum = (s0 + s1) + (s2 + s3);
        for (; j < n; ++j) sum += row[j];
        const T inv = T(1) / sum;
        for (int j2 = 0; j2 < n; ++j2) row[j2] *= inv;
    }
}

/// y = layernorm(x) * gain + bias over the last axis; saves mean and the
/// reciprocal standard deviation per row for the backward pass.
template <class T>
void layernorm_forward(const T* x, std::int64_t rows, int n, const T* gain, const T* bias, T* y, T* mean, T* rstd) {
    constexpr double kEps = 1e-5;
    FlopCounter::add(rows * n * 3);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * n;
        T* yr = y + r * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += double(xr[j]);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = double(xr[j]) - mu;
            var += d * d;
        }
        var /= n;
        const double rs = 1.0 / std::sqrt(var + kEps);
        mean[r] = T(mu);
        rstd[r] = T(rs);
        for (int j = 0; j < n; ++j) yr[j] = T((double(xr[j]) - mu) * rs) * gain[j] + bias[j];
    }
}

template <class T>
void layernorm_backward(const T* x, std::int64_t rows, int n, const T* gain, const T* mean, const T* rstd, const T* gy,
                        T* gx, T* ggain, T* gbias) {
    FlopCounter::add(rows * n * 6);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * n;
        const T* gyr = gy + r * n;
        T* gxr = gx + r * n;
        const double mu = double(mean[r]), rs = double(rstd[r]);
        double sum_g = 0.0, sum_gx = 0.0;
        for (int j = 0; j < n; ++j) {
            const double xhat = (double(xr[j]) - mu) * rs;
            const double g = double(gyr[j]) * double(gain[j]);
            sum_g += g;
            sum_gx += g * xhat;
            ggain[j] += T(double(gyr[j]) * xhat);
            gbias[j] += gyr[j];
        }
        for (int j = 0; j < n; ++j) {
            const double xhat = (double(xr[j]) - mu) * rs;
            const double g = double(gyr[j]) * double(gain[j]);
            gxr[j] += T(rs * (g - sum_g / n - xhat * sum_gx / n));
        }
    }
}

}  // namespace dot
