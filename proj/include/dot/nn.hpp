#pragma once

#include <cmath>
#include <stdexcept>

#include "dot/kernels.hpp"
#include "dot/params.hpp"
#include "dot/tape.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// Sinusoidal step encoding. With 1-based slots and i in {1..d/2}:
/// PE(n)[2i] = sin(n / 10000^(2i/d)), PE(n)[2i-1] = cos(n / 10000^(2i/d)).
template <class T>
TensorT<T> positional_encoding(int n, int d) {
    if (d <= 0 || d % 2 != 0) throw std::invalid_argument("positional_encoding: d must be positive and even");
    if (n < 0) throw std::invalid_argument("positional_encoding: n must be non-negative");
    TensorT<T> pe({d});
    for (int i = 1; i <= d / 2; ++i) {
        const double arg = double(n) / std::pow(10000.0, 2.0 * double(i) / double(d));
        pe[2 * i - 2] = T(std::cos(arg));  // slot 2i-1
        pe[2 * i - 1] = T(std::sin(arg));  // slot 2i
    }
    return pe;
}

/// Forward-only wrappers over the kernel layer, for callers that do not need
/// gradients.

template <class T>
TensorT<T> gelu(const TensorT<T>& x) {
    TensorT<T> out = x;
    for (auto& v : out.v) v = gelu_scalar(v);
    return out;
}

/// x[..., n] * W[n, m] + b[m]
template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    Tape<T> tape;
    return tape.val(tape.linear(tape.constant(x), tape.constant(w), tape.constant(b)));
}

/// Zero-padded same convolution of x [H,W,Cin] (or [B,H,W,Cin]) with
/// kernels [k,k,Cin,Cout] and bias [Cout].
template <class T>
TensorT<T> conv2d_same(const TensorT<T>& x, const TensorT<T>& kernels, const TensorT<T>& bias) {
    Tape<T> tape;
    return tape.val(tape.conv2d(tape.constant(x), tape.constant(kernels), tape.constant(bias), 1));
}

template <class T>
struct MhaWeights {
    TensorT<T> wq, bq, wk, bk, wv, bv, wo, bo;

    static MhaWeights glorot(int width, SeededRng& rng) {
        MhaWeights w;
        w.wq = glorot_uniform<T>({width, width}, width, width, rng);
        w.wk = glorot_uniform<T>({width, width}, width, width, rng);
        w.wv = glorot_uniform<T>({width, width}, width, width, rng);
        w.wo = glorot_uniform<T>({width, width}, width, width, rng);
        w.bq = TensorT<T>({width});
        w.bk = TensorT<T>({width});
        w.bv = TensorT<T>({width});
        w.bo = TensorT<T>({width});
        return w;
    }
};

/// Standard multi-head self-attention over L items of width d.
template <class T>
TensorT<T> multi_head_attention(const TensorT<T>& items, const MhaWeights<T>& w, int heads) {
    Tape<T> tape;
    typename Tape<T>::MhaParams p{tape.constant(w.wq), tape.constant(w.bq), tape.constant(w.wk), tape.constant(w.bk),
                                  tape.constant(w.wv), tape.constant(w.bv), tape.constant(w.wo), tape.constant(w.bo)};
    return tape.val(tape.multi_head_attention(tape.constant(items), p, heads));
}

}  // namespace dot
