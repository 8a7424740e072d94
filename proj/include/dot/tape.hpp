#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dot/kernels.hpp"
#include "dot/tensor.hpp"

namespace dot {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff over TensorT values. Ops append nodes; backward()
/// walks them in reverse creation order (a topological order by
/// construction). Nodes whose gradient is never requested are skipped, so
/// running a forward pass with no grad-requiring leaves costs only the
/// forward kernels.
template <class T>
class Tape {
public:
    using Ten = TensorT<T>;

    Var leaf(Ten value, bool requires_grad = false) {
        nodes_.push_back(Node{std::move(value), Ten{}, nullptr, requires_grad});
        return Var{int(nodes_.size()) - 1};
    }

    Var constant(Ten value) { return leaf(std::move(value), false); }

    const Ten& val(Var v) const { return nodes_[size_t(v.id)].value; }
    Ten& val(Var v) { return nodes_[size_t(v.id)].value; }

    /// Gradient of a node; zero tensor if it never received contributions.
    const Ten& grad(Var v) {
        ensure_grad(v.id);
        return nodes_[size_t(v.id)].grad;
    }

    bool requires_grad(Var v) const { return nodes_[size_t(v.id)].requires_grad; }

    void backward(Var loss) {
        if (val(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
        ensure_grad(loss.id);
        nodes_[size_t(loss.id)].grad.v[0] = T(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[size_t(i)];
            if (n.backward && n.grad.numel() > 0) n.backward(*this, n.grad);
        }
    }

    // -- elementwise ---------------------------------------------------------

    Var add(Var a, Var b) {
        check_same_shape(val(a), val(b), "add");
        Ten out = val(a);
        const Ten& vb = val(b);
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, const Ten& g) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
    }

    Var scale(Var a, T s) {
        Ten out = val(a);
        for (auto& x : out.v) x *= s;
        return make(std::move(out), {a}, [a, s](Tape& t, const Ten& g) {
            if (!t.wants(a)) return;
            Ten& ga = t.grad_ref(a);
            for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * s;
        });
    }

    Var gelu(Var a) {
        Ten out = val(a);
        for (auto& x : out.v) x = gelu_scalar(x);
        return make(std::move(out), {a}, [a](Tape& t, const Ten& g) {
            if (!t.wants(a)) return;
            const Ten& x = t.val(a);
            Ten& ga = t.grad_ref(a);
            for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * gelu_grad_scalar(x[i]);
        });
    }

    Var reshape(Var a, std::vector<int> shape) {
        if (Ten::count(shape) != val(a).numel()) throw std::invalid_argument("reshape: numel mismatch");
        Ten out = val(a);
        out.shape = shape;
        return make(std::move(out), {a}, [a](Tape& t, const Ten& g) {
            if (!t.wants(a)) return;
            Ten& ga = t.grad_ref(a);
            for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        });
    }

    // -- linear algebra ------------------------------------------------------

    /// x[..., n] * w[n, m] + b[m]
    Var linear(Var x, Var w, Var b) {
        const Ten& xv = val(x);
        const Ten& wv = val(w);
        const Ten& bv = val(b);
        if (wv.ndim() != 2 || bv.ndim() != 1 || bv.dim(0) != wv.dim(1))
            throw std::invalid_argument("linear: bad parameter shapes");
        const int n = xv.shape.back();
        if (n != wv.dim(0)) throw std::invalid_argument("linear: input width " + std::to_string(n) +
                                                        " does not match weight " + wv.shape_str());
        const int m = wv.dim(1);
        const std::int64_t rows = xv.numel() / n;
        std::vector<int> oshape = xv.shape;
        oshape.back() = m;
        Ten out(oshape);
        gemm(int(rows), m, n, xv.data(), wv.data(), out.data(), false);
        for (std::int64_t r = 0; r < rows; ++r) {
            T* y = out.data() + r * m;
            for (int j = 0; j < m; ++j) y[j] += bv[j];
        }
        return make(std::move(out), {x, w, b}, [x, w, b, rows, n, m](Tape& t, const Ten& g) {
            const Ten& xv = t.val(x);
            const Ten& wv = t.val(w);
            if (t.wants(w)) gemm_tn(n, m, int(rows), xv.data(), g.data(), t.grad_ref(w).data(), true);
            if (t.wants(b)) {
                Ten& gb = t.grad_ref(b);
                for (std::int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < m; ++j) gb[j] += g[r * m + j];
            }
            if (t.wants(x)) gemm_nt(int(rows), n, m, g.data(), wv.data(), t.grad_ref(x).data(), true);
        });
    }

    /// Zero-padded same convolution, NHWC; x rank 3 [H,W,C] or 4 [B,H,W,C],
    /// w [k,k,Cin,Cout], stride 1 or 2 (output spatial size ceil(len/stride)).
    Var conv2d(Var x, Var w, Var b, int stride = 1) {
        const Ten& xv = val(x);
        const Ten& wv = val(w);
        const Ten& bv = val(b);
        if (wv.ndim() != 4 || wv.dim(0) != wv.dim(1)) throw std::invalid_argument("conv2d: bad kernel shape");
        const int k = wv.dim(0);
        if (k % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd");
        const bool batched = xv.ndim() == 4;
        if (!batched && xv.ndim() != 3) throw std::invalid_argument("conv2d: input must be rank 3 or 4");
        const int B = batched ? xv.dim(0) : 1;
        const int H = xv.dim(batched ? 1 : 0), W = xv.dim(batched ? 2 : 1), Cin = xv.dim(batched ? 3 : 2);
        const int Cout = wv.dim(3);
        if (wv.dim(2) != Cin)
            throw std::invalid_argument("conv2d: kernel channels " + wv.shape_str() + " do not match input " +
                                        xv.shape_str());
        if (bv.numel() != Cout) throw std::invalid_argument("conv2d: bias size mismatch");
        const int Ho = conv_out_len(H, stride), Wo = conv_out_len(W, stride);
        Ten out(batched ? std::vector<int>{B, Ho, Wo, Cout} : std::vector<int>{Ho, Wo, Cout});
        conv2d_forward(xv.data(), B, H, W, Cin, wv.data(), k, Cout, bv.data(), stride, out.data());
        return make(std::move(out), {x, w, b},
                    [x, w, b, B, H, W, Cin, k, Cout, stride](Tape& t, const Ten& g) {
                        const Ten& xv = t.val(x);
                        const Ten& wv = t.val(w);
                        const bool wx = t.wants(x), ww = t.wants(w), wb = t.wants(b);
                        if (!wx && !ww && !wb) return;
                        // conv2d_backward accumulates into all three slots.
                        Ten dummy_w(wv.shape), dummy_b({Cout});
                        T* gw = ww ? t.grad_ref(w).data() : dummy_w.data();
                        T* gb = wb ? t.grad_ref(b).data() : dummy_b.data();
                        T* gx = wx ? t.grad_ref(x).data() : nullptr;
                        conv2d_backward(xv.data(), B, H, W, Cin, wv.data(), k, Cout, stride, g.data(), gx, gw, gb);
                    });
    }

    /// x[B,H,W,C] + v[B,C] broadcast over every pixel.
    Var add_channel_bias(Var x, Var v) {
        const Ten& xv = val(x);
        const Ten& vv = val(v);
        if (xv.ndim() != 4 || vv.ndim() != 2 || xv.dim(0) != vv.dim(0) || xv.dim(3) != vv.dim(1))
            throw std::invalid_argument("add_channel_bias: shape mismatch");
        const int B = xv.dim(0), HW = xv.dim(1) * xv.dim(2), C = xv.dim(3);
        Ten out = xv;
        for (int bb = 0; bb < B; ++bb) {
            const T* vb = vv.data() + std::int64_t(bb) * C;
            T* o = out.data() + std::int64_t(bb) * HW * C;
            for (int p = 0; p < HW; ++p)
                for (int c = 0; c < C; ++c) o[std::int64_t(p) * C + c] += vb[c];
        }
        return make(std::move(out), {x, v}, [x, v, B, HW, C](Tape& t, const Ten& g) {
            t.accumulate(x, g);
            if (!t.wants(v)) return;
            Ten& gv = t.grad_ref(v);
            for (int bb = 0; bb < B; ++bb) {
                const T* gb = g.data() + std::int64_t(bb) * HW * C;
                T* o = gv.data() + std::int64_t(bb) * C;
                for (int p = 0; p < HW; ++p)
                    for (int c = 0; c < C; ++c) o[c] += gb[std::int64_t(p) * C + c];
            }
        });
    }

    /// Concatenation along the channel (last) axis of rank-4 tensors.
    Var concat_channels(Var a, Var b) {
        const Ten& av = val(a);
        const Ten& bv = val(b);
        if (av.ndim() != 4 || bv.ndim() != 4 || av.dim(0) != bv.dim(0) || av.dim(1) != bv.dim(1) ||
            av.dim(2) != bv.dim(2))
            throw std::invalid_argument("concat_channels: shape mismatch");
        const std::int64_t rows = std::int64_t(av.dim(0)) * av.dim(1) * av.dim(2);
        const int ca = av.dim(3), cb = bv.dim(3);
        Ten out({av.dim(0), av.dim(1), av.dim(2), ca + cb});
        for (std::int64_t r = 0; r < rows; ++r) {
            T* o = out.data() + r * (ca + cb);
            const T* pa = av.data() + r * ca;
            const T* pb = bv.data() + r * cb;
            for (int c = 0; c < ca; ++c) o[c] = pa[c];
            for (int c = 0; c < cb; ++c) o[ca + c] = pb[c];
        }
        return make(std::move(out), {a, b}, [a, b, rows, ca, cb](Tape& t, const Ten& g) {
            if (t.wants(a)) {
                Ten& ga = t.grad_ref(a);
                for (std::int64_t r = 0; r < rows; ++r)
                    for (int c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
            }
            if (t.wants(b)) {
                Ten& gb = t.grad_ref(b);
                for (std::int64_t r = 0; r < rows; ++r)
                    for (int c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
            }
        });
    }

    /// Nearest-neighbor resize of x[B,h,w,C] to [B,Ht,Wt,C].
    Var upsample_nearest(Var x, int Ht, int Wt) {
        const Ten& xv = val(x);
        if (xv.ndim() != 4) throw std::invalid_argument("upsample_nearest: rank-4 input expected");
        const int B = xv.dim(0), h = xv.dim(1), w = xv.dim(2), C = xv.dim(3);
        Ten out({B, Ht, Wt, C});
        for (int bb = 0; bb < B; ++bb)
            for (int i = 0; i < Ht; ++i) {
                const int si = i * h / Ht;
                for (int j = 0; j < Wt; ++j) {
                    const int sj = j * w / Wt;
                    const T* src = xv.data() + ((std::int64_t(bb) * h + si) * w + sj) * C;
                    T* dst = out.data() + ((std::int64_t(bb) * Ht + i) * Wt + j) * C;
                    for (int c = 0; c < C; ++c) dst[c] = src[c];
                }
            }
        return make(std::move(out), {x}, [x, B, h, w, C, Ht, Wt](Tape& t, const Ten& g) {
            if (!t.wants(x)) return;
            Ten& gx = t.grad_ref(x);
            for (int bb = 0; bb < B; ++bb)
                for (int i = 0; i < Ht; ++i) {
                    const int si = i * h / Ht;
                    for (int j = 0; j < Wt; ++j) {
                        const int sj = j * w / Wt;
                        const T* src = g.data() + ((std::int64_t(bb) * Ht + i) * Wt + j) * C;
                        T* dst = gx.data() + ((std::int64_t(bb) * h + si) * w + sj) * C;
                        for (int c = 0; c < C; ++c) dst[c] += src[c];
                    }
                }
        });
    }

    /// Row lookup out[i, :] = table[rows[i], :]; backward scatter-adds.
    Var rows_gather(Var table, std::vector<int> rows) {
        const Ten& tv = val(table);
        if (tv.ndim() != 2) throw std::invalid_argument("rows_gather: table must be rank 2");
        const int D = tv.dim(1);
        Ten out({int(rows.size()), D});
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] < 0 || rows[i] >= tv.dim(0)) throw std::out_of_range("rows_gather: index out of range");
            const T* src = tv.data() + std::int64_t(rows[i]) * D;
            for (int c = 0; c < D; ++c) out[std::int64_t(i) * D + c] = src[c];
        }
        return make(std::move(out), {table}, [table, rows = std::move(rows), D](Tape& t, const Ten& g) {
            if (!t.wants(table)) return;
            Ten& gt = t.grad_ref(table);
            for (size_t i = 0; i < rows.size(); ++i) {
                T* dst = gt.data() + std::int64_t(rows[i]) * D;
                for (int c = 0; c < D; ++c) dst[c] += g[std::int64_t(i) * D + c];
            }
        });
    }

    /// Mean over the first axis of a rank-2 tensor: [L, D] -> [D].
    Var mean_rows(Var x) {
        const Ten& xv = val(x);
        if (xv.ndim() != 2) throw std::invalid_argument("mean_rows: rank-2 input expected");
        const int L = xv.dim(0), D = xv.dim(1);
        Ten out({D});
        for (int i = 0; i < L; ++i)
            for (int c = 0; c < D; ++c) out[c] += xv[std::int64_t(i) * D + c];
        for (int c = 0; c < D; ++c) out[c] /= T(L);
        return make(std::move(out), {x}, [x, L, D](Tape& t, const Ten& g) {
            if (!t.wants(x)) return;
            Ten& gx = t.grad_ref(x);
            for (int i = 0; i < L; ++i)
                for (int c = 0; c < D; ++c) gx[std::int64_t(i) * D + c] += g[c] / T(L);
        });
    }

    /// Layer normalization over the last axis with learned gain and bias.
    Var layernorm(Var x, Var gain, Var bias) {
        const Ten& xv = val(x);
        const int n = xv.shape.back();
        if (val(gain).numel() != n || val(bias).numel() != n)
            throw std::invalid_argument("layernorm: gain/bias size mismatch");
        const std::int64_t rows = xv.numel() / n;
        Ten out(xv.shape);
        auto mean = std::make_shared<std::vector<T>>(size_t(rows));
        auto rstd = std::make_shared<std::vector<T>>(size_t(rows));
        layernorm_forward(xv.data(), rows, n, val(gain).data(), val(bias).data(), out.data(), mean->data(),
                          rstd->data());
        return make(std::move(out), {x, gain, bias}, [x, gain, bias, rows, n, mean, rstd](Tape& t, const Ten& g) {
            const bool wx = t.wants(x), wg = t.wants(gain), wb = t.wants(bias);
            if (!wx && !wg && !wb) return;
            Ten dummy_x(t.val(x).shape);
            Ten dgain({n}), dbias({n});
            T* gx = wx ? t.grad_ref(x).data() : dummy_x.data();
            layernorm_backward(t.val(x).data(), rows, n, t.val(gain).data(), mean->data(), rstd->data(), g.data(), gx,
                               dgain.data(), dbias.data());
            if (wg) {
                Ten& gg = t.grad_ref(gain);
                for (int j = 0; j < n; ++j) gg[j] += dgain[j];
            }
            if (wb) {
                Ten& gb = t.grad_ref(bias);
                for (int j = 0; j < n; ++j) gb[j] += dbias[j];
            }
        });
    }

    // -- attention -----------------------------------------------------------

    struct MhaParams {
        Var wq, bq, wk, bk, wv, bv, wo, bo;
    };

    /// Fused multi-head scaled dot-product self-attention over x [L,C] or
    /// [B,L,C]. When key_mask is given (length L, nonzero = valid), logits of
    /// invalid keys are -inf, which is the dense ViT masking scheme.
    Var multi_head_attention(Var x, const MhaParams& p, int heads, const std::vector<std::uint8_t>* key_mask = nullptr) {
        const Ten& xv = val(x);
        const bool batched = xv.ndim() == 3;
        if (!batched && xv.ndim() != 2) throw std::invalid_argument("attention: input must be rank 2 or 3");
        const int B = batched ? xv.dim(0) : 1;
        const int L = xv.dim(batched ? 1 : 0);
        const int C = xv.dim(batched ? 2 : 1);
        if (C % heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
        if (key_mask && int(key_mask->size()) != L) throw std::invalid_argument("attention: mask length mismatch");
        const int dh = C / heads;
        const T inv_sqrt = T(1.0 / std::sqrt(double(dh)));

        Var q = linear(x, p.wq, p.bq);
        Var k = linear(x, p.wk, p.bk);
        Var v = linear(x, p.wv, p.bv);
        const bool needs_grad = requires_grad(q) || requires_grad(k) || requires_grad(v);

        // Split heads into contiguous [B, heads, L, dh] buffers.
        auto split = [&](const Ten& src) {
            Ten dst({B, heads, L, dh});
            for (int bb = 0; bb < B; ++bb)
                for (int i = 0; i < L; ++i)
                    for (int h = 0; h < heads; ++h) {
                        const T* s = src.data() + (std::int64_t(bb) * L + i) * C + h * dh;
                        T* d = dst.data() + ((std::int64_t(bb) * heads + h) * L + i) * dh;
                        for (int c = 0; c < dh; ++c) d[c] = s[c];
                    }
            return dst;
        };
        auto qs = std::make_shared<Ten>(split(val(q)));
        auto ks = std::make_shared<Ten>(split(val(k)));
        auto vs = std::make_shared<Ten>(split(val(v)));
        // Probabilities are materialized only when the backward pass needs
        // them; inference runs tiled with scores kept in cache.
        auto probs = std::make_shared<Ten>(needs_grad ? Ten({B, heads, L, L}) : Ten{});

        Ten merged(xv.shape);
        constexpr int kRowTile = 128;
#pragma omp parallel for schedule(static)
        for (int bh = 0; bh < B * heads; ++bh) {
            const int bb = bh / heads, h = bh % heads;
            const T* Q = qs->data() + (std::int64_t(bh) * L) * dh;
            const T* K = ks->data() + (std::int64_t(bh) * L) * dh;
            const T* V = vs->data() + (std::int64_t(bh) * L) * dh;
            // K and V transposed to [dh, L] so both score and output GEMMs
            // stream contiguously.
            std::vector<T> kt(size_t(dh) * L), vt(size_t(dh) * L);
            for (int i = 0; i < L; ++i)
                for (int c = 0; c < dh; ++c) {
                    kt[size_t(c) * L + i] = K[std::int64_t(i) * dh + c];
                    vt[size_t(c) * L + i] = V[std::int64_t(i) * dh + c];
                }
            // Row tile of probabilities; stays in cache on the inference path.
            std::vector<T> tile(needs_grad ? 0 : size_t(std::min(kRowTile, L)) * L);
            std::vector<T> oht(size_t(dh) * kRowTile);
            for (int i0 = 0; i0 < L; i0 += kRowTile) {
                const int rows = std::min(kRowTile, L - i0);
                T* S = needs_grad ? probs->data() + (std::int64_t(bh) * L + i0) * L : tile.data();
                gemm(rows, L, dh, Q + std::int64_t(i0) * dh, kt.data(), S, false);
                for (std::int64_t i = 0; i < std::int64_t(rows) * L; ++i) S[i] *= inv_sqrt;
                if (key_mask)
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < L; ++j)
                            if (!(*key_mask)[size_t(j)])
                                S[std::int64_t(i) * L + j] = -std::numeric_limits<T>::infinity();
                softmax_rows(S, rows, L);
                // oht[dh, rows] = V^T * S^T, then scatter into merged.
                gemm_nt(dh, rows, L, vt.data(), S, oht.data(), false);
                for (int i = 0; i < rows; ++i) {
                    T* d = merged.data() + (std::int64_t(bb) * L + i0 + i) * C + h * dh;
                    for (int c = 0; c < dh; ++c) d[c] = oht[size_t(c) * size_t(rows) + size_t(i)];
                }
            }
        }

        Var merged_var = make(std::move(merged), {q, k, v},
                              [q, k, v, qs, ks, vs, probs, B, L, C, heads, dh, inv_sqrt](Tape& t, const Ten& g) {
            const bool wq = t.wants(q), wk = t.wants(k), wv = t.wants(v);
            if (!wq && !wk && !wv) return;
            Ten gq({B, L, C}), gk({B, L, C}), gv({B, L, C});
#pragma omp parallel for schedule(static)
            for (int bh = 0; bh < B * heads; ++bh) {
                const int bb = bh / heads, h = bh % heads;
                std::vector<T> goh(size_t(L) * dh), dP(size_t(L) * L), dS(size_t(L) * L);
                std::vector<T> dQh(size_t(L) * dh), dKh(size_t(L) * dh), dVh(size_t(L) * dh);
                const T* Q = qs->data() + ((std::int64_t(bb) * heads + h) * L) * dh;
                const T* K = ks->data() + ((std::int64_t(bb) * heads + h) * L) * dh;
                const T* V = vs->data() + ((std::int64_t(bb) * heads + h) * L) * dh;
                const T* P = probs->data() + ((std::int64_t(bb) * heads + h) * L) * L;
                for (int i = 0; i < L; ++i) {
                    const T* s = g.data() + (std::int64_t(bb) * L + i) * C + h * dh;
                    for (int c = 0; c < dh; ++c) goh[size_t(i) * dh + c] = s[c];
                }
                // dV = P^T * gO ; dP = gO * V^T
                gemm_tn(L, dh, L, P, goh.data(), dVh.data(), false);
                gemm_nt(L, L, dh, goh.data(), V, dP.data(), false);
                // softmax backward: dS = P .* (dP - rowsum(dP .* P))
                for (int i = 0; i < L; ++i) {
                    T dot = T(0);
                    for (int j = 0; j < L; ++j) dot += dP[size_t(i) * L + j] * P[size_t(i) * L + j];
                    for (int j = 0; j < L; ++j)
                        dS[size_t(i) * L + j] = P[size_t(i) * L + j] * (dP[size_t(i) * L + j] - dot) * inv_sqrt;
                }
                gemm(L, dh, L, dS.data(), K, dQh.data(), false);
                gemm_tn(L, dh, L, dS.data(), Q, dKh.data(), false);
                auto merge_into = [&](Ten& dst, const std::vector<T>& src) {
                    for (int i = 0; i < L; ++i) {
                        T* d = dst.data() + (std::int64_t(bb) * L + i) * C + h * dh;
                        for (int c = 0; c < dh; ++c) d[c] += src[size_t(i) * dh + c];
                    }
                };
                merge_into(gq, dQh);
                merge_into(gk, dKh);
                merge_into(gv, dVh);
            }
            if (!t.val(q).same_shape(gq)) {  // rank-2 input
                gq.shape = t.val(q).shape;
                gk.shape = t.val(k).shape;
                gv.shape = t.val(v).shape;
            }
            if (wq) t.accumulate(q, gq);
            if (wk) t.accumulate(k, gk);
            if (wv) t.accumulate(v, gv);
        });
        return linear(merged_var, p.wo, p.bo);
    }

    // -- losses ---------------------------------------------------------------

    /// Mean squared error against a constant target; returns a scalar node.
    Var mse(Var pred, const Ten& target) {
        const Ten& pv = val(pred);
        check_same_shape(pv, target, "mse");
        double acc = 0.0;
        for (std::int64_t i = 0; i < pv.numel(); ++i) {
            const double d = double(pv[i]) - double(target[i]);
            acc += d * d;
        }
        Ten out({1});
        out[0] = T(acc / double(pv.numel()));
        auto tgt = std::make_shared<Ten>(target);
        return make(std::move(out), {pred}, [pred, tgt](Tape& t, const Ten& g) {
            if (!t.wants(pred)) return;
            const Ten& pv = t.val(pred);
            Ten& gp = t.grad_ref(pred);
            const T s = g[0] * T(2) / T(pv.numel());
            for (std::int64_t i = 0; i < pv.numel(); ++i) gp[i] += s * (pv[i] - (*tgt)[i]);
        });
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Ten value;
        Ten grad;
        std::function<void(Tape&, const Ten&)> backward;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;

    bool wants(Var v) const { return nodes_[size_t(v.id)].requires_grad; }

    void ensure_grad(int id) {
        Node& n = nodes_[size_t(id)];
        if (n.grad.numel() == 0) n.grad = Ten(n.value.shape);
    }

    Ten& grad_ref(Var v) {
        ensure_grad(v.id);
        return nodes_[size_t(v.id)].grad;
    }

    void accumulate(Var v, const Ten& g) {
        if (!wants(v)) return;
        Ten& dst = grad_ref(v);
        for (std::int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

    Var make(Ten value, std::initializer_list<Var> parents, std::function<void(Tape&, const Ten&)> bw) {
        bool rg = false;
        for (Var p : parents) rg = rg || nodes_[size_t(p.id)].requires_grad;
        nodes_.push_back(Node{std::move(value), Ten{}, rg ? std::move(bw) : nullptr, rg});
        return Var{int(nodes_.size()) - 1};
    }
};

}  // namespace dot
