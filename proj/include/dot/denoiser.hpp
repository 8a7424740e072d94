#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dot/nn.hpp"
#include "dot/params.hpp"
#include "dot/tape.hpp"
#include "dot/tensor.hpp"

namespace dot {

struct DenoiserConfig {
    int l_d = 3;             // down/up block count
    int d = 128;             // condition embedding width
    int base_channels = 32;  // channels after the stem conv
    int heads = 4;

    void validate() const {
        if (l_d < 1) throw std::invalid_argument("denoiser: L_D must be >= 1");
        if (d < 2 || d % 2 != 0) throw std::invalid_argument("denoiser: d must be even and positive");
        if (base_channels < 8) throw std::invalid_argument("denoiser: base_channels must be >= 8");
        if (base_channels % heads != 0) throw std::invalid_argument("denoiser: base_channels must divide by heads");
    }
};

/// The conditioned PiT denoiser eps_theta(X_n, n, odt): a Unet whose
/// down/up blocks are pairs of ODT-conditioned convolutions (OCConv) with a
/// pixel-token attention module, plus stride-2 / nearest-resize sampling.
/// The condition vector PE(n) + FC_OD(odt) is computed once per forward and
/// fed to every OCConv through its own FC_Cond.
template <class T>
class DenoiserT {
public:
    using Ten = TensorT<T>;

    DenoiserT(DenoiserConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
        cfg_.validate();
        SeededRng rng(init_seed);
        auto conv = [&](const std::string& name, int k, int cin, int cout) {
            store_.add(name + ".w", glorot_uniform<T>({k, k, cin, cout}, k * k * cin, k * k * cout, rng));
            store_.add(name + ".b", Ten({cout}));
        };
        // Residual-branch closing layers start at zero so every block is the
        // identity-like residual path at initialization; activations stay at
        // unit scale through the depth and the first predicted noise is 0.
        auto conv_zero = [&](const std::string& name, int k, int cin, int cout) {
            store_.add(name + ".w", Ten({k, k, cin, cout}));
            store_.add(name + ".b", Ten({cout}));
        };
        auto fc = [&](const std::string& name, int in, int out) {
            store_.add(name + ".w", glorot_uniform<T>({in, out}, in, out, rng));
            store_.add(name + ".b", Ten({out}));
        };
        auto attn = [&](const std::string& name, int width) {
            fc(name + ".q", width, width);
            fc(name + ".k", width, width);
            fc(name + ".v", width, width);
            store_.add(name + ".o.w", Ten({width, width}));
            store_.add(name + ".o.b", Ten({width}));
        };
        auto occonv = [&](const std::string& name, int cin, int cout) {
            conv(name + ".conv1", 3, cin, cin);
            fc(name + ".cond", cfg_.d, cin);
            conv(name + ".conv2", 3, cin, cout);
            conv_zero(name + ".conv3", 3, cout, cout);
            conv(name + ".res", 1, cin, cout);
        };

        fc("fc_od", 5, cfg_.d);
        conv("stem", 3, 3, cfg_.base_channels);
        for (int k = 0; k < cfg_.l_d; ++k) {
            const int cin = channels(k), cout = channels(k + 1);
            const std::string p = "down" + std::to_string(k);
            occonv(p + ".oc1", cin, cout);
            occonv(p + ".oc2", cout, cout);
            attn(p + ".attn", cout);
            conv(p + ".down", 3, cout, cout);
        }
        const int cm = channels(cfg_.l_d);
        occonv("mid.oc1", cm, cm);
        attn("mid.attn", cm);
        occonv("mid.oc2", cm, cm);
        for (int k = cfg_.l_d - 1; k >= 0; --k) {
            const int cskip = channels(k + 1), cout = channels(k);
            const std::string p = "up" + std::to_string(k);
            conv(p + ".up", 3, cskip, cskip);
            occonv(p + ".oc1", 2 * cskip, cout);
            occonv(p + ".oc2", cout, cout);
            attn(p + ".attn", cout);
        }
        conv_zero("head", 3, cfg_.base_channels, 3);
    }

    const DenoiserConfig& config() const { return cfg_; }
    ParamStoreT<T>& store() { return store_; }
    const ParamStoreT<T>& store() const { return store_; }

    int channels(int level) const { return cfg_.base_channels << level; }

    /// PE(n) + FC_OD(odt): the shared condition embedding.
    Ten encode_condition(const Ten& odt_encoded, int n) {
        Tape<T> tape;
        Ten odt = odt_encoded;
        if (odt.ndim() == 1) odt.shape = {1, odt.dim(0)};
        std::vector<int> steps(size_t(odt.dim(0)), n);
        Ten out = tape.val(condition_var(tape, odt, steps, false));
        if (odt_encoded.ndim() == 1) out.shape = {cfg_.d};
        return out;
    }

    /// Denoiser forward: xn [B, L, L, 3] -> predicted noise of the same
    /// shape. steps holds the per-sample 1-based diffusion step.
    Var forward(Tape<T>& tape, Var xn, const std::vector<int>& steps, const Ten& odt, bool train) {
        bound_.clear();
        encode_count_ = 0;
        const Ten& xv = tape.val(xn);
        if (xv.ndim() != 4 || xv.dim(3) != 3) throw std::invalid_argument("denoiser: input must be [B,L,L,3]");
        if (int(steps.size()) != xv.dim(0) || odt.dim(0) != xv.dim(0))
            throw std::invalid_argument("denoiser: batch size mismatch");

        Var cond = condition_var(tape, odt, steps, train);

        Var h = tape.conv2d(xn, bind(tape, "stem.w", train), bind(tape, "stem.b", train));
        std::vector<Var> skips;
        std::vector<std::pair<int, int>> sizes;
        for (int k = 0; k < cfg_.l_d; ++k) {
            const std::string p = "down" + std::to_string(k);
            h = occonv_var(tape, h, cond, p + ".oc1", train);
            h = occonv_var(tape, h, cond, p + ".oc2", train);
            h = attention_var(tape, h, p + ".attn", train);
            skips.push_back(h);
            sizes.push_back({tape.val(h).dim(1), tape.val(h).dim(2)});
            h = tape.conv2d(h, bind(tape, p + ".down.w", train), bind(tape, p + ".down.b", train), 2);
        }
        h = occonv_var(tape, h, cond, "mid.oc1", train);
        h = attention_var(tape, h, "mid.attn", train);
        h = occonv_var(tape, h, cond, "mid.oc2", train);
        for (int k = cfg_.l_d - 1; k >= 0; --k) {
            const std::string p = "up" + std::to_string(k);
            h = tape.upsample_nearest(h, sizes[size_t(k)].first, sizes[size_t(k)].second);
            h = tape.conv2d(h, bind(tape, p + ".up.w", train), bind(tape, p + ".up.b", train));
            h = tape.concat_channels(h, skips[size_t(k)]);
            h = occonv_var(tape, h, cond, p + ".oc1", train);
            h = occonv_var(tape, h, cond, p + ".oc2", train);
            h = attention_var(tape, h, p + ".attn", train);
        }
        h = tape.conv2d(h, bind(tape, "head.w", train), bind(tape, "head.b", train));
        if (!tape.val(h).all_finite()) throw std::runtime_error("denoiser: non-finite activations");
        return h;
    }

    void harvest_grads(Tape<T>& tape) {
        for (auto& [name, var] : bound_) store_.accumulate_grad(name, tape.grad(var));
    }

    /// Number of condition encodings in the last forward; the contract is
    /// exactly one per pass.
    int encode_count() const { return encode_count_; }

    /// OCConv as a standalone operation: x [L,L,Cin] (or [B,L,L,Cin]) with a
    /// condition vector [d] (or [B,d]) through the named block.
    Ten occonv(const Ten& x, const Ten& cond, const std::string& prefix) {
        Tape<T> tape;
        Ten xb = x, cb = cond;
        const bool batched = x.ndim() == 4;
        if (!batched) xb.shape.insert(xb.shape.begin(), 1);
        if (cb.ndim() == 1) cb.shape = {1, cb.dim(0)};
        Var out = occonv_var(tape, tape.constant(std::move(xb)), tape.constant(std::move(cb)), prefix, false);
        Ten result = tape.val(out);
        if (!batched) result.shape.erase(result.shape.begin());
        return result;
    }

    /// Tape-level OCConv through the named block (used by the gradient
    /// suite as well as the forward pass).
    Var occonv_var(Tape<T>& tape, Var x, Var cond, const std::string& p, bool train) {
        Var hid = tape.conv2d(x, bind(tape, p + ".conv1.w", train), bind(tape, p + ".conv1.b", train));
        Var cvec = tape.linear(cond, bind(tape, p + ".cond.w", train), bind(tape, p + ".cond.b", train));
        Var conditioned = tape.add_channel_bias(hid, cvec);
        Var mid = tape.gelu(tape.conv2d(conditioned, bind(tape, p + ".conv2.w", train), bind(tape, p + ".conv2.b", train)));
        Var out = tape.conv2d(mid, bind(tape, p + ".conv3.w", train), bind(tape, p + ".conv3.b", train));
        Var res = tape.conv2d(x, bind(tape, p + ".res.w", train), bind(tape, p + ".res.b", train));
        return tape.add(out, res);
    }

private:
    DenoiserConfig cfg_;
    ParamStoreT<T> store_;
    std::vector<std::pair<std::string, Var>> bound_;
    int encode_count_ = 0;

    Var bind(Tape<T>& tape, const std::string& name, bool train) {
        Var v = tape.leaf(store_.at(name), train);
        if (train) bound_.push_back({name, v});
        return v;
    }

    Var condition_var(Tape<T>& tape, const Ten& odt, const std::vector<int>& steps, bool train) {
        ++encode_count_;
        const int B = odt.dim(0);
        Ten pe({B, cfg_.d});
        for (int b = 0; b < B; ++b) {
            Ten row = positional_encoding<T>(steps[size_t(b)], cfg_.d);
            for (int i = 0; i < cfg_.d; ++i) pe.at(b, i) = row[i];
        }
        Var fc = tape.linear(tape.constant(odt), bind(tape, "fc_od.w", train), bind(tape, "fc_od.b", train));
        return tape.add(tape.constant(std::move(pe)), fc);
    }

    Var attention_var(Tape<T>& tape, Var x, const std::string& p, bool train) {
        const Ten& xv = tape.val(x);
        const int B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), C = xv.dim(3);
        Var tokens = tape.reshape(x, {B, H * W, C});
        typename Tape<T>::MhaParams mp{bind(tape, p + ".q.w", train), bind(tape, p + ".q.b", train),
                                       bind(tape, p + ".k.w", train), bind(tape, p + ".k.b", train),
                                       bind(tape, p + ".v.w", train), bind(tape, p + ".v.b", train),
                                       bind(tape, p + ".o.w", train), bind(tape, p + ".o.b", train)};
        Var att = tape.multi_head_attention(tokens, mp, cfg_.heads);
        return tape.add(x, tape.reshape(att, {B, H, W, C}));
    }
};

using Denoiser = DenoiserT<float>;

}  // namespace dot
