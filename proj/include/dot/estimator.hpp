#pragma once

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "dot/geo.hpp"
#include "dot/nn.hpp"
#include "dot/params.hpp"
#include "dot/tape.hpp"
#include "dot/tensor.hpp"

namespace dot {

struct MViTConfig {
    int l_g = 20;
    int d_e = 128;
    int l_e = 2;
    int heads = 4;

    void validate() const {
        if (l_g < 2) throw std::invalid_argument("estimator: L_G must be >= 2");
        if (d_e < 2 || d_e % 2 != 0) throw std::invalid_argument("estimator: d_E must be even and positive");
        if (l_e < 1) throw std::invalid_argument("estimator: L_E must be >= 1");
        if (d_e % heads != 0) throw std::invalid_argument("estimator: d_E must divide by heads");
    }
};

/// PiT flattened to the x + (y-1)*L_G item order, with the validity mask
/// X[x,y,1] >= 0.
struct FlatPiT {
    int l_g = 0;
    std::vector<double> items;       // L_G^2 x 3, contiguous per item
    std::vector<std::uint8_t> mask;  // 1 = valid

    int valid_count() const {
        int n = 0;
        for (auto m : mask) n += m ? 1 : 0;
        return n;
    }
};

inline FlatPiT flatten_pit(const PiT& pit) {
    FlatPiT f;
    f.l_g = pit.l_g;
    f.items = pit.v;  // PiT storage is already in flatten order
    f.mask.resize(size_t(pit.cells()));
    for (std::int64_t p = 0; p < pit.cells(); ++p) f.mask[size_t(p)] = pit.v[size_t(p) * 3] >= 0.0 ? 1 : 0;
    return f;
}

/// Stage-two model: cell/position/feature embedding, the Masked Vision
/// Transformer over valid items only, mean pooling and the regression head.
/// A dense ViT path over all L_G^2 items (invalid keys masked at -inf) is
/// kept for the efficiency benchmark; both paths produce the same estimate.
template <class T>
class MViTT {
public:
    using Ten = TensorT<T>;

    MViTT(MViTConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
        cfg_.validate();
        SeededRng rng(init_seed);
        const int d = cfg_.d_e;
        store_.add("E", Ten::randn({cfg_.l_g * cfg_.l_g, d}, rng, 0.02));
        add_fc("fc_st", 3, d, rng);
        for (int l = 0; l < cfg_.l_e; ++l) {
            const std::string p = "layer" + std::to_string(l);
            add_norm(p + ".ln1", d);
            add_fc(p + ".attn.q", d, d, rng);
            add_fc(p + ".attn.k", d, d, rng);
            add_fc(p + ".attn.v", d, d, rng);
            add_fc(p + ".attn.o", d, d, rng);
            add_norm(p + ".ln2", d);
            add_fc(p + ".ffn1", d, 4 * d, rng);
            add_fc(p + ".ffn2", 4 * d, d, rng);
        }
        add_fc("fc_pre", d, 1, rng);
        store_.add("norm.mu", Ten({1}));
        store_.add("norm.sigma", Ten::full({1}, T(1)));
    }

    const MViTConfig& config() const { return cfg_; }
    ParamStoreT<T>& store() { return store_; }
    const ParamStoreT<T>& store() const { return store_; }

    void set_target_norm(double mu, double sigma) {
        if (sigma <= 0.0) throw std::invalid_argument("estimator: sigma must be positive");
        store_.at("norm.mu")[0] = T(mu);
        store_.at("norm.sigma")[0] = T(sigma);
    }
    double target_mu() const { return double(store_.at("norm.mu")[0]); }
    double target_sigma() const { return double(store_.at("norm.sigma")[0]); }

    double normalize_minutes(double m) const { return (m - target_mu()) / target_sigma(); }
    double denormalize(double v) const { return target_mu() + target_sigma() * v; }

    /// Latent input vectors for the valid items:
    /// E[p] + PE(p) + FC_ST(channels), ordered by flattened position.
    Var embed_valid(Tape<T>& tape, const FlatPiT& flat, bool train) {
        std::vector<int> positions;  // 0-based row indices into E
        for (size_t p = 0; p < flat.mask.size(); ++p)
            if (flat.mask[p]) positions.push_back(int(p));
        if (positions.empty()) throw std::runtime_error("empty PiT");
        return embed_rows(tape, flat, positions, train);
    }

    /// Latent vectors for every item, valid or not (dense ViT path).
    Var embed_all(Tape<T>& tape, const FlatPiT& flat, bool train) {
        std::vector<int> positions(flat.mask.size());
        for (size_t p = 0; p < positions.size(); ++p) positions[p] = int(p);
        return embed_rows(tape, flat, positions, train);
    }

    /// MViT stack over an already-masked latent sequence; returns the
    /// normalized scalar prediction.
    Var head_normalized(Tape<T>& tape, Var x, bool train) {
        for (int l = 0; l < cfg_.l_e; ++l) x = layer_var(tape, x, l, train, nullptr);
        Var pooled = tape.mean_rows(x);
        return tape.linear(pooled, bind(tape, "fc_pre.w", train), bind(tape, "fc_pre.b", train));
    }

    /// Full masked path: flatten -> embed valid -> MViT -> minutes.
    double estimate_minutes(const FlatPiT& flat) {
        Tape<T> tape;
        bound_.clear();
        Var x = embed_valid(tape, flat, false);
        Var yn = head_normalized(tape, x, false);
        const double out = denormalize(double(tape.val(yn)[0]));
        if (!std::isfinite(out)) throw std::runtime_error("estimator: non-finite prediction");
        return out;
    }
    double estimate_minutes(const PiT& pit) { return estimate_minutes(flatten_pit(pit)); }

    /// Dense ViT benchmark path: all L_G^2 items flow through every layer,
    /// invalid keys are masked at -inf, pooling is over valid rows only.
    double estimate_minutes_dense(const FlatPiT& flat) {
        Tape<T> tape;
        bound_.clear();
        std::vector<int> valid;
        for (size_t p = 0; p < flat.mask.size(); ++p)
            if (flat.mask[p]) valid.push_back(int(p));
        if (valid.empty()) throw std::runtime_error("empty PiT");
        Var x = embed_all(tape, flat, false);
        for (int l = 0; l < cfg_.l_e; ++l) x = layer_var(tape, x, l, false, &flat.mask);
        Var pooled = tape.mean_rows(tape.rows_gather(x, valid));
        Var yn = tape.linear(pooled, bind(tape, "fc_pre.w", false), bind(tape, "fc_pre.b", false));
        return denormalize(double(tape.val(yn)[0]));
    }

    /// Tape entry point for training: normalized prediction for one sample.
    Var forward_normalized(Tape<T>& tape, const FlatPiT& flat, bool train) {
        Var x = embed_valid(tape, flat, train);
        return head_normalized(tape, x, train);
    }

    /// One pre-norm MViT layer over a latent sequence (exposed for the
    /// gradient suite).
    Var layer_var(Tape<T>& tape, Var x, int l, bool train, const std::vector<std::uint8_t>* key_mask) {
        const std::string p = "layer" + std::to_string(l);
        Var n1 = tape.layernorm(x, bind(tape, p + ".ln1.g", train), bind(tape, p + ".ln1.b", train));
        typename Tape<T>::MhaParams mp{bind(tape, p + ".attn.q.w", train), bind(tape, p + ".attn.q.b", train),
                                       bind(tape, p + ".attn.k.w", train), bind(tape, p + ".attn.k.b", train),
                                       bind(tape, p + ".attn.v.w", train), bind(tape, p + ".attn.v.b", train),
                                       bind(tape, p + ".attn.o.w", train), bind(tape, p + ".attn.o.b", train)};
        x = tape.add(x, tape.multi_head_attention(n1, mp, cfg_.heads, key_mask));
        Var n2 = tape.layernorm(x, bind(tape, p + ".ln2.g", train), bind(tape, p + ".ln2.b", train));
        Var h = tape.linear(n2, bind(tape, p + ".ffn1.w", train), bind(tape, p + ".ffn1.b", train));
        h = tape.gelu(h);
        h = tape.linear(h, bind(tape, p + ".ffn2.w", train), bind(tape, p + ".ffn2.b", train));
        return tape.add(x, h);
    }

    void begin_batch() { bound_.clear(); }
    void harvest_grads(Tape<T>& tape) {
        for (auto& [name, var] : bound_) store_.accumulate_grad(name, tape.grad(var));
        bound_.clear();
    }

private:
    MViTConfig cfg_;
    ParamStoreT<T> store_;
    std::vector<std::pair<std::string, Var>> bound_;

    void add_fc(const std::string& name, int in, int out, SeededRng& rng) {
        store_.add(name + ".w", glorot_uniform<T>({in, out}, in, out, rng));
        store_.add(name + ".b", Ten({out}));
    }
    void add_norm(const std::string& name, int d) {
        store_.add(name + ".g", Ten::full({d}, T(1)));
        store_.add(name + ".b", Ten({d}));
    }

    Var bind(Tape<T>& tape, const std::string& name, bool train) {
        Var v = tape.leaf(store_.at(name), train);
        if (train) bound_.push_back({name, v});
        return v;
    }

    Var embed_rows(Tape<T>& tape, const FlatPiT& flat, const std::vector<int>& positions, bool train) {
        const int d = cfg_.d_e;
        const int V = int(positions.size());
        Ten feats({V, 3});
        Ten pe({V, d});
        for (int i = 0; i < V; ++i) {
            const int p = positions[size_t(i)];
            for (int c = 0; c < 3; ++c) feats.at(i, c) = T(flat.items[size_t(p) * 3 + size_t(c)]);
            Ten row = positional_encoding<T>(p + 1, d);  // 1-based position
            for (int c = 0; c < d; ++c) pe.at(i, c) = row[c];
        }
        Var cell = tape.rows_gather(bind(tape, "E", train), positions);
        Var st = tape.linear(tape.constant(std::move(feats)), bind(tape, "fc_st.w", train), bind(tape, "fc_st.b", train));
        return tape.add(tape.add(cell, tape.constant(std::move(pe))), st);
    }

};

using MViT = MViTT<float>;

/// One gradient step on the estimator MSE over normalized travel times.
/// Samples whose PiT has no valid cell are skipped with a warning; returns
/// the mean squared error over the remaining samples.
template <class T, class Model>
double train_estimator_step(Model& model, const std::vector<const PiT*>& pits, const std::vector<double>& minutes,
                            AdamStateT<T>& adam, double lr) {
    if (pits.size() != minutes.size() || pits.empty())
        throw std::invalid_argument("train_estimator_step: bad batch");
    model.store().zero_grads();
    model.begin_batch();
    double loss_sum = 0.0;
    int used = 0;
    for (size_t i = 0; i < pits.size(); ++i) {
        FlatPiT flat = flatten_pit(*pits[i]);
        if (flat.valid_count() == 0) {
            std::cerr << "warning: skipping sample with empty PiT\n";
            continue;
        }
        Tape<T> tape;
        Var yn = model.forward_normalized(tape, flat, true);
        TensorT<T> target({1});
        target[0] = T(model.normalize_minutes(minutes[i]));
        Var loss = tape.mse(yn, target);
        loss_sum += double(tape.val(loss)[0]);
        tape.backward(loss);
        model.harvest_grads(tape);
        ++used;
    }
    if (used == 0) throw std::runtime_error("train_estimator_step: all samples empty");
    for (auto& [name, g] : model.store().grads)
        for (auto& v : g.v) v /= T(used);
    adam_step(model.store(), adam, lr);
    const double loss = loss_sum / double(used);
    if (!std::isfinite(loss)) throw std::runtime_error("diverged");
    return loss;
}

}  // namespace dot
