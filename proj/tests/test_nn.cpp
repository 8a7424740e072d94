#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dot/nn.hpp"
#include "dot/params.hpp"

using namespace dot;

TEST_CASE("conv2d_same with a 1x1 identity kernel is the identity") {
    Tensor64 x({4, 5, 1});
    SeededRng rng(1);
    for (auto& v : x.v) v = rng.uniform(-1, 1);
    Tensor64 w({1, 1, 1, 1});
    w[0] = 1.0;
    Tensor64 b({1});
    Tensor64 y = conv2d_same(x, w, b);
    REQUIRE(y.shape == x.shape);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("conv2d_same sums the zero-padded window") {
    Tensor64 x = Tensor64::full({2, 2, 1}, 1.0);
    Tensor64 w = Tensor64::full({3, 3, 1, 1}, 1.0);
    Tensor64 b({1});
    Tensor64 y = conv2d_same(x, w, b);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(4.0));
}

TEST_CASE("conv2d_same with a zero kernel broadcasts the bias") {
    Tensor64 x = Tensor64::full({3, 3, 2}, 0.7);
    Tensor64 w({3, 3, 2, 4});
    Tensor64 b({4});
    for (int c = 0; c < 4; ++c) b[c] = 0.5 + c;
    Tensor64 y = conv2d_same(x, w, b);
    for (int p = 0; p < 9; ++p)
        for (int c = 0; c < 4; ++c) CHECK(y[p * 4 + c] == doctest::Approx(0.5 + c));
}

TEST_CASE("linear computes xW + b over the last axis") {
    Tensor64 x({2});
    x[0] = 1.0;
    x[1] = 2.0;
    Tensor64 w({2, 2});
    w.at(0, 0) = 1.0;
    w.at(0, 1) = 0.0;
    w.at(1, 0) = 0.0;
    w.at(1, 1) = 2.0;
    Tensor64 b({2});
    b[0] = 1.0;
    b[1] = 1.0;
    Tensor64 y = linear(x, w, b);
    CHECK(y[0] == doctest::Approx(2.0));
    CHECK(y[1] == doctest::Approx(5.0));

    // Identity weights, zero bias.
    Tensor64 eye({2, 2});
    eye.at(0, 0) = eye.at(1, 1) = 1.0;
    Tensor64 zb({2});
    Tensor64 same = linear(x, eye, zb);
    CHECK(same[0] == doctest::Approx(1.0));
    CHECK(same[1] == doctest::Approx(2.0));

    // Zero weights broadcast the bias over leading axes.
    Tensor64 batch({3, 2});
    for (auto& v : batch.v) v = 9.0;
    Tensor64 zero_w({2, 2});
    Tensor64 out = linear(batch, zero_w, b);
    for (int r = 0; r < 3; ++r) {
        CHECK(out.at(r, 0) == doctest::Approx(1.0));
        CHECK(out.at(r, 1) == doctest::Approx(1.0));
    }

    CHECK_THROWS_AS(linear(x, Tensor64({3, 2}), b), std::invalid_argument);
}

TEST_CASE("gelu uses the exact Gaussian CDF") {
    Tensor64 x({3});
    x[0] = 0.0;
    x[1] = 1.0;
    x[2] = -10.0;
    Tensor64 y = gelu(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(0.84134).epsilon(1e-5));
    CHECK(std::abs(y[2]) < 1e-8);
}

TEST_CASE("positional encoding matches the definition") {
    // n = 0: odd slots cos(0) = 1, even slots sin(0) = 0 (1-based slots).
    Tensor64 p0 = positional_encoding<double>(0, 8);
    for (int i = 0; i < 8; i += 2) {
        CHECK(p0[i] == doctest::Approx(1.0));
        CHECK(p0[i + 1] == doctest::Approx(0.0));
    }

    Tensor64 p1 = positional_encoding<double>(1, 4);
    CHECK(p1[0] == doctest::Approx(std::cos(0.01)).epsilon(1e-12));
    CHECK(p1[1] == doctest::Approx(std::sin(0.01)).epsilon(1e-12));
    CHECK(p1[2] == doctest::Approx(std::cos(0.0001)).epsilon(1e-12));
    CHECK(p1[3] == doctest::Approx(std::sin(0.0001)).epsilon(1e-12));

    SeededRng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor64 p = positional_encoding<double>(int(rng.uniform_int(0, 5000)), 2 * int(rng.uniform_int(1, 64)));
        for (auto v : p.v) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK_THROWS_AS(positional_encoding<double>(1, 5), std::invalid_argument);
}

TEST_CASE("positional encodings are pairwise distinct") {
    const int d = 128;
    std::vector<Tensor64> pes;
    for (int n = 1; n <= 100; ++n) pes.push_back(positional_encoding<double>(n, d));
    double min_gap = 1e30;
    for (size_t a = 0; a < pes.size(); ++a)
        for (size_t b = a + 1; b < pes.size(); ++b) {
            double gap = 0.0;
            for (int i = 0; i < d; ++i) gap = std::max(gap, std::abs(pes[a][i] - pes[b][i]));
            min_gap = std::min(min_gap, gap);
        }
    CHECK(min_gap > 1e-6);
}

TEST_CASE("multi-head attention on a single item reduces to projections") {
    SeededRng rng(5);
    MhaWeights<double> w = MhaWeights<double>::glorot(8, rng);
    Tensor64 x({1, 8});
    for (auto& v : x.v) v = rng.uniform(-1, 1);
    Tensor64 y = multi_head_attention(x, w, 2);
    // softmax over one item is 1, so out = (x Wv + bv) Wo + bo.
    Tensor64 v = linear(x, w.wv, w.bv);
    Tensor64 expect = linear(v, w.wo, w.bo);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("two identical items attend equally and produce equal outputs") {
    SeededRng rng(6);
    MhaWeights<double> w = MhaWeights<double>::glorot(8, rng);
    Tensor64 x({2, 8});
    for (int c = 0; c < 8; ++c) x.at(0, c) = x.at(1, c) = rng.uniform(-1, 1);
    Tensor64 y = multi_head_attention(x, w, 2);
    for (int c = 0; c < 8; ++c) CHECK(y.at(0, c) == doctest::Approx(y.at(1, c)).epsilon(1e-12));
}

namespace {

// Single-loop O(L^2) attention oracle, independent of the GEMM path.
Tensor64 naive_attention(const Tensor64& x, const MhaWeights<double>& w, int heads) {
    const int L = x.dim(0), C = x.dim(1), dh = C / heads;
    Tensor64 q = linear(x, w.wq, w.bq);
    Tensor64 k = linear(x, w.wk, w.bk);
    Tensor64 v = linear(x, w.wv, w.bv);
    Tensor64 merged({L, C});
    for (int h = 0; h < heads; ++h)
        for (int i = 0; i < L; ++i) {
            std::vector<double> logits(size_t(L), 0.0);
            for (int j = 0; j < L; ++j) {
                double dot = 0.0;
                for (int c = 0; c < dh; ++c) dot += q.at(i, h * dh + c) * k.at(j, h * dh + c);
                logits[size_t(j)] = dot / std::sqrt(double(dh));
            }
            double mx = logits[0];
            for (double l : logits) mx = std::max(mx, l);
            double z = 0.0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                z += l;
            }
            double wsum = 0.0;
            for (auto& l : logits) {
                l /= z;
                CHECK(l >= 0.0);
                wsum += l;
            }
            CHECK(wsum == doctest::Approx(1.0).epsilon(1e-6));
            for (int c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (int j = 0; j < L; ++j) acc += logits[size_t(j)] * v.at(j, h * dh + c);
                merged.at(i, h * dh + c) = acc;
            }
        }
    return linear(merged, w.wo, w.bo);
}

}  // namespace

TEST_CASE("attention matches the naive oracle") {
    SeededRng rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        MhaWeights<double> w = MhaWeights<double>::glorot(8, rng);
        Tensor64 x({6, 8});
        for (auto& v : x.v) v = rng.uniform(-1, 1);
        Tensor64 got = multi_head_attention(x, w, 2);
        Tensor64 expect = naive_attention(x, w, 2);
        for (std::int64_t i = 0; i < got.numel(); ++i)
            CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-6));
    }
    MhaWeights<double> w = MhaWeights<double>::glorot(8, rng);
    Tensor64 x({4, 8});
    CHECK_THROWS_AS(multi_head_attention(x, w, 3), std::invalid_argument);
}

TEST_CASE("forward ops are deterministic") {
    SeededRng rng(9);
    MhaWeights<double> w = MhaWeights<double>::glorot(16, rng);
    Tensor64 x({5, 16});
    for (auto& v : x.v) v = rng.uniform(-1, 1);
    Tensor64 a = multi_head_attention(x, w, 4);
    Tensor64 b = multi_head_attention(x, w, 4);
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
    ParamStoreT<double> store;
    store.add("p", Tensor64::full({3}, 1.5));
    store.zero_grads();
    AdamStateT<double> adam;
    adam_step(store, adam, 0.001);
    for (auto v : store.at("p").v) CHECK(v == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("one adam step moves a scalar by roughly lr") {
    ParamStoreT<double> store;
    store.add("p", Tensor64::full({1}, 1.0));
    store.zero_grads();
    Tensor64 g({1});
    g[0] = 0.5;
    store.accumulate_grad("p", g);
    AdamStateT<double> adam;
    adam_step(store, adam, 0.001);
    // m_hat = g, v_hat = g^2 -> update = lr * g / (|g| + eps) = lr.
    CHECK(store.at("p")[0] == doctest::Approx(0.999).epsilon(1e-6));
}

TEST_CASE("adam is deterministic and demands populated gradients") {
    auto run = [] {
        ParamStoreT<double> store;
        SeededRng rng(12);
        store.add("w", Tensor64::randn({4, 4}, rng));
        store.zero_grads();
        Tensor64 g({4, 4});
        for (auto& v : g.v) v = 0.25;
        store.accumulate_grad("w", g);
        AdamStateT<double> adam;
        adam_step(store, adam, 0.01);
        return store.at("w");
    };
    Tensor64 a = run(), b = run();
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

    ParamStoreT<double> store;
    store.add("p", Tensor64({2}));
    AdamStateT<double> adam;
    CHECK_THROWS_WITH_AS(adam_step(store, adam, 0.001), doctest::Contains("missing gradient"), std::runtime_error);
}
