#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "dot/checkpoint.hpp"
#include "dot/metrics.hpp"
#include "dot/rng.hpp"

using namespace dot;

TEST_CASE("regression metrics on hand-worked values") {
    RegressionReport zero = regression_metrics({10, 20, 30}, {10, 20, 30});
    CHECK(zero.rmse == 0.0);
    CHECK(zero.mae == 0.0);
    CHECK(zero.mape == 0.0);

    RegressionReport r = regression_metrics({10, 20}, {12, 16});
    CHECK(r.rmse == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
    CHECK(r.mae == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.mape == doctest::Approx(100.0 * (2.0 / 12.0 + 4.0 / 16.0) / 2.0).epsilon(1e-12));
    CHECK(r.n == 2);

    RegressionReport c = regression_metrics({15, 25, 35}, {10, 20, 30});
    CHECK(c.mae == doctest::Approx(5.0));
    CHECK(c.rmse == doctest::Approx(5.0));

    CHECK_THROWS_AS(regression_metrics({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(regression_metrics({1.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("rmse dominates mae on random reports") {
    SeededRng rng(2);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> p, t;
        for (int i = 0; i < 20; ++i) {
            t.push_back(rng.uniform(1.0, 50.0));
            p.push_back(t.back() + rng.normal() * 5.0);
        }
        RegressionReport r = regression_metrics(p, t);
        CHECK(r.rmse >= r.mae);
        CHECK(r.mape >= 0.0);
    }
}

TEST_CASE("pit metrics on hand-worked values") {
    PiT a(2), b(2);
    CHECK(pit_metrics({a}, {b}).rmse_overall == 0.0);

    // Differ by 1 in one mask-channel entry out of four cells.
    a.at(1, 1, 1) = 0.0;
    PiTReport r = pit_metrics({a}, {b});
    CHECK(r.rmse_channel[0] == doctest::Approx(0.5).epsilon(1e-12));   // sqrt(1/4)
    CHECK(r.mae_channel[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.rmse_overall == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-12));

    PiT c(3);
    CHECK_THROWS_AS(pit_metrics({a}, {c}), std::invalid_argument);
}

TEST_CASE("pit metrics match a flat-array oracle and bound the channels") {
    SeededRng rng(3);
    std::vector<PiT> xs, ys;
    for (int s = 0; s < 6; ++s) {
        PiT x(5), y(5);
        for (size_t i = 0; i < x.v.size(); ++i) {
            x.v[i] = rng.uniform(-1, 1);
            y.v[i] = rng.uniform(-1, 1);
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    PiTReport r = pit_metrics(xs, ys);
    double se = 0.0, ae = 0.0;
    std::int64_t n = 0;
    for (size_t s = 0; s < xs.size(); ++s)
        for (size_t i = 0; i < xs[s].v.size(); ++i) {
            const double d = xs[s].v[i] - ys[s].v[i];
            se += d * d;
            ae += std::abs(d);
            ++n;
        }
    CHECK(r.rmse_overall == doctest::Approx(std::sqrt(se / double(n))).epsilon(1e-12));
    CHECK(r.mae_overall == doctest::Approx(ae / double(n)).epsilon(1e-12));
    // Overall lies between the channel extremes.
    CHECK(r.rmse_overall >= std::min({r.rmse_channel[0], r.rmse_channel[1], r.rmse_channel[2]}));
    CHECK(r.rmse_overall <= std::max({r.rmse_channel[0], r.rmse_channel[1], r.rmse_channel[2]}));
}

TEST_CASE("route metrics count binarized mask agreement") {
    PiT truth(3), inferred(3);
    for (auto cell : {std::pair{3, 1}, {2, 2}, {1, 3}}) truth.at(cell.first, cell.second, 1) = 1.0;
    for (auto cell : {std::pair{3, 1}, {2, 2}, {2, 3}}) inferred.at(cell.first, cell.second, 1) = 1.0;
    RouteReport r = route_metrics({inferred}, {truth});
    CHECK(r.precision == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));
    CHECK(r.recall == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));
    CHECK(r.f1 == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));

    RouteReport perfect = route_metrics({truth}, {truth});
    CHECK(perfect.precision == doctest::Approx(100.0));
    CHECK(perfect.recall == doctest::Approx(100.0));
    CHECK(perfect.f1 == doctest::Approx(100.0));

    // Empty truth samples are skipped.
    PiT empty(3);
    RouteReport skipped = route_metrics({inferred, inferred}, {truth, empty});
    CHECK(skipped.skipped == 1);
    CHECK(skipped.precision == doctest::Approx(r.precision));
}

TEST_CASE("route metrics match a confusion-matrix oracle") {
    SeededRng rng(4);
    std::vector<PiT> xs, ys;
    for (int s = 0; s < 8; ++s) {
        PiT x(6), y(6);
        for (std::int64_t p = 0; p < x.cells(); ++p) {
            x.v[size_t(p) * 3] = rng.uniform() < 0.3 ? 0.5 : -1.0;
            y.v[size_t(p) * 3] = rng.uniform() < 0.3 ? 0.5 : -1.0;
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    RouteReport r = route_metrics(xs, ys);
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (size_t s = 0; s < xs.size(); ++s) {
        bool any = false;
        for (std::int64_t p = 0; p < ys[s].cells(); ++p) any = any || ys[s].v[size_t(p) * 3] >= 0.0;
        if (!any) continue;
        for (std::int64_t p = 0; p < xs[s].cells(); ++p) {
            const bool pred = xs[s].v[size_t(p) * 3] >= 0.0;
            const bool pos = ys[s].v[size_t(p) * 3] >= 0.0;
            tp += pred && pos;
            fp += pred && !pos;
            fn += !pred && pos;
        }
    }
    const double prec = 100.0 * double(tp) / double(tp + fp);
    const double rec = 100.0 * double(tp) / double(tp + fn);
    CHECK(r.precision == doctest::Approx(prec).epsilon(1e-9));
    CHECK(r.recall == doctest::Approx(rec).epsilon(1e-9));
    CHECK(r.f1 == doctest::Approx(2.0 * prec * rec / (prec + rec)).epsilon(1e-9));
}

TEST_CASE("checkpoints round-trip bitwise") {
    ParamStore store;
    SeededRng rng(5);
    store.add("a.w", Tensor::randn({3, 4}, rng));
    store.add("b.w", Tensor::randn({2, 2, 2, 2}, rng));
    store.add("scalar", Tensor::full({1}, 0.125f));
    const std::string cfg = "{\"L_G\":20}";
    const std::string path = "/tmp/dot_test_ckpt.bin";
    save_checkpoint(store, cfg, path);

    auto [loaded, cfg2] = load_checkpoint(path);
    CHECK(cfg2 == cfg);
    REQUIRE(loaded.params.size() == 3);
    for (const auto& [name, t] : store.params) {
        const Tensor& l = loaded.at(name);
        REQUIRE(l.shape == t.shape);
        for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(l[i] == t[i]);
    }

    // save -> load -> save produces identical bytes.
    const std::string path2 = "/tmp/dot_test_ckpt2.bin";
    save_checkpoint(loaded, cfg2, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(bytes1 == bytes2);
}

TEST_CASE("checkpoint errors are descriptive") {
    const std::string path = "/tmp/dot_test_ckpt_bad.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC and some trailing bytes";
    }
    CHECK_THROWS_WITH(load_checkpoint(path), "bad magic");

    ParamStore store;
    store.add("w", Tensor::full({2, 2}, 1.0f));
    save_checkpoint(store, "{}", path);
    // Truncate after the magic.
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), 12);
    }
    CHECK_THROWS_WITH(load_checkpoint(path), "truncated checkpoint");
}

TEST_CASE("loading into a mismatched store names the offending tensor") {
    ParamStore saved;
    saved.add("estimator.E", Tensor::full({16, 8}, 1.0f));
    const std::string path = "/tmp/dot_test_ckpt_mismatch.bin";
    save_checkpoint(saved, "{}", path);
    auto [loaded, cfg] = load_checkpoint(path);

    ParamStore expect;
    expect.add("estimator.E", Tensor({25, 8}));  // different L_G
    CHECK_THROWS_WITH_AS(load_into(expect, loaded), doctest::Contains("estimator.E"), std::runtime_error);

    ParamStore missing;
    missing.add("estimator.other", Tensor({2}));
    CHECK_THROWS_WITH_AS(load_into(missing, loaded), doctest::Contains("estimator.other"), std::runtime_error);
}
