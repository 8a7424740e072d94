#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "dot/geo.hpp"
#include "dot/rng.hpp"

using namespace dot;

namespace {

Trajectory traj_of(std::vector<TimedPoint> pts, std::string id = "t") {
    return make_trajectory(std::move(id), std::move(pts));
}

Trajectory random_traj(SeededRng& rng, const AreaOfInterest& a, int n_points) {
    std::vector<TimedPoint> pts;
    std::int64_t t = rng.uniform_int(0, 86400 * 5);
    for (int i = 0; i < n_points; ++i) {
        TimedPoint p;
        p.g.lng = rng.uniform(a.lng_min, a.lng_max);
        p.g.lat = rng.uniform(a.lat_min, a.lat_max);
        p.t = t;
        t += rng.uniform_int(1, 60);
        pts.push_back(p);
    }
    return traj_of(std::move(pts));
}

}  // namespace

TEST_CASE("area of interest covers all points with a relative margin") {
    auto t = traj_of({{{0.0, 0.0}, 0}, {{1.0, 2.0}, 10}});
    AreaOfInterest a = compute_area_of_interest({t});
    CHECK(a.lng_min == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(a.lng_max == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(a.lat_min == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(a.lat_max == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(a.lng_min < 0.0);
    CHECK(a.lng_max > 1.0);
    CHECK(a.contains(GeoPoint{1.0, 2.0}));
}

TEST_CASE("area of interest rejects degenerate input") {
    CHECK_THROWS_WITH(compute_area_of_interest({}), "no trajectories");
    // A single point has zero extent on both axes.
    Trajectory degenerate;
    degenerate.id = "p";
    degenerate.points = {{{5.0, 5.0}, 0}, {{5.0, 5.0}, 10}};
    CHECK_THROWS_WITH(compute_area_of_interest({degenerate}), "degenerate area of interest");
}

TEST_CASE("area of interest equals a brute-force min/max scan") {
    SeededRng rng(7);
    std::vector<Trajectory> trajs;
    double lng_min = 1e30, lng_max = -1e30, lat_min = 1e30, lat_max = -1e30;
    for (int i = 0; i < 20; ++i) {
        std::vector<TimedPoint> pts;
        for (int j = 0; j < 50; ++j) {
            TimedPoint p{{rng.uniform(-10, 10), rng.uniform(30, 40)}, j};
            lng_min = std::min(lng_min, p.g.lng);
            lng_max = std::max(lng_max, p.g.lng);
            lat_min = std::min(lat_min, p.g.lat);
            lat_max = std::max(lat_max, p.g.lat);
            pts.push_back(p);
        }
        trajs.push_back(traj_of(std::move(pts), "t" + std::to_string(i)));
    }
    AreaOfInterest a = compute_area_of_interest(trajs);
    const double mlng = 1e-6 * (lng_max - lng_min);
    const double mlat = 1e-6 * (lat_max - lat_min);
    CHECK(a.lng_min == doctest::Approx(lng_min - mlng).epsilon(1e-12));
    CHECK(a.lng_max == doctest::Approx(lng_max + mlng).epsilon(1e-12));
    CHECK(a.lat_min == doctest::Approx(lat_min - mlat).epsilon(1e-12));
    CHECK(a.lat_max == doctest::Approx(lat_max + mlat).epsilon(1e-12));
}

TEST_CASE("cell_of maps corners and midpoints") {
    GridSpec g = make_grid({0.0, 4.0, 0.0, 4.0}, 4);
    CHECK(cell_of({0.0, 0.0}, g) == CellIdx{1, 1});
    CHECK(cell_of({4.0, 4.0}, g) == CellIdx{4, 4});  // clamped at the max edge
    CHECK(cell_of({2.0, 2.0}, g) == CellIdx{3, 3});
    CHECK_THROWS_WITH(cell_of({4.5, 2.0}, g), "out of area");
}

TEST_CASE("rasterize reproduces the 3x3 worked example") {
    // Points at 9:00, 9:36, 12:00 in cells (3,1), (2,2), (1,3).
    GridSpec g = make_grid({0.0, 3.0, 0.0, 3.0}, 3);
    auto t = traj_of({
        {{2.5, 0.5}, 9 * 3600},
        {{1.5, 1.5}, 9 * 3600 + 36 * 60},
        {{0.5, 2.5}, 12 * 3600},
    });
    PiT pit = rasterize(t, g);

    CHECK(pit.at(3, 1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pit.at(3, 1, 2) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(pit.at(3, 1, 3) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pit.at(2, 2, 2) == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(pit.at(2, 2, 3) == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(pit.at(1, 3, 2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(pit.at(1, 3, 3) == doctest::Approx(1.0).epsilon(1e-12));
    for (int x = 1; x <= 3; ++x)
        for (int y = 1; y <= 3; ++y) {
            const bool visited = (x == 3 && y == 1) || (x == 2 && y == 2) || (x == 1 && y == 3);
            if (!visited)
                for (int c = 1; c <= 3; ++c) CHECK(pit.at(x, y, c) == -1.0);
        }
    CHECK(travel_time_of(t) == doctest::Approx(180.0));
}

TEST_CASE("two-point trajectory hits the offset endpoints") {
    GridSpec g = make_grid({0.0, 2.0, 0.0, 2.0}, 2);
    auto t = traj_of({{{0.5, 0.5}, 100}, {{1.5, 1.5}, 700}});
    PiT pit = rasterize(t, g);
    CHECK(pit.at(1, 1, 3) == -1.0);
    CHECK(pit.at(2, 2, 3) == 1.0);
    CHECK(travel_time_of(t) == doctest::Approx(10.0));
}

TEST_CASE("rasterize rejects zero-duration input") {
    GridSpec g = make_grid({0.0, 2.0, 0.0, 2.0}, 2);
    Trajectory t;  // bypasses make_trajectory on purpose
    t.id = "z";
    t.points = {{{0.5, 0.5}, 100}, {{1.5, 1.5}, 100}};
    CHECK_THROWS_WITH(rasterize(t, g), "zero duration");
}

TEST_CASE("rasterize matches a per-cell brute-force oracle on random input") {
    AreaOfInterest a{0.0, 1.0, 0.0, 1.0};
    GridSpec g = make_grid(a, 7);
    SeededRng rng(42);
    for (int rep = 0; rep < 25; ++rep) {
        Trajectory t = random_traj(rng, a, 50);
        PiT pit = rasterize(t, g);
        // Oracle: scan points per cell, keep the minimum timestamp.
        for (int x = 1; x <= g.l_g; ++x)
            for (int y = 1; y <= g.l_g; ++y) {
                std::int64_t best = -1;
                for (const auto& p : t.points)
                    if (cell_of(p.g, g) == CellIdx{x, y} && (best < 0 || p.t < best)) best = p.t;
                if (best < 0) {
                    for (int c = 1; c <= 3; ++c) CHECK(pit.at(x, y, c) == -1.0);
                } else {
                    CHECK(pit.at(x, y, 1) == 1.0);
                    CHECK(pit.at(x, y, 2) ==
                          doctest::Approx(2.0 * double(best % 86400) / 86400.0 - 1.0).epsilon(1e-12));
                    CHECK(pit.at(x, y, 3) ==
                          doctest::Approx(2.0 * double(best - t.t_first()) / double(t.t_last() - t.t_first()) - 1.0)
                              .epsilon(1e-12));
                }
            }
    }
}

TEST_CASE("rasterize output satisfies the PiT invariants on random input") {
    AreaOfInterest a{10.0, 11.0, 20.0, 21.0};
    GridSpec g = make_grid(a, 12);
    SeededRng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        Trajectory t = random_traj(rng, a, int(rng.uniform_int(2, 80)));
        PiT pit = rasterize(t, g);
        for (int x = 1; x <= g.l_g; ++x)
            for (int y = 1; y <= g.l_g; ++y) {
                const double m = pit.at(x, y, 1);
                CHECK((m == 1.0 || m == -1.0));
                for (int c = 1; c <= 3; ++c) {
                    CHECK(pit.at(x, y, c) >= -1.0);
                    CHECK(pit.at(x, y, c) <= 1.0);
                }
                if (m == -1.0) {
                    CHECK(pit.at(x, y, 2) == -1.0);
                    CHECK(pit.at(x, y, 3) == -1.0);
                }
                // Unvisited-cell consistency against cell_of.
                bool visited = false;
                for (const auto& p : t.points) visited = visited || cell_of(p.g, g) == CellIdx{x, y};
                CHECK((m == 1.0) == visited);
            }
        // First/last point cells pin the offset endpoints when they are the
        // earliest in their cells (the first point always is).
        CellIdx c0 = cell_of(t.points.front().g, g);
        CHECK(pit.at(c0.x, c0.y, 3) == -1.0);
    }
}

TEST_CASE("equal timestamps keep the first point in sequence order") {
    GridSpec g = make_grid({0.0, 2.0, 0.0, 2.0}, 2);
    Trajectory t;
    t.id = "tie";
    // Two points at t=100 in different cells; then termination point.
    t.points = {{{0.5, 0.5}, 100}, {{1.5, 0.5}, 100}, {{1.5, 1.5}, 400}};
    PiT pit = rasterize(t, g);
    // Both cells get their own earliest point; the tie applies within a cell.
    Trajectory u;
    u.id = "tie2";
    u.points = {{{0.4, 0.5}, 100}, {{0.6, 0.5}, 100}, {{1.5, 1.5}, 400}};
    PiT pit2 = rasterize(u, g);
    // Cell (1,1) keeps the first of the two equal-timestamp points; both give
    // the same channel values since only the timestamp enters the channels.
    CHECK(pit2.at(1, 1, 2) == pit.at(1, 1, 2));
    CHECK(pit2.at(1, 1, 3) == -1.0);
}

TEST_CASE("flatten_index is the documented bijection") {
    CHECK(flatten_index({1, 1}, 5) == 1);
    CHECK(flatten_index({2, 2}, 3) == 5);
    // Worked-example cells on the 3x3 grid.
    CHECK(flatten_index({3, 1}, 3) == 3);
    CHECK(flatten_index({2, 2}, 3) == 5);
    CHECK(flatten_index({1, 3}, 3) == 7);
    for (int l : {2, 3, 5, 20}) {
        std::vector<bool> seen(size_t(l) * l, false);
        for (int y = 1; y <= l; ++y)
            for (int x = 1; x <= l; ++x) {
                int p = flatten_index({x, y}, l);
                CHECK(p >= 1);
                CHECK(p <= l * l);
                CHECK(!seen[size_t(p - 1)]);
                seen[size_t(p - 1)] = true;
                CHECK(unflatten_index(p, l) == CellIdx{x, y});
            }
    }
}

TEST_CASE("odt input encodes origin, destination and departure") {
    AreaOfInterest a{0.0, 10.0, 0.0, 10.0};
    // Five-point trip departing 8:00, arriving 8:15.
    auto t = traj_of({
        {{1.0, 1.0}, 8 * 3600},
        {{2.0, 2.0}, 8 * 3600 + 200},
        {{3.0, 3.0}, 8 * 3600 + 500},
        {{4.0, 4.0}, 8 * 3600 + 700},
        {{5.0, 5.0}, 8 * 3600 + 900},
    });
    ODTInput odt = odt_input_of(t, a);
    CHECK(odt.g_o.lng == 1.0);
    CHECK(odt.g_d.lng == 5.0);
    CHECK(odt.t_o == 8 * 3600);
    CHECK(travel_time_of(t) == doctest::Approx(15.0));

    // Normalization endpoints.
    auto corner = traj_of({{{0.0, 0.0}, 0}, {{5.0, 5.0}, 600}});
    ODTInput oc = odt_input_of(corner, a);
    CHECK(oc.encoded[0] == doctest::Approx(-1.0));
    CHECK(oc.encoded[1] == doctest::Approx(-1.0));
    CHECK(oc.encoded[4] == doctest::Approx(-1.0));

    auto evening = traj_of({{{5.0, 5.0}, 18 * 3600}, {{6.0, 6.0}, 18 * 3600 + 600}});
    CHECK(odt_input_of(evening, a).encoded[4] == doctest::Approx(0.5));

    for (int i = 0; i < 5; ++i) {
        CHECK(odt.encoded[i] >= -1.0);
        CHECK(odt.encoded[i] <= 1.0);
    }
}
