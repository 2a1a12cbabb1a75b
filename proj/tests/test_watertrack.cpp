#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "watermap/errors.hpp"
#include "watermap/kde.hpp"
#include "watermap/rng.hpp"
#include "watermap/watertrack.hpp"

using namespace watermap;

namespace {

DensityRaster make_raster(std::size_t w, std::size_t h, std::vector<double> v) {
    DensityRaster r;
    r.width = w;
    r.height = h;
    r.x0 = 0.0;
    r.y0 = 0.0;
    r.cell_size = 1.0;
    r.values = std::move(v);
    return r;
}

// Random field, box-blurred for structure, with a tiny index-dependent tilt
// so every value is distinct.
DensityRaster smoothed_random(std::size_t side, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(side * side);
    for (double& x : v) x = rng.uniform();
    std::vector<double> b(side * side, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                double acc = 0.0;
                int cnt = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        long nx = long(x) + dx, ny = long(y) + dy;
                        if (nx < 0 || ny < 0 || nx >= long(side) || ny >= long(side))
                            continue;
                        acc += v[std::size_t(ny) * side + std::size_t(nx)];
                        ++cnt;
                    }
                b[y * side + x] = acc / cnt;
            }
        std::swap(v, b);
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += double(i) * 1e-12;
    return make_raster(side, side, std::move(v));
}

bool has_distinct_values(const DensityRaster& r) {
    std::vector<double> s = r.values;
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) == s.end();
}

} // namespace

TEST_CASE("a monotone ramp is a single basin") {
    std::vector<double> v(16);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) v[y * 4 + x] = double(x) + 10.0 * double(y);
    DensityRaster r = make_raster(4, 4, v);
    Segmentation seg = water_track(r);
    CHECK(seg.clusters() == 1);
    REQUIRE(seg.peaks.size() == 1);
    CHECK(seg.peaks[0].cell == 15); // top-right corner
    for (int lab : seg.labels) CHECK(lab == 1);
}

TEST_CASE("two separated bumps give two clusters ordered by height") {
    const std::size_t side = 9;
    std::vector<double> v(side * side, 0.0);
    auto bump = [&](double cx, double cy, double amp) {
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                double dx = double(x) - cx, dy = double(y) - cy;
                v[y * side + x] += amp * std::exp(-(dx * dx + dy * dy) / 2.0);
            }
    };
    bump(2.0, 2.0, 1.0);
    bump(6.0, 6.0, 2.0);
    DensityRaster r = make_raster(side, side, v);
    Segmentation seg = water_track(r);
    CHECK(seg.clusters() == 2);
    REQUIRE(seg.peaks.size() == 2);
    CHECK(seg.peaks[0].cell == 6 * side + 6); // taller bump first
    CHECK(seg.peaks[1].cell == 2 * side + 2);
    CHECK(seg.peaks[0].density > seg.peaks[1].density);
    CHECK(seg.labels[6 * side + 6] == 1);
    CHECK(seg.labels[2 * side + 2] == 2);
}

TEST_CASE("water_track equals the steepest-ascent oracle on distinct values") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        DensityRaster r = smoothed_random(20, seed);
        REQUIRE(has_distinct_values(r));
        Segmentation a = water_track(r);
        Segmentation b = steepest_ascent_oracle(r);
        REQUIRE(a.peaks.size() == b.peaks.size());
        for (std::size_t k = 0; k < a.peaks.size(); ++k) {
            CHECK(a.peaks[k].cell == b.peaks[k].cell);
            CHECK(a.peaks[k].density == b.peaks[k].density);
        }
        CHECK(a.labels == b.labels);
    }
}

TEST_CASE("every labeled cell has an uphill path inside its own cluster") {
    DensityRaster r = smoothed_random(24, 99);
    Segmentation seg = water_track(r);
    std::vector<bool> is_peak(r.values.size(), false);
    for (const auto& p : seg.peaks) is_peak[p.cell] = true;
    for (std::size_t c = 0; c < r.values.size(); ++c) {
        if (is_peak[c]) continue;
        std::size_t x = c % seg.width, y = c / seg.width;
        bool found = false;
        for (int dy = -1; dy <= 1 && !found; ++dy)
            for (int dx = -1; dx <= 1 && !found; ++dx) {
                if (!dx && !dy) continue;
                long nx = long(x) + dx, ny = long(y) + dy;
                if (nx < 0 || ny < 0 || nx >= long(seg.width) ||
                    ny >= long(seg.height))
                    continue;
                std::size_t m = std::size_t(ny) * seg.width + std::size_t(nx);
                if (seg.labels[m] == seg.labels[c] && r.values[m] >= r.values[c])
                    found = true;
            }
        CHECK(found);
    }
    // Peak list is ordered by height.
    for (std::size_t k = 1; k < seg.peaks.size(); ++k)
        CHECK(seg.peaks[k - 1].density >= seg.peaks[k].density);
}

TEST_CASE("plateaus do not fragment") {
    // Constant raster: one cluster seeded at the first cell.
    DensityRaster flat = make_raster(5, 5, std::vector<double>(25, 3.0));
    Segmentation seg = water_track(flat);
    CHECK(seg.clusters() == 1);
    REQUIRE(seg.peaks.size() == 1);
    CHECK(seg.peaks[0].cell == 0);
    for (int lab : seg.labels) CHECK(lab == 1);

    // Flat-top bump: the 2x2 plateau stays one cluster.
    std::vector<double> v(16, 1.0);
    v[1 * 4 + 1] = 5.0;
    v[1 * 4 + 2] = 5.0;
    v[2 * 4 + 1] = 5.0;
    v[2 * 4 + 2] = 5.0;
    Segmentation bump = water_track(make_raster(4, 4, v));
    CHECK(bump.clusters() == 1);

    // Two disconnected plateaus at the same height become two clusters.
    std::vector<double> w(25, 1.0);
    w[2 * 5 + 0] = 5.0;
    w[2 * 5 + 1] = 5.0;
    w[2 * 5 + 3] = 5.0;
    w[2 * 5 + 4] = 5.0;
    Segmentation twin = water_track(make_raster(5, 5, w));
    CHECK(twin.clusters() == 2);
}

TEST_CASE("water_track validates the raster") {
    CHECK_THROWS_AS(water_track(make_raster(0, 0, {})), GridError);
    CHECK_THROWS_AS(water_track(make_raster(2, 2, {1.0, 2.0, 3.0})), ShapeError);
    CHECK_THROWS_AS(water_track(make_raster(2, 1, {1.0, -0.5})), ShapeError);
    CHECK_THROWS_AS(water_track(make_raster(2, 1, {1.0, std::nan("")})),
                    ShapeError);
}

TEST_CASE("label_points clamps one cell and rejects farther points") {
    DensityRaster r = make_raster(3, 3, {9, 8, 7, 6, 5, 4, 3, 2, 1});
    Segmentation seg = water_track(r);
    Embedding pts(4);
    pts.x = {0.5, -0.5, 2.9, 3.5};
    pts.y = {0.5, -0.5, 2.9, 2.0};
    std::vector<int> labels = label_points(seg, r, pts);
    CHECK(labels[0] == seg.labels[0]);
    CHECK(labels[1] == seg.labels[0]); // clamped from (-1,-1)
    CHECK(labels[2] == seg.labels[8]);
    CHECK(labels[3] == seg.labels[2 * 3 + 2]); // ix clamped from 3 to 2

    Embedding far(1);
    far.x = {4.1}; // more than one cell beyond the right edge
    far.y = {1.0};
    CHECK_THROWS_AS(label_points(seg, r, far), OutOfGridError);
    Embedding left(1);
    left.x = {-1.5};
    left.y = {1.0};
    CHECK_THROWS_AS(label_points(seg, r, left), OutOfGridError);

    DensityRaster other = make_raster(2, 2, {1, 2, 3, 4});
    CHECK_THROWS_AS(label_points(seg, other, pts), ShapeError);
}

TEST_CASE("runtime scales near g log g") {
    auto time_of = [](const DensityRaster& r) {
        double best = 1e30;
        for (int rep = 0; rep < 3; ++rep) {
            auto t0 = std::chrono::steady_clock::now();
            Segmentation seg = water_track(r);
            auto t1 = std::chrono::steady_clock::now();
            volatile std::size_t sink = seg.clusters();
            (void)sink;
            best = std::min(best,
                            std::chrono::duration<double>(t1 - t0).count());
        }
        return best;
    };
    DensityRaster small = smoothed_random(160, 7);   // g cells
    DensityRaster large = smoothed_random(320, 7);   // 4g cells
    double tg = time_of(small);
    double t4g = time_of(large);
    double g = double(small.values.size());
    double predicted = 4.0 * std::log(4.0 * g) / std::log(g);
    double ratio = t4g / tg;
    CHECK(ratio <= 5.0 * predicted);
    CHECK(ratio >= predicted / 5.0);
}
