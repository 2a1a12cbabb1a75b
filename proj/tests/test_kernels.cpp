#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "doctest.h"
#include "watermap/errors.hpp"
#include "watermap/kernels.hpp"
#include "watermap/rng.hpp"

using namespace watermap;

namespace {

bool close(double a, double b, double tol) {
    if (a == b) return true;
    double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) <= tol * scale;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

const std::size_t kLengths[] = {1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 33, 100, 257};

} // namespace

TEST_CASE("scalar sqdist_row matches a naive loop") {
    Rng rng(7);
    const std::size_t n = 11, m = 5;
    auto feat = random_vec(rng, n * m, -2.0, 2.0);
    auto point = random_vec(rng, m, -2.0, 2.0);
    std::vector<double> out(n);
    kern::scalar_ops().sqdist_row(point.data(), feat.data(), n, m, out.data());
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            double d = point[k] - feat[k * n + j];
            s += d * d;
        }
        CHECK(close(out[j], s, 1e-14));
    }
}

TEST_CASE("scalar gaussian_stats matches direct sums") {
    Rng rng(8);
    for (std::size_t n : kLengths) {
        auto d2 = random_vec(rng, n, 0.0, 9.0);
        double beta = 0.37, shift = 0.25;
        std::vector<double> w(n);
        auto st = kern::scalar_ops().gaussian_stats(d2.data(), n, beta, shift,
                                                    w.data());
        double wsum = 0.0, wd2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double e = std::exp(-beta * (d2[j] - shift));
            CHECK(close(w[j], e, 1e-15));
            wsum += e;
            wd2 += d2[j] * e;
        }
        CHECK(close(st.wsum, wsum, 1e-13));
        CHECK(close(st.wd2sum, wd2, 1e-13));
        auto st2 = kern::scalar_ops().gaussian_stats(d2.data(), n, beta, shift,
                                                     nullptr);
        CHECK(st2.wsum == st.wsum);
        CHECK(st2.wd2sum == st.wd2sum);
    }
}

TEST_CASE("scalar cauchy, gradient and kde rows match direct sums") {
    Rng rng(9);
    const std::size_t n = 23;
    auto x = random_vec(rng, n, -3.0, 3.0);
    auto y = random_vec(rng, n, -3.0, 3.0);
    auto p = random_vec(rng, n, 0.0, 0.1);
    auto beta = random_vec(rng, n, 0.5, 4.0);
    double xi = x[4], yi = y[4];

    std::vector<double> w(n);
    double ws = kern::scalar_ops().cauchy_row(xi, yi, x.data(), y.data(), n,
                                              w.data());
    double ref = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double r2 = (xi - x[j]) * (xi - x[j]) + (yi - y[j]) * (yi - y[j]);
        CHECK(close(w[j], 1.0 / (1.0 + r2), 1e-15));
        ref += 1.0 / (1.0 + r2);
    }
    CHECK(close(ws, ref, 1e-13));

    double q_scale = 1.0 / ws;
    double gx = 0.0, gy = 0.0;
    kern::scalar_ops().grad_row(xi, yi, x.data(), y.data(), p.data(), w.data(),
                                q_scale, n, &gx, &gy);
    double rx = 0.0, ry = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double c = (p[j] - w[j] * q_scale) * w[j];
        rx += c * (xi - x[j]);
        ry += c * (yi - y[j]);
    }
    CHECK(close(gx, rx, 1e-12));
    CHECK(close(gy, ry, 1e-12));

    double cell = kern::scalar_ops().kde_cell(0.3, -0.2, x.data(), y.data(),
                                              beta.data(), n);
    double rc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double r2 = (0.3 - x[j]) * (0.3 - x[j]) + (-0.2 - y[j]) * (-0.2 - y[j]);
        rc += beta[j] * std::exp(-beta[j] * r2);
    }
    CHECK(close(cell, rc, 1e-13));
}

TEST_CASE("vectorized exp is accurate across the representable range") {
    if (!kern::avx2_available()) return;
    const kern::Ops* ops = kern::avx2_ops();
    REQUIRE(ops != nullptr);

    std::vector<double> args = {-708.0, -700.0, -200.0, -87.3, -20.0, -5.5,
                                -1.0,   -0.1,   -1e-8,  0.0,   1e-8,  0.1,
                                1.0,    5.5,    20.0,   87.3,  200.0, 700.0,
                                709.0};
    Rng rng(11);
    for (int i = 0; i < 400; ++i) args.push_back(-700.0 + 1400.0 * rng.uniform());
    std::vector<double> out(args.size());
    ops->vexp(args.data(), args.size(), out.data());
    for (std::size_t i = 0; i < args.size(); ++i) {
        double want = std::exp(args[i]);
        CAPTURE(args[i]);
        CHECK(std::abs(out[i] - want) <= 5e-14 * want);
    }

    std::vector<double> extreme = {-1e9, -800.0, -710.0, 710.0, 800.0};
    std::vector<double> eout(extreme.size());
    ops->vexp(extreme.data(), extreme.size(), eout.data());
    CHECK(eout[0] == 0.0);
    CHECK(eout[1] == 0.0);
    CHECK(eout[2] == 0.0);
    CHECK(std::isinf(eout[3]));
    CHECK(std::isinf(eout[4]));

    double one = -0.0;
    double unit;
    ops->vexp(&one, 1, &unit);
    CHECK(unit == 1.0);
}

TEST_CASE("avx2 kernels match scalar kernels") {
    if (!kern::avx2_available()) {
        MESSAGE("avx2 unavailable on this host; skipping");
        return;
    }
    const kern::Ops& s = kern::scalar_ops();
    const kern::Ops* a = kern::avx2_ops();
    REQUIRE(a != nullptr);
    Rng rng(13);

    for (std::size_t n : kLengths) {
        CAPTURE(n);
        const std::size_t m = 1 + n % 7;
        auto feat = random_vec(rng, n * m, -2.0, 2.0);
        auto point = random_vec(rng, m, -2.0, 2.0);
        std::vector<double> so(n), ao(n);
        s.sqdist_row(point.data(), feat.data(), n, m, so.data());
        a->sqdist_row(point.data(), feat.data(), n, m, ao.data());
        for (std::size_t j = 0; j < n; ++j) CHECK(close(so[j], ao[j], 1e-12));

        auto d2 = random_vec(rng, n, 0.0, 40.0);
        double beta = 0.05 + 2.0 * rng.uniform();
        double shift = d2[rng.below(n)];
        std::vector<double> sw(n), aw(n);
        auto st_s = s.gaussian_stats(d2.data(), n, beta, shift, sw.data());
        auto st_a = a->gaussian_stats(d2.data(), n, beta, shift, aw.data());
        CHECK(close(st_s.wsum, st_a.wsum, 1e-12));
        CHECK(close(st_s.wd2sum, st_a.wd2sum, 1e-12));
        for (std::size_t j = 0; j < n; ++j) CHECK(close(sw[j], aw[j], 1e-12));

        auto x = random_vec(rng, n, -4.0, 4.0);
        auto y = random_vec(rng, n, -4.0, 4.0);
        auto p = random_vec(rng, n, 0.0, 0.2);
        double xi = x[0], yi = y[0];
        std::vector<double> ws(n), wa(n);
        double ss = s.cauchy_row(xi, yi, x.data(), y.data(), n, ws.data());
        double sa = a->cauchy_row(xi, yi, x.data(), y.data(), n, wa.data());
        CHECK(close(ss, sa, 1e-12));
        for (std::size_t j = 0; j < n; ++j) CHECK(close(ws[j], wa[j], 1e-12));

        double gxs, gys, gxa, gya;
        s.grad_row(xi, yi, x.data(), y.data(), p.data(), ws.data(), 1.0 / ss, n,
                   &gxs, &gys);
        a->grad_row(xi, yi, x.data(), y.data(), p.data(), wa.data(), 1.0 / sa, n,
                    &gxa, &gya);
        CHECK(close(gxs, gxa, 1e-11));
        CHECK(close(gys, gya, 1e-11));

        auto bs = random_vec(rng, n, 0.2, 5.0);
        double cs = s.kde_cell(0.7, -1.1, x.data(), y.data(), bs.data(), n);
        double ca = a->kde_cell(0.7, -1.1, x.data(), y.data(), bs.data(), n);
        CHECK(close(cs, ca, 1e-12));
    }
}

TEST_CASE("backend selection") {
    kern::select(kern::Backend::Scalar);
    CHECK(std::strcmp(kern::active().name, "scalar") == 0);
    if (kern::avx2_available()) {
        kern::select(kern::Backend::Avx2);
        CHECK(std::strcmp(kern::active().name, "avx2") == 0);
        kern::select(kern::Backend::Auto);
        CHECK(std::strcmp(kern::active().name, "avx2") == 0);
    } else {
        CHECK_THROWS_AS(kern::select(kern::Backend::Avx2), ConfigError);
        kern::select(kern::Backend::Auto);
        CHECK(std::strcmp(kern::active().name, "scalar") == 0);
    }
    kern::select(kern::Backend::Auto);
}
