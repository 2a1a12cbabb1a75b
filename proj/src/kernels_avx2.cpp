#include "watermap/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace watermap::kern {

namespace {

// Vector exp for doubles: Cody-Waite range reduction, degree-13 Taylor on
// [-ln2/2, ln2/2], exponent reassembly. Inputs below -708.4 flush to zero
// (those values sit in the subnormal range and never matter for kernel sums),
// inputs above 709.78 saturate to inf.
inline __m256d exp4(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d hi_cut = _mm256_set1_pd(709.782712893384);
    const __m256d lo_cut = _mm256_set1_pd(-708.396418532264);

    __m256d under = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
    __m256d xc = _mm256_min_pd(x, hi_cut);
    xc = _mm256_max_pd(xc, lo_cut);

    __m256d k = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(k, ln2_hi, xc);
    r = _mm256_fnmadd_pd(k, ln2_lo, r);

    __m256d p = _mm256_set1_pd(1.6059043836821613e-10); // 1/13!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868099e-09));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441720e-08));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985893e-07));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985888e-06));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587302e-05));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841e-04));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889e-03));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333333e-03));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664e-02));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666666e-01));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(5.0e-01));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    __m128i ki = _mm256_cvtpd_epi32(k);
    __m256i ki64 = _mm256_cvtepi32_epi64(ki);
    __m256i biased = _mm256_add_epi64(ki64, _mm256_set1_epi64x(1023));
    __m256d two_k = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));

    __m256d y = _mm256_mul_pd(p, two_k);
    return _mm256_andnot_pd(under, y);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

void sqdist_row_avx2(const double* point, const double* feat, std::size_t n,
                     std::size_t m, double* out) {
    std::memset(out, 0, n * sizeof(double));
    for (std::size_t k = 0; k < m; ++k) {
        const __m256d pk = _mm256_set1_pd(point[k]);
        const double* fk = feat + k * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d d = _mm256_sub_pd(_mm256_loadu_pd(fk + j), pk);
            __m256d acc = _mm256_loadu_pd(out + j);
            _mm256_storeu_pd(out + j, _mm256_fmadd_pd(d, d, acc));
        }
        for (; j < n; ++j) {
            double d = fk[j] - point[k];
            out[j] += d * d;
        }
    }
}

GaussianStats gaussian_stats_avx2(const double* d2, std::size_t n, double beta,
                                  double shift, double* weights) {
    const __m256d bv = _mm256_set1_pd(beta);
    const __m256d sv = _mm256_set1_pd(shift);
    __m256d acc_w = _mm256_setzero_pd();
    __m256d acc_d = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d d = _mm256_loadu_pd(d2 + j);
        __m256d arg = _mm256_mul_pd(bv, _mm256_sub_pd(sv, d));
        __m256d e = exp4(arg);
        acc_w = _mm256_add_pd(acc_w, e);
        acc_d = _mm256_fmadd_pd(d, e, acc_d);
        if (weights) _mm256_storeu_pd(weights + j, e);
    }
    double wsum = hsum(acc_w);
    double wd2sum = hsum(acc_d);
    for (; j < n; ++j) {
        double e = std::exp(-beta * (d2[j] - shift));
        wsum += e;
        wd2sum += d2[j] * e;
        if (weights) weights[j] = e;
    }
    return {wsum, wd2sum};
}

double cauchy_row_avx2(double xi, double yi, const double* x, const double* y,
                       std::size_t n, double* w) {
    const __m256d xv = _mm256_set1_pd(xi);
    const __m256d yv = _mm256_set1_pd(yi);
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x + j), xv);
        __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y + j), yv);
        __m256d r2 = _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dx, dx));
        __m256d v = _mm256_div_pd(one, _mm256_add_pd(one, r2));
        _mm256_storeu_pd(w + j, v);
        acc = _mm256_add_pd(acc, v);
    }
    double sum = hsum(acc);
    for (; j < n; ++j) {
        double dx = x[j] - xi;
        double dy = y[j] - yi;
        double v = 1.0 / (1.0 + dx * dx + dy * dy);
        w[j] = v;
        sum += v;
    }
    return sum;
}

void grad_row_avx2(double xi, double yi, const double* x, const double* y,
                   const double* p, const double* w, double q_scale,
                   std::size_t n, double* gx, double* gy) {
    const __m256d xv = _mm256_set1_pd(xi);
    const __m256d yv = _mm256_set1_pd(yi);
    const __m256d qs = _mm256_set1_pd(q_scale);
    __m256d ax = _mm256_setzero_pd();
    __m256d ay = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d wv = _mm256_loadu_pd(w + j);
        __m256d pv = _mm256_loadu_pd(p + j);
        __m256d m = _mm256_mul_pd(_mm256_fnmadd_pd(wv, qs, pv), wv);
        __m256d dx = _mm256_sub_pd(xv, _mm256_loadu_pd(x + j));
        __m256d dy = _mm256_sub_pd(yv, _mm256_loadu_pd(y + j));
        ax = _mm256_fmadd_pd(m, dx, ax);
        ay = _mm256_fmadd_pd(m, dy, ay);
    }
    double sx = hsum(ax);
    double sy = hsum(ay);
    for (; j < n; ++j) {
        double m = (p[j] - w[j] * q_scale) * w[j];
        sx += m * (xi - x[j]);
        sy += m * (yi - y[j]);
    }
    *gx = sx;
    *gy = sy;
}

double kde_cell_avx2(double cx, double cy, const double* x, const double* y,
                     const double* beta, std::size_t n) {
    const __m256d xv = _mm256_set1_pd(cx);
    const __m256d yv = _mm256_set1_pd(cy);
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d dx = _mm256_sub_pd(xv, _mm256_loadu_pd(x + j));
        __m256d dy = _mm256_sub_pd(yv, _mm256_loadu_pd(y + j));
        __m256d r2 = _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dx, dx));
        __m256d bv = _mm256_loadu_pd(beta + j);
        __m256d e = exp4(_mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), bv), r2));
        acc = _mm256_fmadd_pd(bv, e, acc);
    }
    double sum = hsum(acc);
    for (; j < n; ++j) {
        double dx = cx - x[j];
        double dy = cy - y[j];
        sum += beta[j] * std::exp(-beta[j] * (dx * dx + dy * dy));
    }
    return sum;
}

void vexp_avx2(const double* a, std::size_t n, double* out) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) _mm256_storeu_pd(out + j, exp4(_mm256_loadu_pd(a + j)));
    for (; j < n; ++j) out[j] = std::exp(a[j]);
}

const Ops avx2_table = {
    "avx2",
    sqdist_row_avx2,
    gaussian_stats_avx2,
    cauchy_row_avx2,
    grad_row_avx2,
    kde_cell_avx2,
    vexp_avx2,
};

} // namespace

const Ops* avx2_ops() { return &avx2_table; }

} // namespace watermap::kern

#else

namespace watermap::kern {

const Ops* avx2_ops() { return nullptr; }

} // namespace watermap::kern

#endif
