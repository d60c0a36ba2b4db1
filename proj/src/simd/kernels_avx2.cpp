// Compiled with -mavx2 only; the dispatcher calls into this file only after
// CPUID reports AVX2.

#include <immintrin.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "elementwise.hpp"
#include "shellvp/simd/kernels.hpp"

namespace shellvp::simd {
namespace {

constexpr std::size_t kLanes = 4;

inline __m256d abs_pd(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

inline std::size_t count_below(__m256d r, __m256d floor) {
  return static_cast<std::size_t>(std::popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_cmp_pd(r, floor, _CMP_LT_OQ)))));
}

// Fixed lane order: (l0 + l1) + (l2 + l3).
inline double hsum(__m256d v) {
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

inline double hmax(__m256d v) {
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, v);
  return std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
}

std::size_t rhs_classical(const double* r, const double* w, const double* ell, const double* m, double* dr,
                          double* dw, std::size_t n, double r_floor) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d fl = _mm256_set1_pd(r_floor);
  std::size_t clamps = 0, i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d rv = _mm256_loadu_pd(r + i);
    clamps += count_below(rv, fl);
    const __m256d inv = _mm256_div_pd(one, _mm256_max_pd(rv, fl));
    const __m256d inv2 = _mm256_mul_pd(inv, inv);
    const __m256d cent = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(ell + i), inv2), inv);
    const __m256d fld = _mm256_mul_pd(_mm256_loadu_pd(m + i), inv2);
    _mm256_storeu_pd(dr + i, _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(dw + i, _mm256_add_pd(cent, fld));
  }
  for (; i < n; ++i) {
    clamps += r[i] < r_floor;
    elem::rhs_classical(r[i], w[i], ell[i], m[i], r_floor, dr[i], dw[i]);
  }
  return clamps;
}

std::size_t rhs_relativistic(const double* r, const double* w, const double* ell, const double* m, double* dr,
                             double* dw, std::size_t n, double r_floor) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d fl = _mm256_set1_pd(r_floor);
  std::size_t clamps = 0, i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d rv = _mm256_loadu_pd(r + i);
    const __m256d wv = _mm256_loadu_pd(w + i);
    clamps += count_below(rv, fl);
    const __m256d inv = _mm256_div_pd(one, _mm256_max_pd(rv, fl));
    const __m256d inv2 = _mm256_mul_pd(inv, inv);
    const __m256d l2 = _mm256_mul_pd(_mm256_loadu_pd(ell + i), inv2);
    const __m256d g = _mm256_sqrt_pd(_mm256_add_pd(_mm256_add_pd(one, _mm256_mul_pd(wv, wv)), l2));
    _mm256_storeu_pd(dr + i, _mm256_div_pd(wv, g));
    const __m256d cent = _mm256_div_pd(_mm256_mul_pd(l2, inv), g);
    const __m256d fld = _mm256_mul_pd(_mm256_loadu_pd(m + i), inv2);
    _mm256_storeu_pd(dw + i, _mm256_add_pd(cent, fld));
  }
  for (; i < n; ++i) {
    clamps += r[i] < r_floor;
    elem::rhs_relativistic(r[i], w[i], ell[i], m[i], r_floor, dr[i], dw[i]);
  }
  return clamps;
}

void axpy2(const double* r, const double* w, const double* kr, const double* kw, double h, double* out_r,
           double* out_w, std::size_t n) {
  const __m256d hv = _mm256_set1_pd(h);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out_r + i, _mm256_add_pd(_mm256_loadu_pd(r + i), _mm256_mul_pd(hv, _mm256_loadu_pd(kr + i))));
    _mm256_storeu_pd(out_w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(hv, _mm256_loadu_pd(kw + i))));
  }
  for (; i < n; ++i) {
    out_r[i] = r[i] + h * kr[i];
    out_w[i] = w[i] + h * kw[i];
  }
}

inline __m256d rk4_sum(const double* const* k, std::size_t i, __m256d two) {
  const __m256d a = _mm256_add_pd(_mm256_loadu_pd(k[0] + i), _mm256_mul_pd(two, _mm256_loadu_pd(k[1] + i)));
  const __m256d b = _mm256_add_pd(a, _mm256_mul_pd(two, _mm256_loadu_pd(k[2] + i)));
  return _mm256_add_pd(b, _mm256_loadu_pd(k[3] + i));
}

void rk4_combine(double* r, double* w, const Rk4Slopes& k, double dt, std::size_t n) {
  const double c = dt / 6.0;
  const __m256d cv = _mm256_set1_pd(c);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(r + i, _mm256_add_pd(_mm256_loadu_pd(r + i), _mm256_mul_pd(cv, rk4_sum(k.kr, i, two))));
    _mm256_storeu_pd(w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(cv, rk4_sum(k.kw, i, two))));
  }
  for (; i < n; ++i) {
    const double sr = ((k.kr[0][i] + 2.0 * k.kr[1][i]) + 2.0 * k.kr[2][i]) + k.kr[3][i];
    const double sw = ((k.kw[0][i] + 2.0 * k.kw[1][i]) + 2.0 * k.kw[2][i]) + k.kw[3][i];
    r[i] = r[i] + c * sr;
    w[i] = w[i] + c * sw;
  }
}

std::size_t kick(const double* r, const double* m, double h, double* w, std::size_t n, double r_floor) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d fl = _mm256_set1_pd(r_floor);
  const __m256d hv = _mm256_set1_pd(h);
  std::size_t clamps = 0, i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d rv = _mm256_loadu_pd(r + i);
    clamps += count_below(rv, fl);
    const __m256d inv = _mm256_div_pd(one, _mm256_max_pd(rv, fl));
    const __m256d acc = _mm256_mul_pd(_mm256_loadu_pd(m + i), _mm256_mul_pd(inv, inv));
    _mm256_storeu_pd(w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(hv, acc)));
  }
  for (; i < n; ++i) {
    clamps += r[i] < r_floor;
    const double inv = 1.0 / std::max(r[i], r_floor);
    w[i] = w[i] + h * (m[i] * (inv * inv));
  }
  return clamps;
}

template <bool Relativistic>
void free_drift(double* r, double* w, const double* ell, double t, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d tv = _mm256_set1_pd(t);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d rv = _mm256_loadu_pd(r + i);
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d inv = _mm256_div_pd(one, rv);
    const __m256d l2 = _mm256_mul_pd(_mm256_loadu_pd(ell + i), _mm256_mul_pd(inv, inv));
    const __m256d v2 = _mm256_add_pd(_mm256_mul_pd(wv, wv), l2);
    __m256d s = tv;
    if constexpr (Relativistic) s = _mm256_div_pd(tv, _mm256_sqrt_pd(_mm256_add_pd(one, v2)));
    const __m256d a = _mm256_add_pd(rv, _mm256_mul_pd(wv, s));
    const __m256d rt = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(l2, _mm256_mul_pd(s, s))));
    const __m256d wt = _mm256_div_pd(_mm256_add_pd(_mm256_mul_pd(rv, wv), _mm256_mul_pd(v2, s)), rt);
    _mm256_storeu_pd(r + i, rt);
    _mm256_storeu_pd(w + i, wt);
  }
  for (; i < n; ++i) {
    if constexpr (Relativistic)
      elem::free_drift_relativistic(r[i], w[i], ell[i], t);
    else
      elem::free_drift_classical(r[i], w[i], ell[i], t);
  }
}

void free_drift_classical(double* r, double* w, const double* ell, double t, std::size_t n) {
  free_drift<false>(r, w, ell, t, n);
}
void free_drift_relativistic(double* r, double* w, const double* ell, double t, std::size_t n) {
  free_drift<true>(r, w, ell, t, n);
}

template <bool Relativistic>
double kinetic(const double* r, const double* w, const double* ell, const double* mu, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d inv = _mm256_div_pd(one, _mm256_loadu_pd(r + i));
    const __m256d l2 = _mm256_mul_pd(_mm256_loadu_pd(ell + i), _mm256_mul_pd(inv, inv));
    __m256d e;
    if constexpr (Relativistic)
      e = _mm256_sqrt_pd(_mm256_add_pd(_mm256_add_pd(one, _mm256_mul_pd(wv, wv)), l2));
    else
      e = _mm256_add_pd(_mm256_mul_pd(wv, wv), l2);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(mu + i), e));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double inv = 1.0 / r[i];
    const double l2 = ell[i] * (inv * inv);
    s += mu[i] * (Relativistic ? std::sqrt((1.0 + w[i] * w[i]) + l2) : w[i] * w[i] + l2);
  }
  return s;
}

double kinetic_classical(const double* r, const double* w, const double* ell, const double* mu, std::size_t n) {
  return kinetic<false>(r, w, ell, mu, n);
}
double kinetic_relativistic(const double* r, const double* w, const double* ell, const double* mu,
                            std::size_t n) {
  return kinetic<true>(r, w, ell, mu, n);
}

Supremum supremum(const double* r, const double* w, const double* ell, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d mr = _mm256_setzero_pd(), mw = _mm256_setzero_pd(), ms = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d rv = _mm256_loadu_pd(r + i);
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d inv = _mm256_div_pd(one, rv);
    const __m256d sp = _mm256_sqrt_pd(
        _mm256_add_pd(_mm256_mul_pd(wv, wv), _mm256_mul_pd(_mm256_loadu_pd(ell + i), _mm256_mul_pd(inv, inv))));
    mr = _mm256_max_pd(mr, rv);
    mw = _mm256_max_pd(mw, abs_pd(wv));
    ms = _mm256_max_pd(ms, sp);
  }
  Supremum s{hmax(mr), hmax(mw), hmax(ms)};
  for (; i < n; ++i) {
    const double inv = 1.0 / r[i];
    s.r = std::max(s.r, r[i]);
    s.abs_w = std::max(s.abs_w, std::abs(w[i]));
    s.speed = std::max(s.speed, std::sqrt(w[i] * w[i] + ell[i] * (inv * inv)));
  }
  return s;
}

}  // namespace

namespace detail {
const KernelSet kAvx2Kernels{
    Isa::Avx2,            rhs_classical,     rhs_relativistic,     axpy2,
    rk4_combine,          kick,              free_drift_classical, free_drift_relativistic,
    kinetic_classical,    kinetic_relativistic, supremum,
};
}  // namespace detail

}  // namespace shellvp::simd
