#pragma once

// Per-element bodies shared by the scalar kernels and the vector tails.  The
// AVX2 kernels replay these operation sequences lane by lane; keep them in sync.

#include <algorithm>
#include <cmath>

namespace shellvp::simd::elem {

inline void rhs_classical(double r, double w, double ell, double m, double r_floor, double& dr,
                          double& dw) {
  const double rc = std::max(r, r_floor);
  const double inv = 1.0 / rc;
  const double inv2 = inv * inv;
  dr = w;
  dw = (ell * inv2) * inv + m * inv2;
}

inline void rhs_relativistic(double r, double w, double ell, double m, double r_floor, double& dr,
                             double& dw) {
  const double rc = std::max(r, r_floor);
  const double inv = 1.0 / rc;
  const double inv2 = inv * inv;
  const double l2 = ell * inv2;
  const double g = std::sqrt((1.0 + w * w) + l2);
  dr = w / g;
  dw = (l2 * inv) / g + m * inv2;
}

inline void free_drift_classical(double& r, double& w, double ell, double t) {
  const double inv = 1.0 / r;
  const double l2 = ell * (inv * inv);
  const double v2 = w * w + l2;
  const double a = r + w * t;
  const double rt = std::sqrt(a * a + l2 * (t * t));
  w = (r * w + v2 * t) / rt;
  r = rt;
}

inline void free_drift_relativistic(double& r, double& w, double ell, double t) {
  const double inv = 1.0 / r;
  const double l2 = ell * (inv * inv);
  const double v2 = w * w + l2;
  const double g = std::sqrt(1.0 + v2);
  const double s = t / g;
  const double a = r + w * s;
  const double rt = std::sqrt(a * a + l2 * (s * s));
  w = (r * w + v2 * s) / rt;
  r = rt;
}

}  // namespace shellvp::simd::elem
