#include <algorithm>
#include <cmath>

#include "elementwise.hpp"
#include "shellvp/simd/kernels.hpp"

namespace shellvp::simd {
namespace {

std::size_t rhs_classical(const double* r, const double* w, const double* ell, const double* m, double* dr,
                          double* dw, std::size_t n, double r_floor) {
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    clamps += r[i] < r_floor;
    elem::rhs_classical(r[i], w[i], ell[i], m[i], r_floor, dr[i], dw[i]);
  }
  return clamps;
}

std::size_t rhs_relativistic(const double* r, const double* w, const double* ell, const double* m, double* dr,
                             double* dw, std::size_t n, double r_floor) {
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    clamps += r[i] < r_floor;
    elem::rhs_relativistic(r[i], w[i], ell[i], m[i], r_floor, dr[i], dw[i]);
  }
  return clamps;
}

void axpy2(const double* r, const double* w, const double* kr, const double* kw, double h, double* out_r,
           double* out_w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out_r[i] = r[i] + h * kr[i];
    out_w[i] = w[i] + h * kw[i];
  }
}

void rk4_combine(double* r, double* w, const Rk4Slopes& k, double dt, std::size_t n) {
  const double c = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sr = ((k.kr[0][i] + 2.0 * k.kr[1][i]) + 2.0 * k.kr[2][i]) + k.kr[3][i];
    const double sw = ((k.kw[0][i] + 2.0 * k.kw[1][i]) + 2.0 * k.kw[2][i]) + k.kw[3][i];
    r[i] = r[i] + c * sr;
    w[i] = w[i] + c * sw;
  }
}

std::size_t kick(const double* r, const double* m, double h, double* w, std::size_t n, double r_floor) {
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    clamps += r[i] < r_floor;
    const double inv = 1.0 / std::max(r[i], r_floor);
    w[i] = w[i] + h * (m[i] * (inv * inv));
  }
  return clamps;
}

void free_drift_classical(double* r, double* w, const double* ell, double t, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) elem::free_drift_classical(r[i], w[i], ell[i], t);
}

void free_drift_relativistic(double* r, double* w, const double* ell, double t, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) elem::free_drift_relativistic(r[i], w[i], ell[i], t);
}

double kinetic_classical(const double* r, const double* w, const double* ell, const double* mu,
                         std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double inv = 1.0 / r[i];
    s += mu[i] * (w[i] * w[i] + ell[i] * (inv * inv));
  }
  return s;
}

double kinetic_relativistic(const double* r, const double* w, const double* ell, const double* mu,
                            std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double inv = 1.0 / r[i];
    s += mu[i] * std::sqrt((1.0 + w[i] * w[i]) + ell[i] * (inv * inv));
  }
  return s;
}

Supremum supremum(const double* r, const double* w, const double* ell, std::size_t n) {
  Supremum s;
  for (std::size_t i = 0; i < n; ++i) {
    const double inv = 1.0 / r[i];
    s.r = std::max(s.r, r[i]);
    s.abs_w = std::max(s.abs_w, std::abs(w[i]));
    s.speed = std::max(s.speed, std::sqrt(w[i] * w[i] + ell[i] * (inv * inv)));
  }
  return s;
}

}  // namespace

namespace detail {
const KernelSet kScalarKernels{
    Isa::Scalar,          rhs_classical,     rhs_relativistic,     axpy2,
    rk4_combine,          kick,              free_drift_classical, free_drift_relativistic,
    kinetic_classical,    kinetic_relativistic, supremum,
};
}  // namespace detail

}  // namespace shellvp::simd
