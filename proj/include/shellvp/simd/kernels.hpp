#pragma once

// Data-parallel inner loops of the particle push and the per-record reductions.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2 variant.
// The variant is picked once at first use from CPUID (SHELLVP_ISA=scalar|avx2
// overrides).  Elementwise kernels are bitwise identical across variants: both
// perform the same IEEE operations in the same order and the build disables FMA
// contraction.  Sum reductions use 4 lanes in the vector variant and agree with
// the scalar reference to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace shellvp::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

struct Supremum {
  double r = 0.0;      // max r
  double abs_w = 0.0;  // max |w|
  double speed = 0.0;  // max sqrt(w^2 + ell/r^2)
};

struct Rk4Slopes {
  const double* kr[4];
  const double* kw[4];
};

struct KernelSet {
  Isa isa;

  // dr/dt, dw/dt of the classical / relativistic characteristics.  Radii below
  // r_floor are clamped to r_floor in the force; the return value counts them.
  std::size_t (*rhs_classical)(const double* r, const double* w, const double* ell, const double* m,
                               double* dr, double* dw, std::size_t n, double r_floor);
  std::size_t (*rhs_relativistic)(const double* r, const double* w, const double* ell, const double* m,
                                  double* dr, double* dw, std::size_t n, double r_floor);

  // out = x + h k for both coordinates.
  void (*axpy2)(const double* r, const double* w, const double* kr, const double* kw, double h,
                double* out_r, double* out_w, std::size_t n);

  // x += dt/6 (k1 + 2 k2 + 2 k3 + k4) for both coordinates.
  void (*rk4_combine)(double* r, double* w, const Rk4Slopes& k, double dt, std::size_t n);

  // w += h m / max(r, r_floor)^2; returns the clamp count.
  std::size_t (*kick)(const double* r, const double* m, double h, double* w, std::size_t n, double r_floor);

  // Exact field-free flow over time t (in place).
  void (*free_drift_classical)(double* r, double* w, const double* ell, double t, std::size_t n);
  void (*free_drift_relativistic)(double* r, double* w, const double* ell, double t, std::size_t n);

  // sum mu (w^2 + ell/r^2) and sum mu sqrt(1 + w^2 + ell/r^2).
  double (*kinetic_classical)(const double* r, const double* w, const double* ell, const double* mu,
                              std::size_t n);
  double (*kinetic_relativistic)(const double* r, const double* w, const double* ell, const double* mu,
                                 std::size_t n);

  Supremum (*supremum)(const double* r, const double* w, const double* ell, std::size_t n);
};

bool isa_available(Isa isa);

/// Kernels for a specific instruction set; throws std::runtime_error if the CPU lacks it.
const KernelSet& kernels_for(Isa isa);

/// Best available kernels (cached).
const KernelSet& kernels();

namespace detail {
extern const KernelSet kScalarKernels;
#if defined(SHELLVP_HAVE_AVX2)
extern const KernelSet kAvx2Kernels;
#endif
}  // namespace detail

}  // namespace shellvp::simd
