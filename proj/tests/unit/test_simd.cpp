#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "shellvp/simd/kernels.hpp"

using namespace shellvp::simd;

namespace {

struct Data {
  std::vector<double> r, w, ell, m, mu;
};

Data make_data(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ur(0.2, 5.0), uw(-2.0, 2.0), ul(0.0, 3.0), um(0.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    d.r.push_back(ur(gen));
    d.w.push_back(uw(gen));
    d.ell.push_back(i % 7 == 0 ? 0.0 : ul(gen));
    d.m.push_back(um(gen));
    d.mu.push_back(um(gen));
  }
  d.r[0] = 1e-12;  // below the force floor
  return d;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("vector kernels match the scalar reference") {
  if (!isa_available(Isa::Avx2)) {
    MESSAGE("AVX2 unavailable; only the scalar set is exercised");
    return;
  }
  const KernelSet& s = kernels_for(Isa::Scalar);
  const KernelSet& v = kernels_for(Isa::Avx2);
  for (std::size_t n : {1u, 3u, 4u, 5u, 17u, 1001u}) {
    const Data d = make_data(n, static_cast<unsigned>(n));
    std::vector<double> a1(n), b1(n), a2(n), b2(n);

    CHECK(s.rhs_classical(d.r.data(), d.w.data(), d.ell.data(), d.m.data(), a1.data(), b1.data(), n, 1e-8) ==
          v.rhs_classical(d.r.data(), d.w.data(), d.ell.data(), d.m.data(), a2.data(), b2.data(), n, 1e-8));
    CHECK((same_bits(a1, a2) && same_bits(b1, b2)));
    CHECK(s.rhs_relativistic(d.r.data(), d.w.data(), d.ell.data(), d.m.data(), a1.data(), b1.data(), n, 1e-8) ==
          v.rhs_relativistic(d.r.data(), d.w.data(), d.ell.data(), d.m.data(), a2.data(), b2.data(), n, 1e-8));
    CHECK((same_bits(a1, a2) && same_bits(b1, b2)));

    s.axpy2(d.r.data(), d.w.data(), d.m.data(), d.mu.data(), 0.37, a1.data(), b1.data(), n);
    v.axpy2(d.r.data(), d.w.data(), d.m.data(), d.mu.data(), 0.37, a2.data(), b2.data(), n);
    CHECK((same_bits(a1, a2) && same_bits(b1, b2)));

    {
      std::vector<double> r1 = d.r, w1 = d.w, r2 = d.r, w2 = d.w;
      const Rk4Slopes k{{d.m.data(), d.mu.data(), d.w.data(), d.ell.data()},
                        {d.mu.data(), d.m.data(), d.ell.data(), d.w.data()}};
      s.rk4_combine(r1.data(), w1.data(), k, 0.01, n);
      v.rk4_combine(r2.data(), w2.data(), k, 0.01, n);
      CHECK((same_bits(r1, r2) && same_bits(w1, w2)));
    }
    {
      std::vector<double> w1 = d.w, w2 = d.w;
      CHECK(s.kick(d.r.data(), d.m.data(), 0.05, w1.data(), n, 1e-8) ==
            v.kick(d.r.data(), d.m.data(), 0.05, w2.data(), n, 1e-8));
      CHECK(same_bits(w1, w2));
    }
    for (int model = 0; model < 2; ++model) {
      std::vector<double> r1 = d.r, w1 = d.w, r2 = d.r, w2 = d.w;
      r1[0] = r2[0] = 1.0;
      auto fs = model ? s.free_drift_relativistic : s.free_drift_classical;
      auto fv = model ? v.free_drift_relativistic : v.free_drift_classical;
      fs(r1.data(), w1.data(), d.ell.data(), 0.7, n);
      fv(r2.data(), w2.data(), d.ell.data(), 0.7, n);
      CHECK((same_bits(r1, r2) && same_bits(w1, w2)));
    }

    const double kc1 = s.kinetic_classical(d.r.data(), d.w.data(), d.ell.data(), d.mu.data(), n);
    const double kc2 = v.kinetic_classical(d.r.data(), d.w.data(), d.ell.data(), d.mu.data(), n);
    CHECK(std::abs(kc1 - kc2) <= 1e-13 * std::abs(kc1));
    const double kr1 = s.kinetic_relativistic(d.r.data(), d.w.data(), d.ell.data(), d.mu.data(), n);
    const double kr2 = v.kinetic_relativistic(d.r.data(), d.w.data(), d.ell.data(), d.mu.data(), n);
    CHECK(std::abs(kr1 - kr2) <= 1e-13 * std::abs(kr1));

    std::vector<double> rr = d.r;
    rr[0] = 1.0;
    const Supremum p = s.supremum(rr.data(), d.w.data(), d.ell.data(), n);
    const Supremum q = v.supremum(rr.data(), d.w.data(), d.ell.data(), n);
    CHECK(p.r == q.r);
    CHECK(p.abs_w == q.abs_w);
    CHECK(p.speed == q.speed);
  }
}

TEST_CASE("rhs clamp counts the floored radii") {
  const KernelSet& s = kernels_for(Isa::Scalar);
  const double r[2] = {1e-12, 1.0}, w[2] = {0, 0}, ell[2] = {0, 1}, m[2] = {1, 1};
  double dr[2], dw[2];
  CHECK(s.rhs_classical(r, w, ell, m, dr, dw, 2, 1e-8) == 1);
  CHECK(dw[0] == doctest::Approx(1e16));
  CHECK(dw[1] == 2.0);
}
