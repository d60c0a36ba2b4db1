#include "shellvp/profile.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace shellvp {
namespace {

// C^1 bump on [lo, hi] peaking at 1 in the middle.
double box_bump(double x, const Interval& iv) {
  if (!(x > iv.lo && x < iv.hi)) return 0.0;
  const double s = (x - iv.lo) / iv.width();
  return smoothstep5(1.0 - std::abs(2.0 * s - 1.0));
}

// Tapers to zero over the outer 10% of the interval at each end.
double edge_taper(double x, const Interval& iv) {
  if (!(x > iv.lo && x < iv.hi)) return 0.0;
  const double band = 0.1 * iv.width();
  const double d = std::min(x - iv.lo, iv.hi - x);
  return d >= band ? 1.0 : smoothstep5(d / band);
}

Interval truncated(const Interval& box, double c, double s) {
  return {std::max(box.lo, c - 3.0 * s), std::min(box.hi, c + 3.0 * s)};
}

}  // namespace

double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

void Profile::validate() const {
  if (!(r.width() > 0.0 && w.width() > 0.0 && ell.width() > 0.0))
    throw std::invalid_argument("profile support box must have positive volume");
  if (r.lo < 0.0) throw std::invalid_argument("profile r interval must lie in [0, inf)");
  if (ell.lo < 0.0) throw std::invalid_argument("profile ell interval must lie in [0, inf)");
  if (!(amplitude >= 0.0)) throw std::invalid_argument("profile amplitude must be nonnegative");
  if (kind == ProfileKind::ShellGaussian) {
    if (!(sigma.r > 0.0 && sigma.w > 0.0 && sigma.ell > 0.0))
      throw std::invalid_argument("shell_gaussian sigmas must be positive");
    if (!(support_r().width() > 0.0 && support_w().width() > 0.0 && support_ell().width() > 0.0))
      throw std::invalid_argument("shell_gaussian truncation does not intersect the box");
  }
}

Interval Profile::support_r() const {
  return kind == ProfileKind::ShellGaussian ? truncated(r, center.r, sigma.r) : r;
}
Interval Profile::support_w() const {
  return kind == ProfileKind::ShellGaussian ? truncated(w, center.w, sigma.w) : w;
}
Interval Profile::support_ell() const {
  return kind == ProfileKind::ShellGaussian ? truncated(ell, center.ell, sigma.ell) : ell;
}

double profile_eval(const Profile& p, const RadialPoint& x) {
  switch (p.kind) {
    case ProfileKind::SmoothBox:
      return p.amplitude * box_bump(x.r, p.r) * box_bump(x.w, p.w) * box_bump(x.ell, p.ell);
    case ProfileKind::ShellGaussian: {
      const Interval sr = p.support_r(), sw = p.support_w(), sl = p.support_ell();
      const double taper = edge_taper(x.r, sr) * edge_taper(x.w, sw) * edge_taper(x.ell, sl);
      if (taper == 0.0) return 0.0;
      const double dr = (x.r - p.center.r) / p.sigma.r;
      const double dw = (x.w - p.center.w) / p.sigma.w;
      const double dl = (x.ell - p.center.ell) / p.sigma.ell;
      return p.amplitude * std::exp(-(dr * dr + dw * dw + dl * dl)) * taper;
    }
  }
  return 0.0;
}

Ensemble build_ensemble(const Profile& p, const QuadratureSpec& q, ModelTag model) {
  p.validate();
  if (q.n_r < 1 || q.n_w < 1 || q.n_ell < 1)
    throw std::invalid_argument("quadrature counts must be >= 1");

  const Interval sr = p.support_r(), sw = p.support_w(), sl = p.support_ell();
  const double hr = sr.width() / q.n_r;
  const double hw = sw.width() / q.n_w;
  const double hl = sl.width() / q.n_ell;
  const double cell = 4.0 * std::numbers::pi * std::numbers::pi * hr * hw * hl;

  Ensemble e(model, 0.0);
  e.reserve(q.count());
  for (int i = 0; i < q.n_r; ++i) {
    const double r = sr.lo + (i + 0.5) * hr;
    for (int j = 0; j < q.n_w; ++j) {
      const double w = sw.lo + (j + 0.5) * hw;
      for (int k = 0; k < q.n_ell; ++k) {
        const RadialPoint node{r, w, sl.lo + (k + 0.5) * hl};
        const double mu = cell * profile_eval(p, node);
        if (mu > 0.0) e.push_back({node, mu});
      }
    }
  }
  if (e.empty()) throw std::invalid_argument("initial ensemble is empty: every quadrature weight vanished");
  return e;
}

EllBound check_ell_bound(const Ensemble& e) {
  if (e.empty()) throw std::invalid_argument("check_ell_bound: empty ensemble");
  const auto ell = e.ell();
  const double lmin = *std::min_element(ell.begin(), ell.end());
  return {lmin > 0.0, lmin};
}

}  // namespace shellvp
