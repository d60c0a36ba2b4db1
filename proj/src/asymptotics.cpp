#include "shellvp/asymptotics.hpp"

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shellvp {
namespace {

double tail_quantity(const RadialPoint& s, ModelTag model) {
  const double a = s.w * s.w + s.ell / (s.r * s.r);
  return model == ModelTag::Classical ? std::sqrt(a) : std::sqrt(1.0 + a);
}

double rel_diff(double a, double b) {
  const double d = std::max(std::abs(a), std::abs(b));
  return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

double rel_err(double value, double reference) {
  return reference == 0.0 ? std::abs(value) : std::abs(value - reference) / std::abs(reference);
}

}  // namespace

// ---------------------------------------------------------------------------
// W_inf estimators

double winf_late(double t1, const RadialPoint& s1, double t2, const RadialPoint& s2, ModelTag model) {
  if (!(s2.w > 0.0)) throw std::invalid_argument("winf_late: needs W(t_end) > 0");
  if (!(t2 > t1) || !(t1 > -1.0)) return s2.w;
  const double x1 = tail_quantity(s1, model);
  const double x2 = tail_quantity(s2, model);
  const double xinf = x2 + (x2 - x1) * (1.0 + t1) / (t2 - t1);
  double w = s2.w;
  if (model == ModelTag::Classical) {
    w = xinf;
  } else if (xinf > 1.0) {
    w = std::sqrt(xinf * xinf - 1.0);
  }
  if (!std::isfinite(w)) return s2.w;
  return std::max(w, s2.w);
}

double winf_late(const Trajectory& tr, ModelTag model, double min_t_end) {
  if (tr.size() < 2) throw std::invalid_argument("winf_late: trajectory needs two samples");
  if (tr.times.back() < min_t_end) throw std::invalid_argument("winf_late: trajectory ends before the minimum time");
  const std::size_t n = tr.size();
  return winf_late(tr.times[n - 2], tr.states[n - 2], tr.times[n - 1], tr.states[n - 1], model);
}

WinfIntegral winf_integral(const Trajectory& tr, ModelTag model) {
  if (tr.empty()) throw std::invalid_argument("winf_integral: empty trajectory");
  if (tr.field_mass.size() != tr.size()) throw std::invalid_argument("winf_integral: missing field samples");
  const RadialPoint& p0 = tr.initial();
  const bool radial = p0.ell == 0.0;
  auto integrand = [&](std::size_t k) {
    const RadialPoint& s = tr.states[k];
    const double e = tr.field_mass[k] / (s.r * s.r);
    return radial ? e : e * s.w / tail_quantity(s, model);
  };
  double integral = 0.0;
  double prev = integrand(0);
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double cur = integrand(k);
    integral += 0.5 * (prev + cur) * (tr.times[k] - tr.times[k - 1]);
    prev = cur;
  }
  WinfIntegral out;
  out.tail = prev * tr.times.back();
  integral += out.tail;
  if (radial) {
    out.value = p0.w + integral;
  } else if (model == ModelTag::Classical) {
    out.value = tail_quantity(p0, model) + integral;
  } else {
    const double g = tail_quantity(p0, model) + integral;
    if (!(g >= 1.0)) throw std::runtime_error("winf_integral: limiting Lorentz factor below 1 (corrupt trajectory)");
    out.value = std::sqrt(g * g - 1.0);
    // Report the tail in momentum units.
    out.tail = out.value > 0.0 ? out.tail * g / out.value : out.tail;
  }
  return out;
}

WinfEstimate estimate_winf(const Trajectory& tr, ModelTag model) {
  WinfEstimate e;
  e.particle = tr.particle;
  e.w_inf_late = winf_late(tr, model);
  const WinfIntegral wi = winf_integral(tr, model);
  e.w_inf_integral = wi.value;
  e.tail = wi.tail;
  e.rel_diff = rel_diff(e.w_inf_late, e.w_inf_integral);
  const double scale = std::abs(e.w_inf_late);
  const double tol = std::max(0.01, scale > 0.0 ? 3.0 * std::abs(e.tail) / scale : 0.0);
  e.agree = e.rel_diff <= tol;
  return e;
}

RateCheck winf_rate_check(const Trajectory& tr, double w_inf, double t_min, double t_max) {
  std::vector<double> t, d;
  std::size_t in_window = 0;
  const double floor = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(w_inf));
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (tr.times[k] < t_min || tr.times[k] > t_max) continue;
    ++in_window;
    const double diff = std::abs(tr.states[k].w - w_inf);
    if (diff > floor) {
      t.push_back(tr.times[k]);
      d.push_back(diff);
    }
  }
  RateCheck rc;
  if (in_window >= kMinFitSamples && t.size() < kMinFitSamples) {
    rc.degenerate = true;
    return rc;
  }
  rc.fit = fit_exponent_shifted(t, d, t_min, t_max);
  return rc;
}

ResidualSeries spatial_asymptote_residual(const Trajectory& tr, double w_inf, ModelTag model) {
  if (tr.empty()) throw std::invalid_argument("spatial_asymptote_residual: empty trajectory");
  const double v = model == ModelTag::Classical ? w_inf : w_inf / std::sqrt(1.0 + w_inf * w_inf);
  const double tau = tr.times.front();
  const double r = tr.initial().r;
  ResidualSeries s;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    s.times.push_back(tr.times[k]);
    s.residual.push_back(tr.states[k].r - r - v * (tr.times[k] - tau));
  }
  // residual ~ a + b ln(1 + t)
  const double n = static_cast<double>(s.times.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    mx += std::log1p(s.times[k]);
    my += s.residual[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double x = std::log1p(s.times[k]) - mx;
    sxx += x * x;
    sxy += x * (s.residual[k] - my);
  }
  s.log_coefficient = sxx > 0.0 ? sxy / sxx : 0.0;
  s.log_intercept = my - s.log_coefficient * mx;
  return s;
}

double residual_log_ratio_max(const ResidualSeries& s, double a, double b) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double t = s.times[k];
    if (t < a || t > b || !(t > 0.0)) continue;
    m = std::max(m, std::abs(s.residual[k]) / std::log1p(t));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sensitivity

std::vector<SensitivitySeries> characteristic_sensitivity(const std::vector<ProbePair>& pairs) {
  std::vector<SensitivitySeries> out;
  for (const ProbePair& p : pairs) {
    if (p.minus.size() != p.plus.size()) throw std::invalid_argument("probe pair samples differ in length");
    if (!(p.delta_w > 0.0)) throw std::invalid_argument("probe pair with delta_w <= 0");
    SensitivitySeries s;
    s.parent = p.parent;
    s.tau = p.tau;
    s.delta_w = p.delta_w;
    const double h = 2.0 * p.delta_w;
    for (std::size_t k = 0; k < p.minus.size(); ++k) {
      const RadialPoint& a = p.minus.states[k];
      const RadialPoint& b = p.plus.states[k];
      s.times.push_back(p.minus.times[k]);
      s.dr.push_back(std::abs(b.r - a.r) / h);
      s.dw.push_back(std::abs(b.w - a.w) / h);
      if (std::abs(b.w - a.w) > kNonlinearSeparation) s.nonlinear = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

RunResult probe_run(const Ensemble& e, const StepConfig& cfg, double tau, double delta_w,
                    const std::vector<std::size_t>& parents) {
  if (!(delta_w > 0.0)) throw std::invalid_argument("delta_w must be positive");
  RunOptions o;
  o.probes = ProbeSpec{tau, delta_w, parents};
  o.diagnostics.field_off = cfg.free_streaming;
  return run(e, cfg, o);
}

}  // namespace

std::vector<SensitivitySeries> characteristic_sensitivity(const Ensemble& e, const StepConfig& cfg, double tau,
                                                          double delta_w, const std::vector<std::size_t>& parents) {
  return characteristic_sensitivity(probe_run(e, cfg, tau, delta_w, parents).probes);
}

double sensitivity_growth(const SensitivitySeries& s) {
  if (s.times.empty()) throw std::invalid_argument("sensitivity_growth: empty series");
  const double t_end = s.times.back();
  const double late_from = t_end - (t_end - s.tau) / 10.0;
  const double early_to = 0.5 * (s.tau + t_end);
  double late = 0.0, early = 0.0;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    if (s.times[k] >= late_from) late = std::max(late, s.dw[k]);
    if (s.times[k] <= early_to) early = std::max(early, s.dw[k]);
  }
  return early > 0.0 ? late / early : std::numeric_limits<double>::infinity();
}

std::vector<double> dwinf_dw(const std::vector<ProbePair>& pairs, ModelTag model) {
  std::vector<double> out;
  for (const ProbePair& p : pairs)
    out.push_back((winf_late(p.plus, model) - winf_late(p.minus, model)) / (2.0 * p.delta_w));
  return out;
}

std::vector<double> dwinf_dw(const Ensemble& e, const StepConfig& cfg, double tau, double delta_w,
                             const std::vector<std::size_t>& parents) {
  return dwinf_dw(probe_run(e, cfg, tau, delta_w, parents).probes, e.model());
}

// ---------------------------------------------------------------------------
// Momentum grids

std::int64_t Axis::bin(double x) const {
  if (!(x >= lo && x <= hi)) return -1;
  const auto k = static_cast<std::int64_t>(std::floor((x - lo) / width()));
  return std::min<std::int64_t>(k, static_cast<std::int64_t>(count) - 1);
}

MomentumGrid::MomentumGrid(Axis u, Axis ell) : u_(u), ell_(ell) {
  if (u.count == 0 || ell.count == 0 || !(u.hi > u.lo) || !(ell.hi > ell.lo))
    throw std::invalid_argument("MomentumGrid: axes need hi > lo and at least one bin");
}

void MomentumGrid::add(double u, double ell, double mu) {
  const std::int64_t iu = u_.bin(u), il = ell_.bin(ell);
  if (iu < 0 || il < 0)
    throw std::out_of_range("MomentumGrid: point (" + std::to_string(u) + ", " + std::to_string(ell) +
                            ") outside the grid");
  cells_[{static_cast<std::size_t>(iu), static_cast<std::size_t>(il)}] += mu;
  binned_mass_ += mu;
}

double MomentumGrid::cell_mass(std::size_t iu, std::size_t il) const {
  const auto it = cells_.find({iu, il});
  return it == cells_.end() ? 0.0 : it->second;
}

double MomentumGrid::value(std::size_t iu, std::size_t il) const {
  return cell_mass(iu, il) / (kFourPiSquared * u_.width() * ell_.width());
}

double MomentumGrid::integrated_mass() const {
  const double area = u_.width() * ell_.width();
  double s = 0.0;
  for (const auto& [key, m] : cells_) s += (m / (kFourPiSquared * area)) * area;
  return kFourPiSquared * s;
}

MomentumGrid spatial_average(const Ensemble& e, const Axis& w_axis, const Axis& ell_axis) {
  MomentumGrid g(w_axis, ell_axis);
  const auto w = e.w(), ell = e.ell(), mu = e.weight();
  for (std::size_t i = 0; i < e.size(); ++i) g.add(w[i], ell[i], mu[i]);
  return g;
}

MomentumGrid build_finf(const Ensemble& e, std::span<const double> winf, const Axis& u_axis, const Axis& ell_axis) {
  if (winf.size() != e.size()) throw std::invalid_argument("build_finf: one W_inf per particle required");
  MomentumGrid g(u_axis, ell_axis);
  const auto ell = e.ell(), mu = e.weight();
  for (std::size_t i = 0; i < e.size(); ++i) g.add(winf[i], ell[i], mu[i]);
  return g;
}

std::vector<double> winf_from_states(const Ensemble& earlier, const Ensemble& later) {
  if (earlier.size() != later.size() || earlier.model() != later.model())
    throw std::invalid_argument("winf_from_states: states from different runs");
  std::vector<double> out(later.size());
  for (std::size_t i = 0; i < later.size(); ++i)
    out[i] = winf_late(earlier.time(), earlier.state(i), later.time(), later.state(i), later.model());
  return out;
}

double T3Report::max_rel_err() const {
  double m = std::max(mass_rel_err, energy_rel_err);
  for (double c : casimir_rel_err) m = std::max(m, c);
  return m;
}

T3Report check_t3_identities(const MomentumGrid& finf, const DiagnosticRecord& reference,
                             const std::vector<CasimirSpec>& casimirs, ModelTag model) {
  if (reference.casimirs.size() != casimirs.size())
    throw std::invalid_argument("check_t3_identities: reference casimirs do not match the list");
  T3Report rep;
  rep.mass_rel_err = rel_err(finf.integrated_mass(), reference.total_mass);
  for (std::size_t c = 0; c < casimirs.size(); ++c) {
    const CasimirSpec& phi = casimirs[c];
    rep.casimir_names.push_back(phi.name());
    rep.casimir_rel_err.push_back(
        rel_err(finf.integrate([&](double, double ell) { return phi(ell); }), reference.casimirs[c]));
  }
  constexpr double two_pi_sq = 0.5 * MomentumGrid::kFourPiSquared;
  const double energy =
      model == ModelTag::Classical
          ? two_pi_sq * finf.integrate([](double u, double) { return u * u; })
          : MomentumGrid::kFourPiSquared * finf.integrate([](double u, double) { return std::sqrt(1.0 + u * u); });
  rep.energy_rel_err = rel_err(energy, reference.total_energy);
  return rep;
}

OmegaSets omega_sets(std::span<const double> winf, std::span<const double> ell) {
  if (winf.empty() || ell.empty()) throw std::invalid_argument("omega_sets: empty input");
  OmegaSets o;
  const auto [wl, wh] = std::minmax_element(winf.begin(), winf.end());
  const auto [ll, lh] = std::minmax_element(ell.begin(), ell.end());
  o.w_lo = *wl;
  o.w_hi = *wh;
  o.ell_lo = *ll;
  o.ell_hi = *lh;
  return o;
}

std::vector<double> continue_winf(const Ensemble& snapshot, const FieldHistory& history, double dt, int threads) {
  if (history.empty()) throw std::invalid_argument("continue_winf: empty field history");
  if (!(dt > 0.0)) throw std::invalid_argument("continue_winf: dt must be positive");
  const double t0 = snapshot.time();
  const double t_end = history.times().back();
  if (!(t_end > t0)) throw std::invalid_argument("continue_winf: field history ends before the snapshot");
  const std::size_t n = static_cast<std::size_t>(std::ceil((t_end - t0) / dt - 1e-9));
  const double h = (t_end - t0) / static_cast<double>(n);
  const ModelTag model = snapshot.model();

  // Brackets at every half step.
  std::vector<FieldHistory::Bracket> br(2 * n + 1);
  for (std::size_t j = 0; j <= 2 * n; ++j) br[j] = history.bracket(t0 + 0.5 * h * static_cast<double>(j));
  auto mass = [&](std::size_t j, double r) {
    const FieldHistory::Bracket& b = br[j];
    if (b.k0 == b.k1) return history.mass_in(b.k0, r);
    return (1.0 - b.f) * history.mass_in(b.k0, r) + b.f * history.mass_in(b.k1, r);
  };
  auto rhs = [&](const RadialPoint& p, double m) {
    if (!(p.r > 0.0)) throw StepAborted("continue_winf: particle reached r <= 0");
    return model == ModelTag::Classical ? rhs_classical(p, m) : rhs_relativistic(p, m);
  };

  std::vector<double> out(snapshot.size());
  auto body = [&](std::size_t a, std::size_t b) {
    for (std::size_t i = a; i < b; ++i) {
      RadialPoint p = snapshot.state(i), prev = p;
      for (std::size_t k = 0; k < n; ++k) {
        prev = p;
        const Derivative k1 = rhs(p, mass(2 * k, p.r));
        const RadialPoint p2{p.r + 0.5 * h * k1.dr, p.w + 0.5 * h * k1.dw, p.ell};
        const Derivative k2 = rhs(p2, mass(2 * k + 1, p2.r));
        const RadialPoint p3{p.r + 0.5 * h * k2.dr, p.w + 0.5 * h * k2.dw, p.ell};
        const Derivative k3 = rhs(p3, mass(2 * k + 1, p3.r));
        const RadialPoint p4{p.r + h * k3.dr, p.w + h * k3.dw, p.ell};
        const Derivative k4 = rhs(p4, mass(2 * k + 2, p4.r));
        p.r += h / 6.0 * (((k1.dr + 2.0 * k2.dr) + 2.0 * k3.dr) + k4.dr);
        p.w += h / 6.0 * (((k1.dw + 2.0 * k2.dw) + 2.0 * k3.dw) + k4.dw);
      }
      const double t1 = n > 1 ? t_end - h : t0;
      out[i] = winf_late(t1, prev, t_end, p, model);
    }
  };
  if (threads > 1) {
    tbb::task_arena arena(threads);
    arena.execute([&] {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, snapshot.size(), 256),
                        [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); });
    });
  } else {
    body(0, snapshot.size());
  }
  return out;
}

OmegaInvariance omega_invariance(const Ensemble& snap_a, const Ensemble& snap_b, const FieldHistory& history,
                                 double dt, int threads) {
  OmegaInvariance o;
  o.t_a = snap_a.time();
  o.t_b = snap_b.time();
  const auto wa = continue_winf(snap_a, history, dt, threads);
  const auto wb = continue_winf(snap_b, history, dt, threads);
  o.a = omega_sets(wa, snap_a.ell());
  o.b = omega_sets(wb, snap_b.ell());
  o.w_lo_rel = rel_diff(o.a.w_lo, o.b.w_lo);
  o.w_hi_rel = rel_diff(o.a.w_hi, o.b.w_hi);
  o.ell_exact = o.a.ell_lo == o.b.ell_lo && o.a.ell_hi == o.b.ell_hi;
  return o;
}

std::size_t fconv_u_bins_for(std::size_t n, std::size_t ell_bins) {
  const double u = std::round(std::sqrt(static_cast<double>(n)) / static_cast<double>(std::max<std::size_t>(ell_bins, 1)));
  return std::max<std::size_t>(4, static_cast<std::size_t>(u));
}

FconvReport fconv_check(std::span<const double> times, const std::vector<MomentumGrid>& series,
                        const MomentumGrid& finf, double t_min, double t_max) {
  if (times.size() != series.size()) throw std::invalid_argument("fconv_check: one time per grid required");
  FconvReport rep;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (!series[k].same_axes(finf)) throw std::invalid_argument("fconv_check: grids do not share bin edges");
    if (times[k] < t_min || times[k] > t_max) continue;
    const double scale = 1.0 / (MomentumGrid::kFourPiSquared * finf.u_axis().width() * finf.ell_axis().width());
    double sup = 0.0;
    const auto& a = series[k].cells();
    const auto& b = finf.cells();
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
      double d;
      if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
        d = ia->second;
        ++ia;
      } else if (ia == a.end() || ib->first < ia->first) {
        d = ib->second;
        ++ib;
      } else {
        d = ia->second - ib->second;
        ++ia;
        ++ib;
      }
      sup = std::max(sup, std::abs(d) * scale);
    }
    rep.times.push_back(times[k]);
    rep.sup_diff.push_back(sup);
  }
  if (rep.times.size() < kMinFitSamples)
    throw std::invalid_argument("fconv_check: fewer than 8 grids in the window");
  const std::size_t half = rep.sup_diff.size() / 2;
  const double first = *std::max_element(rep.sup_diff.begin(), rep.sup_diff.begin() + half);
  const double second = *std::max_element(rep.sup_diff.begin() + half, rep.sup_diff.end());
  rep.eventually_decreasing = second <= first;
  // Once every particle sits in its limiting cell the histogram difference is
  // exactly zero; a power law through the remaining quantized values means nothing.
  if (rep.sup_diff.back() == 0.0) {
    rep.degenerate = true;
    rep.pass = rep.eventually_decreasing;
    return rep;
  }
  std::vector<double> t, d;
  for (std::size_t k = 0; k < rep.times.size(); ++k)
    if (rep.sup_diff[k] > 0.0) {
      t.push_back(rep.times[k]);
      d.push_back(rep.sup_diff[k]);
    }
  if (t.size() < kMinFitSamples) return rep;
  rep.fit = fit_exponent(t, d, t_min, t_max);
  rep.pass = rep.eventually_decreasing && rep.fit.slope <= kFconvMaxSlope;
  return rep;
}

}  // namespace shellvp
