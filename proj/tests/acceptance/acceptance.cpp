// Desk-scale acceptance suite.  Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "shellvp/asymptotics.hpp"
#include "shellvp/diagnostics.hpp"
#include "shellvp/dynamics.hpp"
#include "shellvp/format.hpp"
#include "shellvp/profile.hpp"

using namespace shellvp;

namespace {

constexpr double kTEnd = 200.0;
constexpr double kDt = 5e-3;
constexpr double kTau = kTEnd / 4.0;

int g_failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  criterion %2d  %-34s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Profile reference_profile() {
  Profile p;
  p.kind = ProfileKind::SmoothBox;
  p.r = {1.0, 2.0};
  p.w = {-0.5, 0.5};
  p.ell = {0.5, 1.5};
  p.amplitude = 1.0;
  return p;
}

QuadratureSpec reference_grid() { return QuadratureSpec{32, 16, 32}; }

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

StepConfig reference_step(double dt) {
  StepConfig c;
  c.dt = dt;
  c.t_end = kTEnd;
  c.record_every = static_cast<int>(std::lround(0.05 / dt));
  c.integrator = Integrator::KdkLeapfrog;
  c.threads = threads();
  return c;
}

struct Series {
  std::vector<double> t;
  std::vector<std::vector<double>> cols;
};

std::vector<double> column(const RunResult& r, const std::function<double(const DiagnosticRecord&)>& f) {
  std::vector<double> out;
  for (const auto& rec : r.records) out.push_back(f(rec));
  return out;
}

std::vector<double> times(const RunResult& r) {
  return column(r, [](const DiagnosticRecord& d) { return d.time; });
}

double max_energy_drift(const RunResult& r) {
  const double e0 = r.records.front().total_energy;
  double m = 0.0;
  for (const auto& rec : r.records) m = std::max(m, std::abs(rec.total_energy - e0) / std::abs(e0));
  return m;
}

struct Reference {
  ModelTag model;
  Ensemble initial;
  RunResult run;
  RunResult half;
  std::vector<std::size_t> tracked;
  double seconds = 0.0;
};

Reference reference_run(ModelTag model) {
  Reference ref{model, build_ensemble(reference_profile(), reference_grid(), model), {}, {}, {}, 0.0};
  ref.tracked = select_tracked(ref.initial, 64);
  RunOptions o;
  o.tracked = ref.tracked;
  o.probes = ProbeSpec{kTau, 1e-4, ref.tracked};
  for (double t = 50.0; t <= kTEnd + 1e-9; t += 10.0) o.snapshot_times.push_back(t);
  o.field_history_every = 10;
  const auto t0 = std::chrono::steady_clock::now();
  ref.run = run(ref.initial, reference_step(kDt), o);
  RunOptions plain;
  ref.half = run(ref.initial, reference_step(0.5 * kDt), plain);
  ref.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ref;
}

const char* label(ModelTag m) { return m == ModelTag::Classical ? "cl" : "rel"; }

// ---------------------------------------------------------------------------

void criterion_1() {
  bool ok = true;
  std::string detail;
  for (ModelTag model : {ModelTag::Classical, ModelTag::Relativistic}) {
    const Ensemble e = build_ensemble(reference_profile(), QuadratureSpec{8, 8, 8}, model);
    auto max_err = [&](double dt, double t_end, bool relative) {
      StepConfig c;
      c.dt = dt;
      c.t_end = t_end;
      c.free_streaming = true;
      c.integrator = Integrator::Rk4FrozenField;
      Ensemble x = e;
      Stepper st(x, c);
      for (std::size_t k = 0; k < c.steps(); ++k) st.step();
      double m = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const RadialPoint exact = free_stream_exact(e.state(i), x.time(), model);
        const RadialPoint p0 = e.state(i);
        const double speed = std::sqrt(p0.w * p0.w + p0.ell / (p0.r * p0.r));
        const double er = std::abs(x.r()[i] - exact.r) / (relative ? exact.r : 1.0);
        const double ew = std::abs(x.w()[i] - exact.w) / (relative ? speed : 1.0);
        m = std::max({m, er, ew});
      }
      return m;
    };
    const double err = max_err(1e-3, 1.0, true);
    const double e1 = max_err(0.1, 2.0, false), e2 = max_err(0.05, 2.0, false), e3 = max_err(0.025, 2.0, false);
    const double r1 = e1 / e2, r2 = e2 / e3;
    const bool pass = err < 1e-8 && r1 >= 12.0 && r1 <= 20.0 && r2 >= 12.0 && r2 <= 20.0;
    ok = ok && pass;
    detail += std::string(label(model)) + ": err=" + fmt(err) + " ratios=" + fmt(r1) + "," + fmt(r2) + "  ";
  }
  report(1, "free-streaming oracle, RK4 order", ok, detail);
}

void criterion_2(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    const auto& recs = ref.run.records;
    bool bitwise = true;
    for (const auto& rec : recs) {
      bitwise = bitwise && rec.total_mass == recs.front().total_mass;
      for (std::size_t c = 0; c < rec.casimirs.size(); ++c)
        bitwise = bitwise && rec.casimirs[c] == recs.front().casimirs[c];
    }
    const double d1 = max_energy_drift(ref.run), d2 = max_energy_drift(ref.half);
    const bool pass = bitwise && d1 < 5e-3 && d1 >= 2.0 * d2;
    ok = ok && pass;
    detail += std::string(label(ref.model)) + ": bitwise=" + (bitwise ? "yes" : "no") + " drift=" + fmt(d1) +
              " halved=" + fmt(d2) + "  ";
  }
  report(2, "conservation", ok, detail);
}

void criterion_3(const std::vector<Reference>& refs) {
  std::size_t violations = 0, checked = 0, turning = 0;
  for (const auto& ref : refs)
    for (const auto& tr : ref.run.tracked) {
      const ConvexityReport rep = check_convexity_bounds(tr, ref.model);
      violations += rep.violations();
      turning += rep.turning_checked ? 1 : 0;
      ++checked;
    }
  report(3, "characteristic inequality suite", violations == 0 && checked > 0,
         "trajectories=" + std::to_string(checked) + " with_turning=" + std::to_string(turning) +
             " violations=" + std::to_string(violations));
}

void criterion_4(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    const auto t = times(ref.run);
    auto slope = [&](std::size_t j) {
      return fit_exponent(t, column(ref.run, [j](const DiagnosticRecord& d) { return d.e_norms[j]; }), 20.0, kTEnd)
          .slope;
    };
    const double s2 = slope(0), s3 = slope(1), sinf = slope(2);
    bool lower = true;
    for (const auto& rec : ref.run.records) lower = lower && rec.field_lower_bound;
    const bool pass = std::abs(sinf + 2.0) <= 0.15 && std::abs(s2 + 0.5) <= 0.10 && std::abs(s3 + 1.0) <= 0.12 && lower;
    ok = ok && pass;
    detail += std::string(label(ref.model)) + ": inf=" + fmt(sinf) + " p2=" + fmt(s2) + " p3=" + fmt(s3) +
              " lower=" + (lower ? "yes" : "no") + "  ";
  }
  report(4, "field decay rates", ok, detail);
}

void criterion_5(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    const auto t = times(ref.run);
    auto col = [&](std::size_t j) { return column(ref.run, [j](const DiagnosticRecord& d) { return d.rho_norms[j]; }); };
    const double s65 = fit_exponent(t, col(1), 20.0, kTEnd).slope;
    const double sinf = fit_exponent(t, col(3), 20.0, kTEnd).slope;
    const auto q1 = col(0);
    double dev = 0.0;
    for (double v : q1) dev = std::max(dev, std::abs(v - q1.front()) / q1.front());
    const bool pass = std::abs(sinf + 3.0) <= 0.4 && std::abs(s65 + 0.5) <= 0.15 && dev <= 1e-12;
    ok = ok && pass;
    detail += std::string(label(ref.model)) + ": inf=" + fmt(sinf) + " q6/5=" + fmt(s65) + " q1dev=" + fmt(dev) + "  ";
  }
  report(5, "density decay rates", ok, detail);
}

void criterion_6(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    const auto t = times(ref.run);
    const auto rs = column(ref.run, [](const DiagnosticRecord& d) { return d.r_sup / d.time; });
    const auto ws = column(ref.run, [](const DiagnosticRecord& d) { return d.w_sup; });
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (t[k] >= 100.0) {
        lo = std::min(lo, rs[k]);
        hi = std::max(hi, rs[k]);
      }
    const double rvar = (hi - lo) / lo;
    const double wa = window_max(t, ws, 100.0, kTEnd), wb = window_max(t, ws, 180.0, kTEnd);
    const double wex = (wa - wb) / wb;
    ok = ok && rvar < 0.02 && wex < 0.02;
    detail += std::string(label(ref.model)) + ": R/t var=" + fmt(rvar) + " W excess=" + fmt(wex) + "  ";
  }
  report(6, "support growth", ok, detail);
}

void criterion_7(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    std::size_t fast = 0, agree = 0, positive = 0, n = 0;
    double worst = 0.0;
    for (const auto& tr : ref.run.tracked) {
      const WinfEstimate e = estimate_winf(tr, ref.model);
      const RateCheck rc = winf_rate_check(tr, e.w_inf_late, 20.0, kTEnd);
      if (rc.degenerate || rc.fit.slope <= -0.8) ++fast;
      if (e.rel_diff <= 0.01) ++agree;
      if (e.w_inf_late > 0.0 && e.w_inf_integral > 0.0) ++positive;
      worst = std::max(worst, e.rel_diff);
      ++n;
    }
    const bool pass = n > 0 && fast * 10 >= n * 9 && agree == n && positive == n;
    ok = ok && pass;
    detail += std::string(label(ref.model)) + ": rate_ok=" + std::to_string(fast) + "/" + std::to_string(n) +
              " agree=" + std::to_string(agree) + " worst=" + fmt(worst) + " positive=" + std::to_string(positive) +
              "  ";
  }
  report(7, "limiting momenta", ok, detail);
}

void criterion_8(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    double worst = 0.0;
    for (const auto& tr : ref.run.tracked) {
      const double winf = winf_late(tr, ref.model);
      const ResidualSeries s = spatial_asymptote_residual(tr, winf, ref.model);
      const double late = residual_log_ratio_max(s, 100.0, kTEnd);
      const double early = residual_log_ratio_max(s, 20.0, 100.0);
      worst = std::max(worst, late / early - 1.0);
    }
    ok = ok && worst < 0.10;
    detail += std::string(label(ref.model)) + ": worst excess=" + fmt(worst) + "  ";
  }
  report(8, "spatial asymptote residual", ok, detail);
}

void criterion_9(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    const auto sens = characteristic_sensitivity(ref.run.probes);
    double growth = 0.0;
    std::size_t used = 0;
    for (const auto& s : sens) {
      if (s.nonlinear) continue;
      growth = std::max(growth, sensitivity_growth(s));
      ++used;
    }
    const auto d = dwinf_dw(ref.run.probes, ref.model);
    const double dmin = d.empty() ? 0.0 : *std::min_element(d.begin(), d.end());
    const bool pass = used > 0 && growth < 1.1 && dmin >= 0.4;
    ok = ok && pass;
    detail += std::string(label(ref.model)) + ": pairs=" + std::to_string(used) + " growth=" + fmt(growth) +
              " min dWinf/dw=" + fmt(dmin) + "  ";
  }
  report(9, "characteristic sensitivity", ok, detail);
}

Axis ell_axis_of_grid() {
  // Aligned with the quadrature cells in ell.
  const Profile p = reference_profile();
  return Axis{p.ell.lo, p.ell.hi, static_cast<std::size_t>(reference_grid().n_ell)};
}

Axis u_axis_for(std::span<const double> values, std::size_t count) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double pad = 1e-9 * (*hi - *lo + 1.0);
  return Axis{*lo - pad, *hi + pad, count};
}

void criterion_10(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  const DiagnosticsConfig dc;
  for (const auto& ref : refs) {
    const std::vector<double> winf = winf_from_states(*ref.run.previous_record, ref.run.final_state);
    const MomentumGrid finf = build_finf(ref.run.final_state, winf, u_axis_for(winf, 4096), ell_axis_of_grid());
    const T3Report t3 = check_t3_identities(finf, ref.run.records.front(), dc.casimirs, ref.model);
    const bool pass = t3.mass_rel_err < 1e-12 && t3.casimir_rel_err[0] < 0.01 && t3.casimir_rel_err[1] < 0.01 &&
                      t3.energy_rel_err < 0.02;
    ok = ok && pass;
    detail += std::string(label(ref.model)) + ": mass=" + fmt(t3.mass_rel_err) + " J_id=" +
              fmt(t3.casimir_rel_err[0]) + " J_sq=" + fmt(t3.casimir_rel_err[1]) + " E=" + fmt(t3.energy_rel_err) +
              "  ";
  }
  // Free streaming: exact flow, W_inf = sqrt(w^2 + ell/r^2) for every particle.
  double fs_worst = 0.0;
  for (ModelTag model : {ModelTag::Classical, ModelTag::Relativistic}) {
    const Ensemble e = build_ensemble(reference_profile(), reference_grid(), model);
    StepConfig c;
    c.dt = 0.05;
    c.t_end = 10.0;
    c.record_every = 1;
    c.free_streaming = true;
    c.integrator = Integrator::KdkLeapfrog;
    RunOptions o;
    o.diagnostics.field_off = true;
    const RunResult r = run(e, c, o);
    const std::vector<double> winf = winf_from_states(*r.previous_record, r.final_state);
    const MomentumGrid finf = build_finf(r.final_state, winf, u_axis_for(winf, std::size_t{1} << 22), ell_axis_of_grid());
    const T3Report t3 = check_t3_identities(finf, r.records.front(), dc.casimirs, model);
    fs_worst = std::max(fs_worst, t3.max_rel_err());
  }
  ok = ok && fs_worst < 1e-6;
  detail += "free-streaming worst=" + fmt(fs_worst);
  report(10, "limiting distribution identities", ok, detail);
}

void criterion_11(const std::vector<Reference>& refs) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : refs) {
    const Ensemble* a = nullptr;
    const Ensemble* b = nullptr;
    for (const auto& s : ref.run.snapshots) {
      if (s.nominal_time == 50.0) a = &s.state;
      if (s.nominal_time == 150.0) b = &s.state;
    }
    const OmegaInvariance oi = omega_invariance(*a, *b, ref.run.field_history, 0.05, threads());
    const bool omega_ok = oi.w_lo_rel < 0.01 && oi.w_hi_rel < 0.01 && oi.ell_exact;

    const std::vector<double> winf = winf_from_states(*ref.run.previous_record, ref.run.final_state);
    std::vector<double> all = winf;
    for (const auto& s : ref.run.snapshots) all.insert(all.end(), s.state.w().begin(), s.state.w().end());
    const Axis u = u_axis_for(all, fconv_u_bins_for(ref.run.final_state.size(), 8));
    const Axis l{reference_profile().ell.lo, reference_profile().ell.hi, 8};
    const MomentumGrid finf = build_finf(ref.run.final_state, winf, u, l);
    std::vector<double> ts;
    std::vector<MomentumGrid> grids;
    for (const auto& s : ref.run.snapshots) {
      ts.push_back(s.nominal_time);
      grids.push_back(spatial_average(s.state, u, l));
    }
    const FconvReport fc = fconv_check(ts, grids, finf, 50.0, kTEnd);
    ok = ok && omega_ok && fc.pass;
    detail += std::string(label(ref.model)) + ": Omega_w rel=" + fmt(oi.w_lo_rel) + "," + fmt(oi.w_hi_rel) +
              " Omega_l exact=" + (oi.ell_exact ? "yes" : "no") + " Fconv " + std::to_string(u.count) + "x8 slope=" + fmt(fc.fit.slope) +
              " decreasing=" + (fc.eventually_decreasing ? "yes" : "no") + "  ";
  }
  report(11, "momentum distribution convergence", ok, detail);
}

}  // namespace

int main() {
  criterion_1();
  std::vector<Reference> refs;
  for (ModelTag m : {ModelTag::Classical, ModelTag::Relativistic}) {
    refs.push_back(reference_run(m));
    std::printf("# reference %s: N=%zu steps=%zu clamps=%zu %.1fs\n", label(m), refs.back().initial.size(),
                refs.back().run.steps, refs.back().run.clamp_events, refs.back().seconds);
  }
  criterion_2(refs);
  criterion_3(refs);
  criterion_4(refs);
  criterion_5(refs);
  criterion_6(refs);
  criterion_7(refs);
  criterion_8(refs);
  criterion_9(refs);
  criterion_10(refs);
  criterion_11(refs);
  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ACCEPTED" : "REJECTED", g_failures);
  return g_failures == 0 ? 0 : 1;
}
