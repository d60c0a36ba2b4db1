#include <doctest.h>

#include <cmath>
#include <numbers>

#include "shellvp/asymptotics.hpp"
#include "shellvp/diagnostics.hpp"
#include "shellvp/dynamics.hpp"
#include "shellvp/field.hpp"
#include "shellvp/profile.hpp"

using namespace shellvp;

namespace {

constexpr double kFourPi2 = 4 * std::numbers::pi * std::numbers::pi;

Trajectory free_track(const RadialPoint& p, ModelTag model, double t_end, double dt) {
  Trajectory tr;
  const auto n = static_cast<int>(std::llround(t_end / dt));
  for (int k = 0; k <= n; ++k) tr.append(k * dt, free_stream_exact(p, k * dt, model), 0.0);
  return tr;
}

StepConfig free_config(double dt, double t_end) {
  StepConfig c;
  c.dt = dt;
  c.t_end = t_end;
  c.record_every = 1;
  c.free_streaming = true;
  c.integrator = Integrator::KdkLeapfrog;
  return c;
}

Ensemble single(RadialPoint p, double mu = 1.0, ModelTag model = ModelTag::Classical) {
  Ensemble e(model);
  e.push_back({p, mu});
  return e;
}

Ensemble box_ensemble(ModelTag model) {
  Profile p;
  p.r = {1, 2};
  p.w = {-0.5, 0.5};
  p.ell = {0.5, 1.5};
  return build_ensemble(p, {8, 6, 8}, model);
}

}  // namespace

TEST_CASE("late-time extrapolation of W_inf") {
  const Trajectory tr = free_track({1, 0, 1}, ModelTag::Classical, 100.0, 0.5);
  CHECK(winf_late(tr, ModelTag::Classical) == doctest::Approx(1.0).epsilon(1e-6));
  const Trajectory rel = free_track({1, 0, 1}, ModelTag::Relativistic, 100.0, 0.5);
  CHECK(winf_late(rel, ModelTag::Relativistic) == doctest::Approx(1.0).epsilon(1e-6));
  // Inbound radial motion without a field never turns around.
  const Trajectory in = free_track({2, -1, 0}, ModelTag::Classical, 1.0, 0.5);
  CHECK_THROWS_AS(winf_late(in, ModelTag::Classical), std::invalid_argument);
  CHECK_THROWS_AS(winf_late(tr, ModelTag::Classical, 200.0), std::invalid_argument);
}

TEST_CASE("late-time extrapolation is exact for a 1/(1+t) tail") {
  // B(t) = 2 - 3/(1+t) with ell = 0, so W = B.
  auto s = [](double t) { return RadialPoint{1.0 + t, 2.0 - 3.0 / (1.0 + t), 0.0}; };
  CHECK(winf_late(40.0, s(40.0), 50.0, s(50.0), ModelTag::Classical) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("integral representation of W_inf without a field") {
  CHECK(winf_integral(free_track({1, 0, 1}, ModelTag::Classical, 5, 0.5), ModelTag::Classical).value ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(winf_integral(free_track({1, 0, 1}, ModelTag::Relativistic, 5, 0.5), ModelTag::Relativistic).value ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(winf_integral(free_track({2, 1, 0}, ModelTag::Classical, 5, 0.5), ModelTag::Classical).value == 1.0);
}

TEST_CASE("integral representation with a constant enclosed mass") {
  // ell = 0, m = 1: W = w + int m/R^2.  For R = 1 + t, W_inf = w + 1 exactly;
  // the trapezoid plus the tail term should land close.
  Trajectory tr;
  auto track = [](double h) {
    Trajectory tr;
    for (int k = 0; k * h <= 200.0 + 1e-9; ++k) {
      const double t = k * h;
      tr.append(t, {1.0 + t, 0.5 + 1.0 - 1.0 / (1.0 + t), 0.0}, 1.0);
    }
    return tr;
  };
  const WinfIntegral a = winf_integral(track(0.05), ModelTag::Classical);
  const WinfIntegral b = winf_integral(track(0.025), ModelTag::Classical);
  CHECK(a.value == doctest::Approx(1.5).epsilon(1e-3));
  CHECK(a.tail > 0.0);
  // Trapezoid error dominates and is second order; the tail term is exact to O(t_end^-2).
  const double tail_err = 1.0 / 201.0 - a.tail;
  CHECK((a.value - 1.5 + tail_err) / (b.value - 1.5 + tail_err) == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("relativistic integral rejects gamma below one") {
  Trajectory tr;
  for (int k = 0; k < 10; ++k) tr.append(k, {1.0 + k, 1.0, 1.0}, -50.0);
  CHECK_THROWS_AS(winf_integral(tr, ModelTag::Relativistic), std::runtime_error);
}

TEST_CASE("W_inf convergence rate") {
  const Trajectory fs = free_track({1, 0, 1}, ModelTag::Classical, 200.0, 1.0);
  const RateCheck a = winf_rate_check(fs, 1.0, 20.0, 200.0);
  CHECK(a.fit.slope == doctest::Approx(-2.0).epsilon(0.02));
  Trajectory syn;
  for (int k = 0; k <= 200; ++k) syn.append(k, {1.0 + k, 1.0 - 1.0 / (1.0 + k), 0.0}, 0.0);
  CHECK(winf_rate_check(syn, 1.0, 20.0, 200.0).fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spatial asymptote residual") {
  const ResidualSeries c =
      spatial_asymptote_residual(free_track({1, 0, 1}, ModelTag::Classical, 10.0, 1.0), 1.0, ModelTag::Classical);
  CHECK(c.residual.back() == doctest::Approx(std::sqrt(101.0) - 11.0).epsilon(1e-14));
  const ResidualSeries r = spatial_asymptote_residual(free_track({1, 0, 1}, ModelTag::Relativistic, 10.0, 1.0), 1.0,
                                                      ModelTag::Relativistic);
  CHECK(r.residual.back() == doctest::Approx(std::sqrt(51.0) - 1.0 - 10.0 / std::sqrt(2.0)).epsilon(1e-13));
  Trajectory syn;
  for (int k = 0; k <= 1000; ++k) syn.append(k, {1.0 + k + std::log1p(k), 1.0, 0.0}, 0.0);
  const ResidualSeries s = spatial_asymptote_residual(syn, 1.0, ModelTag::Classical);
  CHECK(s.log_coefficient == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(residual_log_ratio_max(s, 500, 1000) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sensitivity of a field-free characteristic") {
  const Ensemble e = single({1, 1, 1});
  const auto s = characteristic_sensitivity(e, free_config(0.01, 100.0), 0.0, 1e-4, {0});
  REQUIRE(s.size() == 1);
  // R^2 = 1 + 2 w t + (w^2 + 1) t^2, so dR/dw = (t + w t^2) / R = 6/sqrt(13) at t = 2.
  const auto k2 = static_cast<std::size_t>(std::find_if(s[0].times.begin(), s[0].times.end(),
                                                        [](double t) { return std::abs(t - 2.0) < 1e-9; }) -
                                           s[0].times.begin());
  REQUIRE(k2 < s[0].times.size());
  CHECK(s[0].dr[k2] == doctest::Approx(6.0 / std::sqrt(13.0)).epsilon(1e-6));
  CHECK(s[0].dw.back() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));
  CHECK_FALSE(s[0].nonlinear);
  CHECK(sensitivity_growth(s[0]) <= 1.01);
  CHECK_THROWS_AS(characteristic_sensitivity(e, free_config(0.01, 1.0), 0.0, 0.0, {0}), std::invalid_argument);
}

TEST_CASE("Jacobian of the limiting momentum") {
  CHECK(dwinf_dw(single({1, 1, 1}), free_config(0.05, 20.0), 0.0, 1e-4, {0})[0] ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  CHECK(dwinf_dw(single({1, 3, 1}), free_config(0.05, 20.0), 0.0, 1e-4 / 3, {0})[0] ==
        doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-6));
}

TEST_CASE("momentum grid bookkeeping") {
  MomentumGrid g(Axis{0, 4, 4}, Axis{0, 4, 4});
  g.add(0.5, 2.0, kFourPi2);
  CHECK(g.value(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
  g.add(0.7, 2.5, kFourPi2);
  CHECK(g.value(0, 2) == doctest::Approx(2.0).epsilon(1e-15));
  g.add(3.9, 0.1, 1.25);
  CHECK(g.integrated_mass() == doctest::Approx(2 * kFourPi2 + 1.25).epsilon(1e-15));
  CHECK(g.binned_mass() == 2 * kFourPi2 + 1.25);
  CHECK(g.value(2, 2) == 0.0);
  CHECK_THROWS_AS(g.add(4.5, 1.0, 1.0), std::out_of_range);
  CHECK(Axis{0, 1, 4}.bin(1.0) == 3);
  CHECK(Axis{0, 1, 4}.bin(-0.1) == -1);
}

TEST_CASE("limiting distribution of a free-streaming ensemble") {
  const Ensemble one = single({1, 0, 1}, kFourPi2);
  const std::vector<double> w1{1.0};
  const MomentumGrid g = build_finf(one, w1, Axis{0, 2, 8}, Axis{0, 2, 8});
  CHECK(g.cell_mass(static_cast<std::size_t>(Axis{0, 2, 8}.bin(1.0)), 4) == kFourPi2);

  // Identities for a field-free gas: W_inf = sqrt(w^2 + ell/r^2) exactly.
  for (ModelTag model : {ModelTag::Classical, ModelTag::Relativistic}) {
    const Ensemble e = box_ensemble(model);
    std::vector<double> winf;
    for (std::size_t i = 0; i < e.size(); ++i) winf.push_back(std::sqrt(speed_squared(e.state(i))));
    DiagnosticsConfig dc;
    dc.field_off = true;
    const DiagnosticRecord ref = compute_record(e, build_field_table(e), dc);
    const auto [lo, hi] = std::minmax_element(winf.begin(), winf.end());
    const MomentumGrid finf =
        build_finf(e, winf, Axis{*lo - 1e-9, *hi + 1e-9, std::size_t{1} << 22}, Axis{0.5, 1.5, 8});
    const T3Report rep = check_t3_identities(finf, ref, dc.casimirs, model);
    CHECK(rep.mass_rel_err < 1e-12);
    CHECK(rep.max_rel_err() < 1e-6);
  }
}

TEST_CASE("W_inf from two states of a run") {
  StepConfig cfg = free_config(0.1, 20.0);
  cfg.record_every = 10;
  const Ensemble e0 = box_ensemble(ModelTag::Classical);
  const RunResult res = run(e0, cfg, {});
  const auto w = winf_from_states(*res.previous_record, res.final_state);
  for (std::size_t i = 0; i < e0.size(); ++i)
    CHECK(w[i] == doctest::Approx(std::sqrt(speed_squared(e0.state(i)))).epsilon(1e-12));
}

TEST_CASE("limiting momentum set is invariant along the flow") {
  StepConfig cfg = free_config(0.1, 20.0);
  RunOptions opts;
  opts.snapshot_times = {0.0, 10.0};
  opts.field_history_every = 1;
  opts.diagnostics.field_off = true;
  const RunResult res = run(box_ensemble(ModelTag::Classical), cfg, opts);
  const OmegaInvariance oi = omega_invariance(res.snapshots[0].state, res.snapshots[1].state, res.field_history, 0.01);
  CHECK(oi.w_lo_rel < 1e-8);
  CHECK(oi.w_hi_rel < 1e-8);
  CHECK(oi.ell_exact);
}

TEST_CASE("distribution convergence check") {
  const Axis u{0, 1, 4}, l{0, 1, 2};
  MomentumGrid finf(u, l);
  finf.add(0.1, 0.1, 1.0);
  finf.add(0.6, 0.7, 2.0);
  std::vector<double> ts;
  std::vector<MomentumGrid> series, same;
  for (double t = 50; t <= 200; t += 10) {
    MomentumGrid g(u, l);
    g.add(0.1, 0.1, 1.0 * (1 + 1 / (1 + t)));
    g.add(0.6, 0.7, 2.0 * (1 + 1 / (1 + t)));
    ts.push_back(t);
    series.push_back(g);
    same.push_back(finf);
  }
  const FconvReport a = fconv_check(ts, series, finf, 50, 200);
  CHECK(a.fit.slope == doctest::Approx(-1.0).epsilon(0.02));
  CHECK(a.eventually_decreasing);
  CHECK(a.pass);
  const FconvReport b = fconv_check(ts, same, finf, 50, 200);
  CHECK(b.degenerate);
  CHECK(b.pass);
  series[3] = MomentumGrid(Axis{0, 1, 5}, l);
  CHECK_THROWS_AS(fconv_check(ts, series, finf, 50, 200), std::invalid_argument);
  CHECK(fconv_u_bins_for(16384, 8) == 16);
}
