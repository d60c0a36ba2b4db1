#include "shellvp/dynamics.hpp"

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "shellvp/simd/kernels.hpp"

namespace shellvp {

std::string_view to_string(Integrator integ) {
  return integ == Integrator::Rk4FrozenField ? "rk4-frozen-field" : "kdk-leapfrog";
}

Integrator parse_integrator(std::string_view name) {
  if (name == "rk4-frozen-field") return Integrator::Rk4FrozenField;
  if (name == "kdk-leapfrog") return Integrator::KdkLeapfrog;
  throw std::invalid_argument("unknown integrator '" + std::string(name) +
                              "' (expected rk4-frozen-field or kdk-leapfrog)");
}

void StepConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("step.dt must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("step.t_end must be nonnegative");
  if (record_every < 1) throw std::invalid_argument("step.record_every must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(r_floor > 0.0)) throw std::invalid_argument("step.r_floor must be positive");
}

std::size_t StepConfig::steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

Derivative rhs_classical(const RadialPoint& p, double m) {
  if (!(p.r > 0.0)) throw std::invalid_argument("rhs_classical: r must be positive");
  Derivative d;
  simd::kernels_for(simd::Isa::Scalar).rhs_classical(&p.r, &p.w, &p.ell, &m, &d.dr, &d.dw, 1, 0.0);
  return d;
}

Derivative rhs_relativistic(const RadialPoint& p, double m) {
  if (!(p.r > 0.0)) throw std::invalid_argument("rhs_relativistic: r must be positive");
  Derivative d;
  simd::kernels_for(simd::Isa::Scalar).rhs_relativistic(&p.r, &p.w, &p.ell, &m, &d.dr, &d.dw, 1, 0.0);
  return d;
}

RadialPoint free_stream_exact(const RadialPoint& p, double t, ModelTag model) {
  if (!(p.r > 0.0)) throw std::invalid_argument("free_stream_exact: r must be positive");
  RadialPoint q = p;
  if (t == 0.0) return q;
  const auto& k = simd::kernels_for(simd::Isa::Scalar);
  if (model == ModelTag::Classical)
    k.free_drift_classical(&q.r, &q.w, &q.ell, t, 1);
  else
    k.free_drift_relativistic(&q.r, &q.w, &q.ell, t, 1);
  return q;
}

// ---------------------------------------------------------------------------
// Stepper

namespace {

struct Work {
  std::vector<double> m, rs, ws, r_new, w_new;
  std::vector<double> kr[4], kw[4];

  void resize(std::size_t n) {
    for (auto* v : {&m, &rs, &ws, &r_new, &w_new}) v->resize(n);
    for (int s = 0; s < 4; ++s) {
      kr[s].resize(n);
      kw[s].resize(n);
    }
  }
};

constexpr std::size_t kGrain = 2048;

}  // namespace

struct Stepper::Impl {
  ShellOrder order;
  FieldTable table;
  bool table_valid = false;
  Work work;
  std::unique_ptr<tbb::task_arena> arena;
  double t0 = 0.0;

  // Test particles.
  std::vector<double> tr, tw, tell;
  Work twork;

  template <class Fn>
  void for_chunks(std::size_t n, Fn&& fn) {
    if (!arena || n <= kGrain) {
      fn(std::size_t{0}, n);
      return;
    }
    arena->execute([&] {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, kGrain),
                        [&](const tbb::blocked_range<std::size_t>& br) { fn(br.begin(), br.end()); },
                        tbb::simple_partitioner());
    });
  }
};

Stepper::Stepper(Ensemble& e, const StepConfig& cfg) : ensemble_(e), cfg_(cfg), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  if (e.empty()) throw std::invalid_argument("Stepper: empty ensemble");
  impl_->work.resize(e.size());
  impl_->t0 = e.time();
  if (cfg_.threads > 1) impl_->arena = std::make_unique<tbb::task_arena>(cfg_.threads);
}

Stepper::~Stepper() = default;

const FieldTable& Stepper::field() {
  if (!impl_->table_valid) {
    impl_->order.update(ensemble_.r());
    impl_->table = build_field_table(ensemble_.r(), ensemble_.weight(), impl_->order.indices());
    impl_->table_valid = true;
  }
  return impl_->table;
}

double Stepper::own_field_mass(std::size_t i) {
  if (cfg_.free_streaming) return 0.0;
  const FieldTable& t = field();
  const std::uint32_t k = t.entry_of[i];
  return t.mass_below[k] + 0.5 * t.mass_at[k];
}

std::size_t Stepper::add_test_particle(const RadialPoint& p) {
  if (!(p.r > 0.0) || p.ell < 0.0) throw std::invalid_argument("test particle needs r > 0 and ell >= 0");
  impl_->tr.push_back(p.r);
  impl_->tw.push_back(p.w);
  impl_->tell.push_back(p.ell);
  impl_->twork.resize(impl_->tr.size());
  return impl_->tr.size() - 1;
}

std::size_t Stepper::test_particle_count() const { return impl_->tr.size(); }

RadialPoint Stepper::test_particle(std::size_t k) const { return {impl_->tr[k], impl_->tw[k], impl_->tell[k]}; }

double Stepper::test_field_mass(std::size_t k) {
  return cfg_.free_streaming ? 0.0 : field().enclosed_mass(impl_->tr[k]);
}

namespace {

// Field mass for ensemble particle i at radius R: the particle itself always
// contributes half of its weight, wherever R lies relative to its table radius.
struct ShellMass {
  const FieldTable* table;
  std::span<const double> r0;
  std::span<const double> mu;
  bool off;

  double operator()(std::size_t i, double R) const {
    if (off) return 0.0;
    double m = table->enclosed_mass_near(R, table->entry_of[i]);
    if (R > r0[i])
      m -= 0.5 * mu[i];
    else if (R < r0[i])
      m += 0.5 * mu[i];
    return m;
  }
};

struct TestMass {
  const FieldTable* table;
  bool off;
  double operator()(std::size_t, double R) const { return off ? 0.0 : table->enclosed_mass(R); }
};

bool all_positive(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
}

template <class Chunks, class MassFn>
std::size_t rk4_advance(Chunks&& for_chunks, ModelTag model, std::span<const double> r, std::span<const double> w,
                        std::span<const double> ell, Work& wk, double dt, double r_floor, MassFn mass) {
  const auto& K = simd::kernels();
  const auto rhs = model == ModelTag::Classical ? K.rhs_classical : K.rhs_relativistic;
  const std::size_t n = r.size();
  std::atomic<std::size_t> clamps{0};
  const double h[4] = {0.0, 0.5 * dt, 0.5 * dt, dt};
  for (int s = 0; s < 4; ++s) {
    for_chunks(n, [&](std::size_t a, std::size_t b) {
      const double* xr = r.data() + a;
      const double* xw = w.data() + a;
      if (s > 0) {
        K.axpy2(xr, xw, wk.kr[s - 1].data() + a, wk.kw[s - 1].data() + a, h[s], wk.rs.data() + a,
                wk.ws.data() + a, b - a);
        xr = wk.rs.data() + a;
        xw = wk.ws.data() + a;
      }
      for (std::size_t i = a; i < b; ++i) wk.m[i] = mass(i, xr[i - a]);
      clamps += rhs(xr, xw, ell.data() + a, wk.m.data() + a, wk.kr[s].data() + a, wk.kw[s].data() + a, b - a,
                    r_floor);
    });
    if (s > 0 && !all_positive(std::span<const double>(wk.rs.data(), n)))
      throw StepAborted("particle reached r <= 0 inside an RK4 stage");
  }
  std::copy(r.begin(), r.end(), wk.r_new.begin());
  std::copy(w.begin(), w.end(), wk.w_new.begin());
  const simd::Rk4Slopes slopes{{wk.kr[0].data(), wk.kr[1].data(), wk.kr[2].data(), wk.kr[3].data()},
                               {wk.kw[0].data(), wk.kw[1].data(), wk.kw[2].data(), wk.kw[3].data()}};
  for_chunks(n, [&](std::size_t a, std::size_t b) {
    const simd::Rk4Slopes sub{{slopes.kr[0] + a, slopes.kr[1] + a, slopes.kr[2] + a, slopes.kr[3] + a},
                              {slopes.kw[0] + a, slopes.kw[1] + a, slopes.kw[2] + a, slopes.kw[3] + a}};
    K.rk4_combine(wk.r_new.data() + a, wk.w_new.data() + a, sub, dt, b - a);
  });
  if (!all_positive(std::span<const double>(wk.r_new.data(), n)))
    throw StepAborted("particle reached r <= 0 during an RK4 step");
  return clamps.load();
}

template <class Chunks, class MassFn>
std::size_t half_kick(Chunks&& for_chunks, std::span<const double> r, std::span<double> w, Work& wk, double h,
                      double r_floor, MassFn mass) {
  const auto& K = simd::kernels();
  std::atomic<std::size_t> clamps{0};
  for_chunks(r.size(), [&](std::size_t a, std::size_t b) {
    for (std::size_t i = a; i < b; ++i) wk.m[i] = mass(i, r[i]);
    clamps += K.kick(r.data() + a, wk.m.data() + a, h, w.data() + a, b - a, r_floor);
  });
  return clamps.load();
}

template <class Chunks>
void drift(Chunks&& for_chunks, ModelTag model, std::span<double> r, std::span<double> w,
           std::span<const double> ell, double dt) {
  const auto& K = simd::kernels();
  const auto fn = model == ModelTag::Classical ? K.free_drift_classical : K.free_drift_relativistic;
  for_chunks(r.size(), [&](std::size_t a, std::size_t b) { fn(r.data() + a, w.data() + a, ell.data() + a, dt, b - a); });
}

}  // namespace

void Stepper::step() {
  Impl& im = *impl_;
  auto chunks = [&im](std::size_t n, auto&& fn) { im.for_chunks(n, fn); };
  const ModelTag model = ensemble_.model();
  const double dt = cfg_.dt;
  const bool off = cfg_.free_streaming;
  auto r = ensemble_.mutable_r();
  auto w = ensemble_.mutable_w();
  const auto ell = ensemble_.ell();
  const auto mu = ensemble_.weight();
  const std::size_t nt = im.tr.size();

  const FieldTable& t0 = field();
  std::size_t clamps = 0;

  if (cfg_.integrator == Integrator::Rk4FrozenField) {
    const ShellMass own{&t0, r, mu, off};
    clamps += rk4_advance(chunks, model, r, w, ell, im.work, dt, cfg_.r_floor, own);
    if (nt > 0)
      clamps += rk4_advance(chunks, model, im.tr, im.tw, im.tell, im.twork, dt, cfg_.r_floor, TestMass{&t0, off});
    std::copy(im.work.r_new.begin(), im.work.r_new.end(), r.begin());
    std::copy(im.work.w_new.begin(), im.work.w_new.end(), w.begin());
    if (nt > 0) {
      std::copy(im.twork.r_new.begin(), im.twork.r_new.end(), im.tr.begin());
      std::copy(im.twork.w_new.begin(), im.twork.w_new.end(), im.tw.begin());
    }
  } else {
    // Kick into scratch copies so an aborted drift leaves the state untouched.
    auto trial = [&](Work& wk, std::span<const double> rr, std::span<const double> ww, std::span<const double> ll,
                     auto mass) {
      std::copy(rr.begin(), rr.end(), wk.r_new.begin());
      std::copy(ww.begin(), ww.end(), wk.w_new.begin());
      std::span<double> rn(wk.r_new.data(), rr.size()), wn(wk.w_new.data(), rr.size());
      clamps += half_kick(chunks, rr, wn, wk, 0.5 * dt, cfg_.r_floor, mass);
      // The exact drift of an ell == 0 shell would pass through the centre and come back with |r|.
      for (std::size_t i = 0; i < rr.size(); ++i)
        if (ll[i] == 0.0) {
          const double v = model == ModelTag::Classical ? wn[i] : wn[i] / std::sqrt(1.0 + wn[i] * wn[i]);
          if (!(rn[i] + v * dt > 0.0)) throw StepAborted("particle with ell = 0 reached r <= 0 during a drift");
        }
      drift(chunks, model, rn, wn, ll, dt);
      if (!all_positive(rn)) throw StepAborted("particle reached r <= 0 during a drift");
    };
    trial(im.work, r, w, ell, ShellMass{&t0, r, mu, off});
    if (nt > 0) trial(im.twork, im.tr, im.tw, im.tell, TestMass{&t0, off});
    std::copy(im.work.r_new.begin(), im.work.r_new.end(), r.begin());
    std::copy(im.work.w_new.begin(), im.work.w_new.end(), w.begin());
    if (nt > 0) {
      std::copy(im.twork.r_new.begin(), im.twork.r_new.end(), im.tr.begin());
      std::copy(im.twork.w_new.begin(), im.twork.w_new.end(), im.tw.begin());
    }
    im.table_valid = false;
    const FieldTable& t1 = field();
    clamps += half_kick(chunks, std::span<const double>(r.data(), r.size()), w, im.work, 0.5 * dt, cfg_.r_floor,
                        ShellMass{&t1, r, mu, off});
    if (nt > 0) clamps += half_kick(chunks, im.tr, im.tw, im.twork, 0.5 * dt, cfg_.r_floor, TestMass{&t1, off});
  }

  ++steps_;
  clamps_ += clamps;
  ensemble_.set_time(im.t0 + static_cast<double>(steps_) * dt);
  // The leapfrog's closing kick keeps positions, so its table stays valid.
  if (cfg_.integrator == Integrator::Rk4FrozenField) im.table_valid = false;
}

Ensemble step(const Ensemble& e, const StepConfig& cfg) {
  Ensemble out = e;
  Stepper st(out, cfg);
  st.step();
  return out;
}

// ---------------------------------------------------------------------------
// Field history

void FieldHistory::record(double time, const FieldTable& t, std::size_t nodes, bool field_off) {
  std::vector<double> rr, mm;
  const std::size_t n = t.size();
  if (n == 0) return;
  nodes = std::max<std::size_t>(nodes, 2);
  auto push = [&](std::size_t k) {
    rr.push_back(t.radii[k]);
    mm.push_back(field_off ? 0.0 : k + 1 == n ? t.total_mass : t.mass_below[k] + 0.5 * t.mass_at[k]);
  };
  if (n <= nodes) {
    for (std::size_t k = 0; k < n; ++k) push(k);
  } else {
    for (std::size_t j = 0; j < nodes; ++j)
      push(static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(n - 1) /
                                                 static_cast<double>(nodes - 1))));
  }
  add(time, std::move(rr), std::move(mm));
}

void FieldHistory::add(double time, std::vector<double> radii, std::vector<double> mass) {
  if (radii.empty() || radii.size() != mass.size()) throw std::invalid_argument("FieldHistory: bad record");
  if (!times_.empty() && !(time > times_.back())) throw std::invalid_argument("FieldHistory: times must increase");
  times_.push_back(time);
  radii_.push_back(std::move(radii));
  mass_.push_back(std::move(mass));
}

double FieldHistory::mass_in(std::size_t k, double r) const {
  const auto& rr = radii_[k];
  const auto& mm = mass_[k];
  if (r < rr.front()) return 0.0;
  if (r >= rr.back()) return mm.back();
  const auto it = std::upper_bound(rr.begin(), rr.end(), r);
  const std::size_t j = static_cast<std::size_t>(it - rr.begin());  // rr[j-1] <= r < rr[j]
  const double f = (r - rr[j - 1]) / (rr[j] - rr[j - 1]);
  return mm[j - 1] + f * (mm[j] - mm[j - 1]);
}

FieldHistory::Bracket FieldHistory::bracket(double t) const {
  if (times_.empty()) throw std::logic_error("FieldHistory: empty");
  const std::size_t last = times_.size() - 1;
  if (t <= times_.front()) return {0, 0, 0.0};
  if (t >= times_.back()) return {last, last, 0.0};
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  return {k - 1, k, (t - times_[k - 1]) / (times_[k] - times_[k - 1])};
}

double FieldHistory::mass_at(double t, double r) const {
  const Bracket b = bracket(t);
  if (b.k0 == b.k1) return mass_in(b.k0, r);
  return (1.0 - b.f) * mass_in(b.k0, r) + b.f * mass_in(b.k1, r);
}

// ---------------------------------------------------------------------------
// Run orchestration

std::vector<std::size_t> select_tracked(const Ensemble& e, std::size_t count) {
  std::vector<std::size_t> out;
  if (e.empty() || count == 0) return out;
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(count)))));
  double lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    hi[a] = -lo[a];
  }
  const std::span<const double> axes[3] = {e.r(), e.w(), e.ell()};
  for (int a = 0; a < 3; ++a)
    for (double x : axes[a]) {
      lo[a] = std::min(lo[a], x);
      hi[a] = std::max(hi[a], x);
    }
  auto frac = [k](std::size_t j) { return k == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(k - 1); };
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t c = 0; c < k; ++c) {
        const double target[3] = {lo[0] + frac(a) * (hi[0] - lo[0]), lo[1] + frac(b) * (hi[1] - lo[1]),
                                  lo[2] + frac(c) * (hi[2] - lo[2])};
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < e.size(); ++i) {
          double d = 0.0;
          for (int ax = 0; ax < 3; ++ax) {
            const double span = hi[ax] > lo[ax] ? hi[ax] - lo[ax] : 1.0;
            const double u = (axes[ax][i] - target[ax]) / span;
            d += u * u;
          }
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        if (std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
      }
  return out;
}

RunResult run(const Ensemble& initial, const StepConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  RunResult res;
  res.final_state = initial;
  Ensemble& e = res.final_state;
  Stepper st(e, cfg);
  const std::size_t n_steps = cfg.steps();
  const std::size_t every = static_cast<std::size_t>(cfg.record_every);
  const double t0 = initial.time();
  DiagnosticsConfig diag = opts.diagnostics;
  diag.field_off = diag.field_off || cfg.free_streaming;

  for (std::size_t idx : opts.tracked) {
    if (idx >= e.size()) throw std::invalid_argument("tracked particle index out of range");
    res.tracked.push_back(Trajectory{idx, {}, {}, {}});
  }

  auto step_of = [&](double t) {
    const double k = std::round((t - t0) / cfg.dt);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n_steps)));
  };
  std::vector<std::pair<std::size_t, double>> snaps;
  for (double t : opts.snapshot_times)
    if (t >= t0 - 1e-12 && t <= t0 + cfg.t_end + 1e-9) snaps.emplace_back(step_of(t), t);
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;

  std::size_t penultimate = n_steps;  // largest record step < n_steps
  if (n_steps > 0) penultimate = ((n_steps - 1) / every) * every;

  std::optional<std::size_t> probe_step;
  if (opts.probes) probe_step = step_of(opts.probes->tau);
  std::size_t records = 0;

  for (std::size_t k = 0;; ++k) {
    if (probe_step && k == *probe_step) {
      const ProbeSpec& ps = *opts.probes;
      const double scale = std::max(support_functions(e).abs_w, 1e-300);
      const double dw = ps.delta_w * scale;
      if (!(dw > 0.0)) throw std::invalid_argument("probe delta_w must be positive");
      for (std::size_t parent : ps.parents) {
        if (parent >= e.size()) throw std::invalid_argument("probe parent index out of range");
        const RadialPoint p = e.state(parent);
        ProbePair pair;
        pair.parent = parent;
        pair.tau = e.time();
        pair.delta_w = dw;
        pair.minus.particle = st.add_test_particle({p.r, p.w - dw, p.ell});
        pair.plus.particle = st.add_test_particle({p.r, p.w + dw, p.ell});
        res.probes.push_back(std::move(pair));
      }
    }

    const bool is_record = (k % every == 0) || k == n_steps;
    if (is_record) {
      const FieldTable& table = st.field();
      res.records.push_back(compute_record(e, table, diag, st.clamp_events()));
      for (auto& tr : res.tracked) tr.append(e.time(), e.state(tr.particle), st.own_field_mass(tr.particle));
      if (opts.field_history_every > 0 && records % static_cast<std::size_t>(opts.field_history_every) == 0)
        res.field_history.record(e.time(), table, opts.field_history_nodes, cfg.free_streaming);
      ++records;
      if (k == penultimate && k != n_steps) res.previous_record = e;
    }
    if (is_record || (probe_step && k == *probe_step)) {
      for (auto& pair : res.probes) {
        if (!pair.minus.empty() && pair.minus.times.back() == e.time()) continue;
        pair.minus.append(e.time(), st.test_particle(pair.minus.particle), st.test_field_mass(pair.minus.particle));
        pair.plus.append(e.time(), st.test_particle(pair.plus.particle), st.test_field_mass(pair.plus.particle));
      }
    }
    while (next_snap < snaps.size() && snaps[next_snap].first == k) {
      res.snapshots.push_back({snaps[next_snap].second, e});
      ++next_snap;
    }
    if (k == n_steps) break;
    st.step();
  }
  // Field history always ends at the final state so replays cover the whole run.
  if (opts.field_history_every > 0 && (res.field_history.empty() || res.field_history.times().back() < e.time()))
    res.field_history.record(e.time(), st.field(), opts.field_history_nodes, cfg.free_streaming);

  res.steps = st.steps_taken();
  res.clamp_events = st.clamp_events();
  return res;
}

}  // namespace shellvp
