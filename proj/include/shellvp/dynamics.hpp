#pragma once

// Self-consistent integration of the reduced characteristics
//
//   classical:     dR/dt = W,       dW/dt = ell/R^3 + m(t,R)/R^2
//   relativistic:  dR/dt = W/g,     dW/dt = ell/(R^3 g) + m(t,R)/R^2,   g = sqrt(1 + W^2 + ell/R^2)
//
// with m(t, .) the enclosed mass of the ensemble itself.

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "shellvp/diagnostics.hpp"
#include "shellvp/field.hpp"
#include "shellvp/phase.hpp"
#include "shellvp/trajectory.hpp"

namespace shellvp {

enum class Integrator {
  Rk4FrozenField,  // classical RK4; field table from the pre-step positions held for all stages
  KdkLeapfrog,     // half kick / exact free drift / rebuild / half kick
};

std::string_view to_string(Integrator integ);
Integrator parse_integrator(std::string_view name);

struct StepConfig {
  double dt = 5e-3;
  double t_end = 0.0;
  int record_every = 10;
  Integrator integrator = Integrator::Rk4FrozenField;
  bool free_streaming = false;  // m == 0 test mode
  int threads = 1;
  double r_floor = 1e-8;        // force radius clamp for ell == 0 shells

  void validate() const;
  std::size_t steps() const;
};

/// A particle crossed r <= 0 during a step.
class StepAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Derivative {
  double dr = 0.0;
  double dw = 0.0;
};

/// Right-hand sides for a single point; throw std::invalid_argument for r <= 0.
Derivative rhs_classical(const RadialPoint& p, double m_at_r);
Derivative rhs_relativistic(const RadialPoint& p, double m_at_r);

/// Field-free characteristic after time t (closed form).  For the relativistic
/// model W is the radial momentum, not the radial velocity.
RadialPoint free_stream_exact(const RadialPoint& p, double t, ModelTag model);

/// Advances an ensemble, keeping the field table and work arrays between steps.
/// Massless test particles can ride along in the same field.
class Stepper {
 public:
  Stepper(Ensemble& e, const StepConfig& cfg);
  ~Stepper();
  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  /// One time step.  Throws StepAborted if any radius becomes <= 0; the
  /// ensemble is left at its pre-step state in that case.
  void step();

  /// Field table of the current positions.
  const FieldTable& field();
  /// m seen by particle i at its own radius (half of its own shell).
  double own_field_mass(std::size_t i);

  std::size_t add_test_particle(const RadialPoint& p);
  std::size_t test_particle_count() const;
  RadialPoint test_particle(std::size_t k) const;
  /// m(t, R) seen by test particle k (no self contribution).
  double test_field_mass(std::size_t k);

  std::size_t steps_taken() const { return steps_; }
  std::size_t clamp_events() const { return clamps_; }
  double time() const { return ensemble_.time(); }

 private:
  struct Impl;
  Ensemble& ensemble_;
  StepConfig cfg_;
  std::size_t steps_ = 0;
  std::size_t clamps_ = 0;
  std::unique_ptr<Impl> impl_;
};

/// One step of a fresh stepper (convenience for one-off use).
Ensemble step(const Ensemble& e, const StepConfig& cfg);

/// Launches centred finite-difference pairs (w - dw, w + dw) from tracked particles.
struct ProbeSpec {
  double tau = 0.0;
  double delta_w = 1e-4;
  std::vector<std::size_t> parents;
};

struct ProbePair {
  std::size_t parent = 0;
  double tau = 0.0;
  double delta_w = 0.0;
  Trajectory minus;
  Trajectory plus;
};

/// Enclosed-mass samples on a few radii per record, for replaying a run's field.
class FieldHistory {
 public:
  /// Samples t at up to `nodes` radii; field_off stores m = 0 (free streaming).
  void record(double time, const FieldTable& t, std::size_t nodes, bool field_off = false);
  void add(double time, std::vector<double> radii, std::vector<double> mass);

  /// m(t, r): linear in r between nodes, 0 below the first, total beyond the last,
  /// linear in t between records, clamped to the recorded time range.
  double mass_at(double t, double r) const;

  /// Records k0, k1 and blend f with mass_at(t, r) = (1-f) mass_in(k0, r) + f mass_in(k1, r).
  struct Bracket {
    std::size_t k0 = 0, k1 = 0;
    double f = 0.0;
  };
  Bracket bracket(double t) const;
  double mass_in(std::size_t k, double r) const;

  bool empty() const { return times_.empty(); }
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& radii(std::size_t k) const { return radii_[k]; }
  const std::vector<double>& mass(std::size_t k) const { return mass_[k]; }

 private:
  std::vector<double> times_;
  std::vector<std::vector<double>> radii_, mass_;
};

struct RunOptions {
  DiagnosticsConfig diagnostics;
  std::vector<std::size_t> tracked;
  std::vector<double> snapshot_times;
  std::optional<ProbeSpec> probes;
  int field_history_every = 0;  // records between field-history samples; 0 disables
  std::size_t field_history_nodes = 256;
};

struct Snapshot {
  double nominal_time = 0.0;
  Ensemble state;
};

struct RunResult {
  Ensemble final_state;
  std::vector<DiagnosticRecord> records;
  std::vector<Trajectory> tracked;
  std::vector<ProbePair> probes;
  std::vector<Snapshot> snapshots;     // requested times, in order
  std::optional<Ensemble> previous_record;  // state at the record before the final one
  FieldHistory field_history;
  std::size_t steps = 0;
  std::size_t clamp_events = 0;
};

/// Integrates to cfg.t_end, recording diagnostics every cfg.record_every steps
/// (and at the final step).  Propagates StepAborted.
RunResult run(const Ensemble& initial, const StepConfig& cfg, const RunOptions& opts);

/// Default tracked set: particles nearest to a k x k x k lattice spanning the
/// ensemble's (r, w, ell) bounding box (corners and interior), k = round(count^(1/3)).
std::vector<std::size_t> select_tracked(const Ensemble& e, std::size_t count = 64);

}  // namespace shellvp
