#pragma once

// Run configuration (TOML) and analysis settings.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shellvp/diagnostics.hpp"
#include "shellvp/dynamics.hpp"
#include "shellvp/phase.hpp"
#include "shellvp/profile.hpp"

namespace shellvp {

/// Syntax or validation failure; the message starts with the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Window {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Window&) const = default;
};

struct ProbeConfig {
  bool enabled = false;
  double tau = 0.0;       // launch time
  double delta_w = 1e-4;  // relative to max |w| at launch
  bool operator==(const ProbeConfig&) const = default;
};

struct RunConfig {
  ModelTag model = ModelTag::Classical;
  Profile profile;
  QuadratureSpec quadrature;
  StepConfig step;
  DiagnosticsConfig diagnostics;
  Window fit_window;
  std::size_t track = 64;
  std::vector<double> snapshot_times;
  int field_history_every = 10;
  std::size_t field_history_nodes = 256;
  ProbeConfig probes;
  std::string output = "run";
};

/// Parses TOML text.  Missing keys take defaults (fit window [t_end/10, t_end],
/// probe tau t_end/4, geometric plus evenly spaced late snapshot times); unknown
/// keys are errors.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// TOML text with every setting spelled out; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& c);

/// Snapshot times used when none are configured: 1, 2, 5, 10, ... up to t_end,
/// t_end itself, and t_end/4 + k t_end/20 for k = 0..15.
std::vector<double> default_snapshot_times(double t_end);

/// Settings of the asymptotics suite.  Zero-valued fields are filled from the run.
struct AnalysisSpec {
  Window fit_window;            // W_inf rate fits; default [t_end/10, t_end]
  Window residual_early;        // default [t_end/10, t_end/2]
  Window residual_late;         // default [t_end/2, t_end]
  std::size_t finf_u_bins = 0;    // 0: 4096, or 2^22 for field-free runs
  std::size_t finf_ell_bins = 0;  // 0: one bin per quadrature cell in ell
  std::size_t fconv_u_bins = 0;   // 0: square-root rule over the particle count
  std::size_t fconv_ell_bins = 8;
  Window fconv_window;          // default [t_end/4, t_end]
  double omega_t_a = 0.0;       // default t_end/4
  double omega_t_b = 0.0;       // default 3 t_end/4
  double continuation_dt = 0.05;
  double winf_tolerance = 0.01;

  void resolve(double t_end, bool free_streaming = false);
};

AnalysisSpec parse_analysis_spec(std::string_view text);
AnalysisSpec load_analysis_spec(const std::string& path);

}  // namespace shellvp
