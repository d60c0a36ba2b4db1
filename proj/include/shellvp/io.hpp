#pragma once

// CSV artifacts of a run.  Numbers are written in shortest round-trip form so
// reading a file back reproduces every double bit for bit.

#include <filesystem>
#include <string>
#include <vector>

#include "shellvp/diagnostics.hpp"
#include "shellvp/dynamics.hpp"
#include "shellvp/phase.hpp"
#include "shellvp/trajectory.hpp"

namespace shellvp {

namespace fs = std::filesystem;

/// Thrown for unreadable or malformed artifacts.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// time, mass, energy, casimir_<name>..., E_p<p>... (E_inf), rho_q<q>... (rho_inf),
/// R_sup, W_sup, speed_sup, clamp_events
std::vector<std::string> diagnostics_header(const DiagnosticsConfig& cfg);

void write_diagnostics_csv(const fs::path& path, const std::vector<DiagnosticRecord>& records,
                           const DiagnosticsConfig& cfg);

/// Reads records written with the same configuration; the header must match.
std::vector<DiagnosticRecord> read_diagnostics_csv(const fs::path& path, const DiagnosticsConfig& cfg);

/// Columns r, w, ell, weight.
void write_ensemble_csv(const fs::path& path, const Ensemble& e);
Ensemble read_ensemble_csv(const fs::path& path, ModelTag model, double time);

/// Columns particle, time, r, w, ell, m (samples grouped by particle, in time order).
void write_trajectories_csv(const fs::path& path, const std::vector<Trajectory>& tracks);
std::vector<Trajectory> read_trajectories_csv(const fs::path& path);

/// Columns parent, side, tau, delta_w, time, r, w, ell, m; side is "minus" or "plus".
void write_probes_csv(const fs::path& path, const std::vector<ProbePair>& pairs);
std::vector<ProbePair> read_probes_csv(const fs::path& path);

/// Columns time, r, m.
void write_field_history_csv(const fs::path& path, const FieldHistory& h);
FieldHistory read_field_history_csv(const fs::path& path);

/// File name for a snapshot at nominal time t: snapshot_<shortest(t)>.csv.
std::string snapshot_file_name(double t);

}  // namespace shellvp
