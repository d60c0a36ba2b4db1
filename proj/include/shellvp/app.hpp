#pragma once

// Command implementations behind the shellvp executable.

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "shellvp/config.hpp"
#include "shellvp/dynamics.hpp"
#include "shellvp/phase.hpp"

namespace shellvp {

/// Exit codes: 0 success, 1 fatal invariant or estimator failure, 2 usage or
/// artifact error, 3 aborted step.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAborted = 3;

struct SimulateOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

/// Runs a configured simulation and writes its artifacts into the output directory.
int cmd_simulate(const SimulateOptions& opts, std::ostream& log);

struct AnalyzeOptions {
  std::string run_dir;
  std::optional<std::string> spec_path;
};

/// Runs the asymptotics suite over a completed run directory; writes asymptotics.json.
int cmd_analyze(const AnalyzeOptions& opts, std::ostream& log);

/// Prints R(t), W(t) and W_inf of a free-streaming characteristic.
int cmd_oracle_free_stream(ModelTag model, const std::string& state, double t, std::ostream& out, std::ostream& err);

/// Parses "r,w,ell".  Throws std::invalid_argument.
RadialPoint parse_state(const std::string& text);

/// Closed-form W_inf of a field-free characteristic: sqrt(w^2 + ell/r^2), the
/// conserved speed every straight line eventually moves outward with.
double free_stream_winf(const RadialPoint& p);

/// summary.json content for a finished run.
nlohmann::json build_summary(const RunConfig& cfg, const Ensemble& initial, const RunResult& res);

}  // namespace shellvp
