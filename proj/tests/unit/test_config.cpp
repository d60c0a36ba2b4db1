#include <doctest.h>

#include <cmath>

#include "shellvp/config.hpp"

using namespace shellvp;

namespace {

const char* kMinimal = R"(
model = "relativistic"
[profile]
kind = "smooth_box"
r = [1.0, 2.0]
w = [-0.5, 0.5]
ell = [0.5, 1.5]
[step]
t_end = 40.0
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal configuration takes defaults") {
  const RunConfig c = parse_config(kMinimal);
  CHECK(c.model == ModelTag::Relativistic);
  CHECK(c.step.t_end == 40.0);
  CHECK(c.step.dt == 5e-3);
  CHECK(c.step.integrator == Integrator::Rk4FrozenField);
  CHECK(c.quadrature.count() == 16384);
  CHECK(c.fit_window.lo == 4.0);
  CHECK(c.fit_window.hi == 40.0);
  CHECK(c.probes.tau == 10.0);
  CHECK(c.diagnostics.e_norms.size() == 3);
  CHECK(std::isinf(c.diagnostics.e_norms.back()));
  CHECK(c.snapshot_times.front() == 1.0);
  CHECK(c.snapshot_times.back() == 40.0);
}

TEST_CASE("default snapshot times") {
  const auto t = default_snapshot_times(200.0);
  for (double x : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0}) CHECK(std::count(t.begin(), t.end(), x) == 1);
  CHECK(std::is_sorted(t.begin(), t.end()));
  CHECK(std::count_if(t.begin(), t.end(), [](double x) { return x >= 50.0; }) == 16);
  CHECK(default_snapshot_times(0.0).empty());
}

TEST_CASE("semantic errors name the key") {
  const std::string base = kMinimal;
  CHECK(error_of(base + "[diagnostics]\ne_norms = [1.2, 2.0]\n").find("p must exceed 3/2") != std::string::npos);
  CHECK(error_of(base + "[diagnostics]\ne_norms = [1.2]\n").find("diagnostics.e_norms") != std::string::npos);
  CHECK(error_of(base + "colour = 3\n").find("colour") != std::string::npos);
  CHECK(error_of(base + "[quadrature]\nn_q = 3\n").find("quadrature.n_q") != std::string::npos);
  CHECK(error_of(base + "[diagnostics]\nfit_window = [10.0, 50.0]\n").find("fit_window") != std::string::npos);
  CHECK(error_of(base + "[diagnostics]\nsnapshot_times = [41.0]\n").find("snapshot_times") != std::string::npos);
  CHECK(error_of("model = 'newtonian'\n").find("model") != std::string::npos);
  CHECK(error_of("[step\n").size() > 0);
  CHECK(error_of(base + "[step]\ndt = -1.0\n").size() > 0);  // duplicate table is a syntax error
}

TEST_CASE("emit and parse round-trip") {
  const std::string text = std::string(kMinimal) +
                           "[diagnostics]\ncasimirs = [\"identity\", \"indicator[0.5,1]\"]\nrho_norms = [1, 1.2, "
                           "2, inf]\n[probes]\nenabled = true\ndelta_w = 3e-5\n";
  const RunConfig a = parse_config(text);
  const std::string e1 = emit_config(a);
  const RunConfig b = parse_config(e1);
  CHECK(emit_config(b) == e1);
  CHECK(b.probes == a.probes);
  CHECK(b.snapshot_times == a.snapshot_times);
  CHECK(b.diagnostics.rho_norms.size() == 4);
  CHECK(b.diagnostics.casimirs[1].name() == "indicator[0.5,1]");
}

TEST_CASE("analysis spec") {
  AnalysisSpec s = parse_analysis_spec("winf_tolerance = 0.02\n[fconv]\nu_bins = 12\n[omega]\nt_a = 30.0\n");
  s.resolve(200.0);
  CHECK(s.winf_tolerance == 0.02);
  CHECK(s.fconv_u_bins == 12);
  CHECK(s.omega_t_a == 30.0);
  CHECK(s.omega_t_b == 150.0);
  CHECK(s.fit_window.lo == 20.0);
  CHECK(s.finf_u_bins == 4096);
  AnalysisSpec f;
  f.resolve(10.0, true);
  CHECK(f.finf_u_bins == (std::size_t{1} << 22));
  CHECK_THROWS_AS(parse_analysis_spec("[finf]\nbins = 3\n"), ConfigError);
}
