#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shellvp/app.hpp"
#include "shellvp/io.hpp"

using namespace shellvp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shellvp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "run.toml";
  std::ofstream(p) << body;
  return p;
}

const std::string kBox = R"(
[profile]
r = [1.0, 2.0]
w = [-0.5, 0.5]
ell = [0.5, 1.5]
[quadrature]
n_r = 8
n_w = 4
n_ell = 8
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

}  // namespace

TEST_CASE("oracle prints the closed form") {
  std::ostringstream out, err;
  CHECK(cmd_oracle_free_stream(ModelTag::Classical, "1,0,1", 2.0, out, err) == kExitOk);
  CHECK(out.str() == "R=2.236067977499790, W=0.894427190999916, W_inf=1.000000000000000\n");
  out.str("");
  CHECK(cmd_oracle_free_stream(ModelTag::Classical, "1,-1,1", 0.5, out, err) == kExitOk);
  CHECK(out.str() == "R=0.707106781186548, W=0.000000000000000, W_inf=1.414213562373095\n");
  out.str("");
  CHECK(cmd_oracle_free_stream(ModelTag::Relativistic, "1.5,-0.25,2", 0.0, out, err) == kExitOk);
  CHECK(out.str().starts_with("R=1.500000000000000, W=-0.250000000000000,"));
  CHECK(cmd_oracle_free_stream(ModelTag::Classical, "0,1,1", 1.0, out, err) == kExitUsage);
  CHECK(cmd_oracle_free_stream(ModelTag::Classical, "1,1", 1.0, out, err) == kExitUsage);
}

TEST_CASE("simulate with t_end = 0 writes a single record") {
  const fs::path dir = scratch("zero");
  const fs::path cfg = write_config(dir, kBox + "[step]\nt_end = 0.0\n");
  std::ostringstream log;
  CHECK(cmd_simulate({cfg.string(), (dir / "out").string(), 1}, log) == kExitOk);
  CHECK(data_rows(dir / "out" / "diagnostics.csv") == 1);
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(slurp(dir / "out" / "diagnostics.csv")
            .starts_with("time,mass,energy,casimir_identity,casimir_square,E_p2,E_p3,E_inf,rho_q1,rho_q1_2,rho_q2,"
                         "rho_inf,R_sup,W_sup,speed_sup,clamp_events\n"));
}

TEST_CASE("simulate aborts when a shell reaches the origin") {
  const fs::path dir = scratch("abort");
  const std::string body = R"(
[profile]
r = [0.05, 0.1]
w = [-2.0, -1.0]
ell = [0.0, 1e-6]
[quadrature]
n_r = 2
n_w = 2
n_ell = 2
[step]
dt = 0.01
t_end = 1.0
)";
  std::ostringstream log;
  CHECK(cmd_simulate({write_config(dir, body).string(), (dir / "out").string(), 1}, log) == kExitAborted);
  CHECK(log.str().find("aborted") != std::string::npos);
  CHECK(read_json(dir / "out" / "summary.json")["suites"]["step"]["aborted"] == true);
}

TEST_CASE("free-streaming preset: simulate and analyze") {
  const fs::path dir = scratch("free");
  const fs::path cfg =
      write_config(dir, "free_streaming = true\n" + kBox + "[step]\ndt = 0.1\nt_end = 40.0\nintegrator = \"kdk-leapfrog\"\n");
  std::ostringstream log;
  const fs::path out = dir / "out";
  REQUIRE(cmd_simulate({cfg.string(), out.string(), 1}, log) == kExitOk);
  const auto s = read_json(out / "summary.json");
  CHECK(s["suites"]["free_stream_oracle"]["max_rel_error"].get<double>() < 1e-8);
  CHECK(s["suites"]["free_stream_oracle"]["pass"] == true);
  CHECK(s["suites"]["conservation"]["pass"] == true);
  for (const char* k : {"ell_invariance", "energy_drift", "field_lower_bound", "characteristic_inequalities",
                        "monotone_momentum", "relativistic_speed_bound", "support_bounded", "support_linear_growth",
                        "limiting_momenta", "winf_rate", "asymptote_residual", "sensitivity"})
    CHECK_MESSAGE(s["suites"].contains(k), k);
  CHECK(s["fits"]["E_inf"].contains("error"));

  REQUIRE(cmd_analyze({out.string(), std::nullopt}, log) == kExitOk);
  const auto a = read_json(out / "asymptotics.json");
  const auto& ld = a["limiting_distribution"];
  CHECK(ld["mass_rel_err"].get<double>() < 1e-12);
  CHECK(ld["energy_rel_err"].get<double>() < 1e-6);
  for (const auto& [name, err] : ld["casimir_rel_err"].items()) CHECK(err.get<double>() < 1e-6);
  CHECK(a["omega_invariance"]["pass"] == true);
  CHECK(a["distribution_convergence"]["pass"] == true);
  CHECK(a["limiting_momenta"]["pass"] == true);
}

TEST_CASE("analyze rejects missing or mismatched artifacts") {
  std::ostringstream log;
  CHECK(cmd_analyze({(fs::temp_directory_path() / "shellvp_test_nowhere").string(), std::nullopt}, log) == kExitUsage);

  const fs::path dir = scratch("mismatch");
  const fs::path cfg = write_config(dir, kBox + "[step]\ndt = 0.1\nt_end = 20.0\nintegrator = \"kdk-leapfrog\"\n");
  const fs::path out = dir / "out";
  REQUIRE(cmd_simulate({cfg.string(), out.string(), 1}, log) == kExitOk);
  const fs::path spec = dir / "spec.toml";
  std::ofstream(spec) << "[omega]\nt_a = 7.25\n";
  CHECK(cmd_analyze({out.string(), spec.string()}, log) == kExitUsage);
  CHECK(log.str().find("7.25") != std::string::npos);
  fs::remove(out / "trajectories.csv");
  CHECK(cmd_analyze({out.string(), std::nullopt}, log) == kExitUsage);
}

TEST_CASE("single-threaded runs are byte-identical") {
  const fs::path dir = scratch("repeat");
  const fs::path cfg = write_config(
      dir, "model = \"relativistic\"\n" + kBox +
               "[step]\ndt = 0.05\nt_end = 10.0\nintegrator = \"kdk-leapfrog\"\n[probes]\nenabled = true\n");
  std::ostringstream log;
  REQUIRE(cmd_simulate({cfg.string(), (dir / "a").string(), 1}, log) == kExitOk);
  REQUIRE(cmd_simulate({cfg.string(), (dir / "b").string(), 1}, log) == kExitOk);
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(dir / "a")) {
    const fs::path other = dir / "b" / f.path().filename();
    if (f.path().filename() == "config.toml") continue;  // records the output directory
    CHECK_MESSAGE(slurp(f.path()) == slurp(other), f.path().filename().string());
    ++files;
  }
  CHECK(files >= 8);
}

TEST_CASE("artifact round-trips are exact") {
  const fs::path dir = scratch("io");
  Ensemble e(ModelTag::Classical, 1.5);
  e.push_back({{1.0 / 3.0, -2.0 / 7.0, 0.1}, 1e-300});
  e.push_back({{2.5, 0.0, 0.0}, 4.0});
  write_ensemble_csv(dir / "e.csv", e);
  const Ensemble f = read_ensemble_csv(dir / "e.csv", ModelTag::Classical, 1.5);
  REQUIRE(f.size() == 2);
  CHECK(f.state(0) == e.state(0));
  CHECK(f.weight()[0] == e.weight()[0]);

  Trajectory tr{7, {}, {}, {}};
  tr.append(0.1, {1.0 / 3.0, 0.2, 0.3}, 0.4);
  tr.append(0.2, {1.1, 0.25, 0.3}, 0.45);
  write_trajectories_csv(dir / "t.csv", {tr});
  const auto back = read_trajectories_csv(dir / "t.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].particle == 7);
  CHECK(back[0].states == tr.states);
  CHECK(back[0].field_mass == tr.field_mass);

  std::ofstream(dir / "bad.csv") << "r,w,ell\n1,2,3\n";
  CHECK_THROWS_AS(read_ensemble_csv(dir / "bad.csv", ModelTag::Classical, 0.0), ArtifactError);
  CHECK(snapshot_file_name(2.5) == "snapshot_2.5.csv");
}
