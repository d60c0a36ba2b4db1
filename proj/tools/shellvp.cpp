// shellvp: simulate, analyze and free-streaming oracle commands.

#include <iostream>

#include <CLI11.hpp>

#include "shellvp/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spherically symmetric Vlasov-Poisson shell simulator"};
  app.require_subcommand(1);

  shellvp::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "run a configured simulation");
  simulate->add_option("--config", sim.config_path, "TOML run configuration")->required();
  simulate->add_option("--out", sim.out_dir, "output directory (overrides the config)");
  simulate->add_option("--threads", sim.threads, "worker threads");

  shellvp::AnalyzeOptions ana;
  auto* analyze = app.add_subcommand("analyze", "asymptotics suite over a run directory");
  analyze->add_option("--run", ana.run_dir, "run directory")->required();
  analyze->add_option("--spec", ana.spec_path, "TOML analysis spec");

  auto* oracle = app.add_subcommand("oracle", "closed-form reference solutions");
  oracle->require_subcommand(1);
  std::string model, state;
  double t = 0.0;
  auto* free_stream = oracle->add_subcommand("free-stream", "field-free characteristic");
  free_stream->add_option("--model", model, "classical or relativistic")
      ->required()
      ->check(CLI::IsMember({"classical", "relativistic"}));
  free_stream->add_option("--state", state, "initial r,w,ell")->required();
  free_stream->add_option("--t", t, "elapsed time")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? shellvp::kExitOk : shellvp::kExitUsage;
  }

  if (*simulate) return shellvp::cmd_simulate(sim, std::cerr);
  if (*analyze) return shellvp::cmd_analyze(ana, std::cerr);
  return shellvp::cmd_oracle_free_stream(shellvp::parse_model(model), state, t, std::cout, std::cerr);
}
