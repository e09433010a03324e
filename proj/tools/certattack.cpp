// certattack: batch attacks, certificate verification and parameter sweeps.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "certattack/commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("certattack");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CERTATTACK_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Certified adversarial distributions against black-box classifiers"};
  app.require_subcommand(1);

  certattack::AttackOptions attack;
  std::string out;
  int jobs = 0;
  std::uint64_t seed = 0;
  auto* attack_cmd = app.add_subcommand("attack", "attack every input of a dataset");
  attack_cmd->add_option("--config", attack.config, "run config (YAML)")->required();
  attack_cmd->add_option("--out", out, "output directory (overrides output_dir)");
  attack_cmd->add_option("--jobs", jobs, "inputs attacked concurrently");
  attack_cmd->add_option("--seed", seed, "base seed (overrides seed)");

  certattack::VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "re-sample certified distributions of a report");
  verify_cmd->add_option("--report", verify.report, "report.json of an attack run")->required();
  verify_cmd->add_option("--n-samples", verify.n_samples, "fresh samples per distribution");
  verify_cmd->add_option("--seed", verify.seed, "sampling seed");
  verify_cmd->add_option("--jobs", verify.jobs, "query width");

  certattack::SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "run the attack once per value of one parameter");
  sweep_cmd->add_option("--config", sweep.attack.config, "run config (YAML)")->required();
  sweep_cmd->add_option("--axis", sweep.axis, "sigma, p or family")->required();
  sweep_cmd->add_option("--values", sweep.values, "values of the axis")->required()->delimiter(',');
  sweep_cmd->add_option("--out", out, "output directory (overrides output_dir)");
  sweep_cmd->add_option("--jobs", jobs, "inputs attacked concurrently");
  sweep_cmd->add_option("--seed", seed, "base seed (overrides seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : certattack::exit_code::usage;
  }

  auto apply = [&](certattack::AttackOptions& options, CLI::App* cmd) {
    if (cmd->count("--out")) options.out = out;
    if (cmd->count("--jobs")) options.jobs = jobs;
    if (cmd->count("--seed")) options.seed = seed;
  };
  if (*attack_cmd) {
    apply(attack, attack_cmd);
    return certattack::cmd_attack(attack, std::cout, std::cerr);
  }
  if (*verify_cmd) return certattack::cmd_verify(verify, std::cout, std::cerr);
  apply(sweep.attack, sweep_cmd);
  return certattack::cmd_sweep(sweep, std::cout, std::cerr);
}
