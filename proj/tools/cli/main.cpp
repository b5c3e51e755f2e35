#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dasgd_cli/commands.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    const auto first = item.find_first_not_of(' ');
    const auto last = item.find_last_not_of(' ');
    if (first != std::string::npos) out.push_back(item.substr(first, last - first + 1));
  }
  return out;
}

void add_run_flags(CLI::App* cmd, dasgd::cli::RunOptions& o, std::string& out, std::uint64_t& seed,
                   std::size_t& replicas) {
  cmd->add_option("--config", o.config, "YAML experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", out, "output directory (overrides run.output)");
  cmd->add_option("--seed", seed, "base seed (overrides run.seed)");
  cmd->add_option("--replicas", replicas, "replica count (overrides run.replicas)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for decentralized asynchronous SGD"};
  app.require_subcommand(1);

  dasgd::cli::RunOptions run;
  std::string run_out;
  std::uint64_t run_seed = 0;
  std::size_t run_replicas = 0;
  auto* run_cmd = app.add_subcommand("run", "run one experiment (all replicas)");
  add_run_flags(run_cmd, run, run_out, run_seed, run_replicas);

  dasgd::cli::SweepOptions sweep;
  std::string sweep_out;
  std::uint64_t sweep_seed = 0;
  std::size_t sweep_replicas = 0;
  std::string values;
  auto* sweep_cmd = app.add_subcommand("sweep", "run one experiment per axis value");
  add_run_flags(sweep_cmd, sweep.run, sweep_out, sweep_seed, sweep_replicas);
  sweep_cmd->add_option("--axis", sweep.axis, "n, topology, eta or sigma")
      ->required()
      ->check(CLI::IsMember({"n", "topology", "eta", "sigma"}));
  sweep_cmd->add_option("--values", values, "comma-separated axis values")->required();

  std::string verify_dir;
  auto* verify_cmd = app.add_subcommand("verify", "re-check a run directory");
  verify_cmd->add_option("dir", verify_dir, "run directory")->required();

  std::string oracle_log;
  auto* oracle_cmd = app.add_subcommand("oracle", "replay an event log against brute-force staleness");
  oracle_cmd->add_option("log", oracle_log, "event log (COMPUTE/APPLY lines)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dasgd::cli::kBadInput;
  }

  auto finish = [](dasgd::cli::RunOptions& o, CLI::App* cmd, const std::string& out, std::uint64_t seed,
                   std::size_t replicas) {
    if (cmd->count("--out")) o.out = out;
    if (cmd->count("--seed")) o.seed = seed;
    if (cmd->count("--replicas")) o.replicas = replicas;
  };

  if (*run_cmd) {
    finish(run, run_cmd, run_out, run_seed, run_replicas);
    return dasgd::cli::run_command(run, std::cout, std::cerr);
  }
  if (*sweep_cmd) {
    finish(sweep.run, sweep_cmd, sweep_out, sweep_seed, sweep_replicas);
    sweep.values = split_csv(values);
    return dasgd::cli::sweep_command(sweep, std::cout, std::cerr);
  }
  if (*verify_cmd) return dasgd::cli::verify_command(verify_dir, std::cout, std::cerr);
  return dasgd::cli::oracle_command(oracle_log, std::cout, std::cerr);
}
