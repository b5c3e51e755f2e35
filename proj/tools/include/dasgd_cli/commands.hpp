#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dasgd/engine.hpp"
#include "dasgd/theory.hpp"
#include "dasgd_cli/config.hpp"

namespace dasgd::cli {

/// Exit codes shared by every verb.
enum ExitCode : int { kOk = 0, kCheckFailed = 1, kBadInput = 2, kDiverged = 3 };

/// Comparison of one finished run against the convergence theorem.
struct TheoryReport {
  BoundInputs inputs;
  RateBound bound = RateBound::with_q;  // with_q for deterministic gradients
  double eta_bound_tight = 0.0;
  double eta_bound_loose = 0.0;
  double max_grad_norm = 0.0;           // largest ||grad f|| seen at any application
  bool precondition_met = false;        // eta within the stepsize rule of `bound`
  std::uint64_t final_t = 0;
  double final_psi = 0.0;               // worst node's Psi at its last step
  double bound_at_final = 0.0;
  bool bound_holds = false;             // Psi_t <= bound(t) at every logged t, every node
};

struct ExperimentResult {
  ExperimentConfig config;  // eta resolved, seed of this replica, replicas = 1
  std::string run_id;
  SimConfig sim;
  RunTrace trace;
  TheoryReport theory;
};

/// Column names of trace.csv, in order.
const std::vector<std::string>& trace_columns();

/// Stepsize for `config`: the configured value, or the theorem bound from a
/// pilot run on pilot_fraction of the budget.
double choose_eta(const ExperimentConfig& config, std::size_t replica);

/// Runs one replica end to end. Propagates DivergenceError.
ExperimentResult execute(const ExperimentConfig& config, std::size_t replica, const std::string& run_id);

/// Per-node running averages of ||grad f||^2, keyed by the applying model.
std::vector<std::pair<NodeIndex, std::vector<double>>> psi_by_node(const RunTrace& trace);

TheoryReport evaluate_theory(const SimConfig& sim, const RunTrace& trace);

std::string format_trace_csv(const ExperimentResult& result);
std::string format_staleness_csv(std::span<const StalenessRecord> records);
std::string format_summary(const ExperimentResult& result);
std::string format_manifest(const ExperimentResult& result);

/// Writes trace.csv, staleness.csv, summary.txt, manifest.txt, plus
/// events.log (decentralized runs) or delay.csv (parameter-server runs).
void write_run_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
};

struct SweepOptions {
  RunOptions run;
  std::string axis;  // n, topology, eta or sigma
  std::vector<std::string> values;
};

/// Worker threads for replicas and sweep points: DASGD_SIM_THREADS when set
/// to a positive integer, otherwise the hardware concurrency.
std::size_t worker_threads();

int run_command(const RunOptions& options, std::ostream& out, std::ostream& err);
int sweep_command(const SweepOptions& options, std::ostream& out, std::ostream& err);
int verify_command(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int oracle_command(const std::filesystem::path& log, std::ostream& out, std::ostream& err);

}  // namespace dasgd::cli
