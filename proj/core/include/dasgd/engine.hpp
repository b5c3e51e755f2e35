#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dasgd/event_log.hpp"
#include "dasgd/ledger.hpp"
#include "dasgd/netsim.hpp"
#include "dasgd/objective.hpp"

namespace dasgd {

/// Time a node spends computing one gradient. The sample for (node, step) is
/// drawn from its own seeded stream and multiplied by node_scales[node] when
/// that vector is non-empty.
struct ComputeTimeModel {
  enum class Kind { constant, uniform, exponential };

  Kind kind = Kind::constant;
  double mean = 1.0;  // constant value or exponential mean
  double lo = 0.5;    // uniform only
  double hi = 1.5;    // uniform only
  std::vector<double> node_scales;

  double scale(NodeIndex node) const { return node_scales.empty() ? 1.0 : node_scales.at(node); }
  double expected(NodeIndex node) const;
  /// Always finite and > 0.
  double sample(std::uint64_t run_seed, NodeIndex node, Step step) const;

  friend bool operator==(const ComputeTimeModel&, const ComputeTimeModel&) = default;
};

/// When each node begins its first loop iteration.
///   aligned: every node at time 0
///   staggered: node i at i * c_i / n, c_i its expected compute time
///   random: uniform in [0, c_i)
enum class StartPhase { aligned, staggered, random };

std::string to_string(StartPhase phase);
StartPhase parse_start_phase(const std::string& name);

struct SimConfig {
  Topology topology = Topology::fully_connected(1);
  ObjectiveSpec objective = ObjectiveSpec::quadratic(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), 0.0);
  ParamVector x0;  // empty means the zero vector
  double eta = 0.01;
  std::size_t samples_per_node = 100;
  ComputeTimeModel compute;
  StartPhase start = StartPhase::random;
  LatencyModel latency = LatencyModel::constant(0.01);
  std::uint64_t seed = 0;
  /// Evaluate the per-event descent inequality (needs L, costs one extra loss
  /// evaluation and one staleness-set walk per application).
  bool check_descent = false;

  std::size_t n() const noexcept { return topology.size(); }
  ParamVector initial_point() const;
};

enum class EventKind { compute, apply, send, deliver, duplicate };

std::string to_string(EventKind kind);

struct TraceEvent {
  SimTime time = 0.0;
  NodeIndex node = 0;
  EventKind kind = EventKind::compute;
  GradientId gradient;
  Step step = 0;       // node's local step when the event happened
  NodeIndex peer = 0;  // destination for send, sender for deliver/duplicate

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Metrics of the applying model x_i^t, taken just before the update.
struct ApplicationSample {
  NodeIndex node = 0;
  Step step = 0;
  SimTime time = 0.0;
  GradientId gradient;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  std::size_t tight = 0;
  std::size_t loose = 0;
  std::optional<std::size_t> delay;  // classical delay, parameter-server runs only

  friend bool operator==(const ApplicationSample&, const ApplicationSample&) = default;
};

/// f(x^{t+1}) <= f(x^t) - (eta/2)||grad f(x^t)||^2 + (eta L^2 / 2) Delta^2
/// with Delta = eta * sum of ||g|| over the event's tight staleness set.
struct DescentCheck {
  NodeIndex node = 0;
  Step step = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

struct ComputedGradient {
  GradientId id;
  ParamVector values;
};

enum class RunMode { dasgd, sync, centralized_asgd };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct RunTrace {
  RunMode mode = RunMode::dasgd;
  std::vector<TraceEvent> events;
  std::vector<ApplicationSample> applications;
  std::vector<StalenessRecord> staleness;
  /// DASGD: one model per node. Baselines: the single shared/server model.
  std::vector<ParamVector> final_models;
  /// Application order per model, parallel to final_models.
  std::vector<std::vector<GradientId>> applied;
  std::vector<ComputedGradient> gradients;  // in compute order
  std::vector<DescentCheck> descent;
  SimTime end_time = 0.0;
  std::size_t gradients_computed = 0;
  /// Absent when no staleness was recorded (synchronous baseline).
  std::optional<StalenessSummary> summary;

  /// Gradients computed per unit simulated time.
  double throughput() const { return end_time > 0.0 ? static_cast<double>(gradients_computed) / end_time : 0.0; }
};

/// Runs the decentralized protocol until every budget is spent and every
/// gradient has been applied by every node. Throws TopologyError for an invalid
/// topology, Error for a bad config, DivergenceError when a model or its loss
/// becomes non-finite.
RunTrace run(const SimConfig& config);

/// Lock-step mini-batch SGD: each round all n nodes compute on the shared
/// model, the mean gradient is applied once, and the round lasts as long as
/// the slowest node. samples_per_node rounds.
RunTrace run_sync_baseline(const SimConfig& config);

/// Parameter-server ASGD: each worker fetches the server model, computes, and
/// sends the gradient back; the server applies in arrival order. Records the
/// classical delay next to the staleness of every application.
RunTrace run_centralized_asgd(const SimConfig& config);

/// x0 - eta * (sum of the gradients in `ids`, summed in canonical order).
ParamVector reconstruct_model(const ParamVector& x0, double eta, const std::vector<ComputedGradient>& gradients,
                              std::vector<GradientId> ids);

/// COMPUTE/APPLY lines of a decentralized run, in event order.
std::vector<LogEvent> to_event_log(const RunTrace& trace);

/// Running average (1/(t+1)) sum_{k<=t} ||grad f(x_node^k)||^2 for each step t
/// of one node, built from the application samples.
std::vector<double> psi_series(const RunTrace& trace, NodeIndex node);

}  // namespace dasgd
