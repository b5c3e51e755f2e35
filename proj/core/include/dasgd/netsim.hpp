#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dasgd/ledger.hpp"
#include "dasgd/objective.hpp"

namespace dasgd {

using SimTime = double;

enum class TopologyKind { fully_connected, ring, custom };

std::string to_string(TopologyKind kind);
/// Throws Error for an unknown name.
TopologyKind parse_topology_kind(const std::string& name);

/// Undirected communication graph over nodes 0..n-1.
class Topology {
 public:
  using Edge = std::pair<NodeIndex, NodeIndex>;

  static Topology fully_connected(std::size_t n);
  /// Cycle 0-1-...-(n-1)-0. n = 2 is a single edge, n = 1 has none.
  static Topology ring(std::size_t n);
  /// Edges are stored as given; validate_topology rejects self-loops,
  /// duplicates and disconnected graphs.
  static Topology custom(std::size_t n, std::vector<Edge> edges);

  TopologyKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// Sorted neighbour list of `node`.
  const std::vector<NodeIndex>& neighbors(NodeIndex node) const { return adjacency_.at(node); }

 private:
  Topology(TopologyKind kind, std::size_t n, std::vector<Edge> edges);

  TopologyKind kind_;
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeIndex>> adjacency_;
};

/// Throws TopologyError for n = 0, an out-of-range endpoint, a self-loop, a
/// duplicate edge, or a disconnected graph (naming one unreachable pair).
void validate_topology(const Topology& topology);

/// Per-hop message latency in simulated time units.
class LatencyModel {
 public:
  enum class Kind { constant, uniform, exponential };

  static LatencyModel constant(double value);
  static LatencyModel uniform(double lo, double hi);
  static LatencyModel exponential(double mean);

  Kind kind() const noexcept { return kind_; }
  double a() const noexcept { return a_; }  // value, lo, or mean
  double b() const noexcept { return b_; }  // hi for uniform, else equal to a
  double mean() const noexcept;

  /// Always finite and > 0.
  double sample(std::mt19937_64& rng) const;

 private:
  LatencyModel(Kind kind, double a, double b);

  Kind kind_;
  double a_;
  double b_;
};

struct GradientMessage {
  GradientId id;
  ParamVector values;
};

struct InFlightMessage {
  std::shared_ptr<const GradientMessage> gradient;
  NodeIndex from = 0;
  NodeIndex to = 0;
  SimTime sent_at = 0.0;
  SimTime deliver_at = 0.0;
  std::uint64_t sequence = 0;  // global send order, used for tie-breaking
};

struct ReceiveResult {
  bool accepted = false;
  std::vector<InFlightMessage> relays;
};

/// Flooding with receiver-side deduplication. Each node remembers which
/// gradients it has seen; a first-seen gradient is relayed to every neighbour
/// except the one it came from, repeats are dropped.
class Network {
 public:
  /// Validates the topology.
  Network(Topology topology, LatencyModel latency, std::uint64_t seed);

  const Topology& topology() const noexcept { return topology_; }

  /// Marks the gradient as seen by `origin` and sends one copy to each neighbour.
  std::vector<InFlightMessage> disseminate(NodeIndex origin, std::shared_ptr<const GradientMessage> gradient,
                                           SimTime now);
  /// Handles a copy arriving at `msg.to` at time `now`.
  ReceiveResult on_receive(const InFlightMessage& msg, SimTime now);

  bool has_seen(NodeIndex node, const GradientId& id) const;
  std::size_t seen_count(NodeIndex node) const { return seen_.at(node).size(); }
  std::uint64_t messages_sent() const noexcept { return next_sequence_; }

 private:
  InFlightMessage send(std::shared_ptr<const GradientMessage> gradient, NodeIndex from, NodeIndex to, SimTime now);

  Topology topology_;
  LatencyModel latency_;
  std::mt19937_64 rng_;
  std::vector<GradientSet> seen_;
  std::uint64_t next_sequence_ = 0;
};

}  // namespace dasgd
