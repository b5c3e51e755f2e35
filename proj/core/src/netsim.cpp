#include "dasgd/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "dasgd/error.hpp"
#include "dasgd/seeding.hpp"

namespace dasgd {

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::fully_connected: return "fully_connected";
    case TopologyKind::ring: return "ring";
    case TopologyKind::custom: return "custom";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(const std::string& name) {
  if (name == "fully_connected") return TopologyKind::fully_connected;
  if (name == "ring") return TopologyKind::ring;
  if (name == "custom") return TopologyKind::custom;
  throw Error("unknown topology '" + name + "' (expected fully_connected, ring or custom)");
}

Topology::Topology(TopologyKind kind, std::size_t n, std::vector<Edge> edges)
    : kind_(kind), n_(n), edges_(std::move(edges)), adjacency_(n) {
  for (const auto& [u, v] : edges_) {
    if (u < n_ && v < n_ && u != v) {
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
}

Topology Topology::fully_connected(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  return Topology(TopologyKind::fully_connected, n, std::move(edges));
}

Topology Topology::ring(std::size_t n) {
  std::vector<Edge> edges;
  if (n == 2) {
    edges.emplace_back(0, 1);
  } else if (n > 2) {
    for (std::size_t u = 0; u < n; ++u) edges.emplace_back(u, (u + 1) % n);
  }
  return Topology(TopologyKind::ring, n, std::move(edges));
}

Topology Topology::custom(std::size_t n, std::vector<Edge> edges) {
  return Topology(TopologyKind::custom, n, std::move(edges));
}

void validate_topology(const Topology& topology) {
  const std::size_t n = topology.size();
  if (n == 0) throw TopologyError("topology has no nodes");
  std::set<Topology::Edge> unique;
  for (const auto& [u, v] : topology.edges()) {
    std::ostringstream edge;
    edge << "(" << u << "," << v << ")";
    if (u >= n || v >= n) throw TopologyError("edge " + edge.str() + " references a node outside 0.." + std::to_string(n - 1));
    if (u == v) throw TopologyError("self-loop " + edge.str());
    if (!unique.emplace(std::min(u, v), std::max(u, v)).second) throw TopologyError("duplicate edge " + edge.str());
  }

  std::vector<char> reached(n, 0);
  std::queue<NodeIndex> frontier;
  reached[0] = 1;
  frontier.push(0);
  while (!frontier.empty()) {
    const NodeIndex u = frontier.front();
    frontier.pop();
    for (const NodeIndex v : topology.neighbors(u)) {
      if (!reached[v]) {
        reached[v] = 1;
        frontier.push(v);
      }
    }
  }
  const auto missing = std::find(reached.begin(), reached.end(), 0);
  if (missing != reached.end()) {
    throw TopologyError("graph is disconnected: node " + std::to_string(missing - reached.begin()) +
                        " is unreachable from node 0");
  }
}

LatencyModel::LatencyModel(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {
  if (!std::isfinite(a) || !std::isfinite(b) || a <= 0.0 || b <= 0.0) {
    throw Error("latency parameters must be finite and > 0");
  }
  if (b < a) throw Error("uniform latency needs lo <= hi");
}

LatencyModel LatencyModel::constant(double value) { return LatencyModel(Kind::constant, value, value); }
LatencyModel LatencyModel::uniform(double lo, double hi) { return LatencyModel(Kind::uniform, lo, hi); }
LatencyModel LatencyModel::exponential(double mean) { return LatencyModel(Kind::exponential, mean, mean); }

double LatencyModel::mean() const noexcept { return kind_ == Kind::uniform ? 0.5 * (a_ + b_) : a_; }

double LatencyModel::sample(std::mt19937_64& rng) const {
  double value = a_;
  switch (kind_) {
    case Kind::constant: break;
    case Kind::uniform: value = std::uniform_real_distribution<double>(a_, b_)(rng); break;
    case Kind::exponential: value = std::exponential_distribution<double>(1.0 / a_)(rng); break;
  }
  return std::max(value, std::numeric_limits<double>::min());
}

Network::Network(Topology topology, LatencyModel latency, std::uint64_t seed)
    : topology_(std::move(topology)),
      latency_(latency),
      rng_(make_stream(seed, Stream::latency)),
      seen_(topology_.size()) {
  validate_topology(topology_);
}

InFlightMessage Network::send(std::shared_ptr<const GradientMessage> gradient, NodeIndex from, NodeIndex to,
                              SimTime now) {
  SimTime at = now + latency_.sample(rng_);
  if (!(at > now)) at = std::nextafter(now, std::numeric_limits<double>::infinity());
  return InFlightMessage{std::move(gradient), from, to, now, at, next_sequence_++};
}

std::vector<InFlightMessage> Network::disseminate(NodeIndex origin, std::shared_ptr<const GradientMessage> gradient,
                                                  SimTime now) {
  if (origin >= topology_.size()) throw Error("origin node out of range");
  seen_[origin].insert(gradient->id);
  std::vector<InFlightMessage> out;
  for (const NodeIndex peer : topology_.neighbors(origin)) out.push_back(send(gradient, origin, peer, now));
  return out;
}

ReceiveResult Network::on_receive(const InFlightMessage& msg, SimTime now) {
  ReceiveResult result;
  if (!seen_.at(msg.to).insert(msg.gradient->id)) return result;
  result.accepted = true;
  for (const NodeIndex peer : topology_.neighbors(msg.to))
    if (peer != msg.from) result.relays.push_back(send(msg.gradient, msg.to, peer, now));
  return result;
}

bool Network::has_seen(NodeIndex node, const GradientId& id) const { return seen_.at(node).contains(id); }

}  // namespace dasgd
