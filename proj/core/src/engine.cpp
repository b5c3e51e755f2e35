#include "dasgd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <unordered_map>

#include "dasgd/error.hpp"
#include "dasgd/seeding.hpp"
#include "sim_common.hpp"

namespace dasgd {

double ComputeTimeModel::expected(NodeIndex node) const {
  const double base = kind == Kind::uniform ? 0.5 * (lo + hi) : mean;
  return base * scale(node);
}

double ComputeTimeModel::sample(std::uint64_t run_seed, NodeIndex node, Step step) const {
  std::mt19937_64 rng(derive_seed(run_seed, {static_cast<std::uint64_t>(Stream::compute_time), node, step}));
  double value = mean;
  switch (kind) {
    case Kind::constant: break;
    case Kind::uniform: value = std::uniform_real_distribution<double>(lo, hi)(rng); break;
    case Kind::exponential: value = std::exponential_distribution<double>(1.0 / mean)(rng); break;
  }
  return std::max(value * scale(node), std::numeric_limits<double>::min());
}

std::string to_string(StartPhase phase) {
  switch (phase) {
    case StartPhase::aligned: return "aligned";
    case StartPhase::staggered: return "staggered";
    case StartPhase::random: return "random";
  }
  return "unknown";
}

StartPhase parse_start_phase(const std::string& name) {
  if (name == "aligned") return StartPhase::aligned;
  if (name == "staggered") return StartPhase::staggered;
  if (name == "random") return StartPhase::random;
  throw Error("unknown start phase '" + name + "' (expected aligned, staggered or random)");
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::compute: return "compute";
    case EventKind::apply: return "apply";
    case EventKind::send: return "send";
    case EventKind::deliver: return "deliver";
    case EventKind::duplicate: return "duplicate";
  }
  return "unknown";
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::dasgd: return "dasgd";
    case RunMode::sync: return "sync";
    case RunMode::centralized_asgd: return "centralized_asgd";
  }
  return "unknown";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "dasgd") return RunMode::dasgd;
  if (name == "sync") return RunMode::sync;
  if (name == "centralized_asgd") return RunMode::centralized_asgd;
  throw Error("unknown mode '" + name + "' (expected dasgd, sync or centralized_asgd)");
}

ParamVector SimConfig::initial_point() const {
  if (x0.size() == 0) return ParamVector::Zero(static_cast<Eigen::Index>(objective.dim()));
  return x0;
}

namespace detail {

void validate_config(const SimConfig& config) {
  validate_topology(config.topology);
  if (!std::isfinite(config.eta) || config.eta <= 0.0) throw Error("eta must be finite and > 0");
  if (config.samples_per_node == 0) throw Error("samples_per_node must be >= 1");
  if (config.x0.size() != 0 && static_cast<std::size_t>(config.x0.size()) != config.objective.dim()) {
    throw DimensionError("x0 has dimension " + std::to_string(config.x0.size()) + ", objective expects " +
                         std::to_string(config.objective.dim()));
  }
  if (config.x0.size() != 0 && !config.x0.allFinite()) throw NumericError("x0 is not finite");
  const auto& c = config.compute;
  const bool bad_mean = !std::isfinite(c.mean) || c.mean <= 0.0;
  const bool bad_range = !std::isfinite(c.lo) || !std::isfinite(c.hi) || c.lo <= 0.0 || c.hi < c.lo;
  if (c.kind != ComputeTimeModel::Kind::uniform && bad_mean) throw Error("compute time mean must be finite and > 0");
  if (c.kind == ComputeTimeModel::Kind::uniform && bad_range) throw Error("compute time needs 0 < lo <= hi");
  if (!c.node_scales.empty()) {
    if (c.node_scales.size() != config.n()) throw Error("node_scales needs one entry per node");
    for (const double s : c.node_scales)
      if (!std::isfinite(s) || s <= 0.0) throw Error("node_scales entries must be finite and > 0");
  }
}

SimTime start_time(const SimConfig& config, NodeIndex node) {
  const double c = config.compute.expected(node);
  switch (config.start) {
    case StartPhase::aligned: return 0.0;
    case StartPhase::staggered: return static_cast<double>(node) * c / static_cast<double>(config.n());
    case StartPhase::random: {
      std::mt19937_64 rng(derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::start_phase), node}));
      return std::uniform_real_distribution<double>(0.0, c)(rng);
    }
  }
  return 0.0;
}

double loss_or_inf(const ObjectiveSpec& objective, const ParamVector& x) {
  if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  try {
    return loss(objective, x);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
}

ModelMetrics measure(const ObjectiveSpec& objective, const ParamVector& x) {
  ModelMetrics m;
  m.loss = loss_or_inf(objective, x);
  m.gradient = full_gradient(objective, x);
  m.grad_norm_sq = m.gradient.squaredNorm();
  return m;
}

void guard_finite(const ParamVector& x, double loss, const SimConfig& config, NodeIndex node, Step step,
                  const std::vector<StalenessRecord>& records) {
  if (x.allFinite() && std::isfinite(loss)) return;
  const double s_avg = records.empty() ? 0.0 : summarize(records).s_avg;
  throw DivergenceError("model of node " + std::to_string(node) + " became non-finite at step " +
                            std::to_string(step) + " (eta too large)",
                        config.eta, node, step, s_avg);
}

}  // namespace detail

namespace {

using detail::EventQueue;
using detail::Rank;

enum class NodeStatus { step_pending, computing, idle };

struct NodeState {
  ParamVector params;
  Step t = 0;
  std::size_t samples_remaining = 0;
  NodeStatus status = NodeStatus::step_pending;
  std::deque<InFlightMessage> buffer;  // delivered copies not yet pulled
};

class DasgdRun {
 public:
  explicit DasgdRun(const SimConfig& config)
      : config_(config),
        net_(config.topology, config.latency, config.seed),
        ledger_(config.n()),
        lipschitz_(config.check_descent ? lipschitz_constant(config.objective) : 0.0) {
    const ParamVector x0 = config.initial_point();
    nodes_.resize(config.n());
    for (auto& node : nodes_) {
      node.params = x0;
      node.samples_remaining = config.samples_per_node;
    }
    trace_.mode = RunMode::dasgd;
  }

  RunTrace execute() {
    for (NodeIndex i = 0; i < nodes_.size(); ++i) queue_.push(detail::start_time(config_, i), Rank::step, i);
    while (!queue_.empty()) {
      const auto ev = queue_.pop();
      now_ = ev.time;
      switch (ev.rank) {
        case Rank::deliver: deliver(ev.payload); break;
        case Rank::compute_done: compute_done(ev.node); break;
        case Rank::step: step(ev.node); break;
      }
    }
    finish();
    return std::move(trace_);
  }

 private:
  void log(EventKind kind, NodeIndex node, const GradientId& id, NodeIndex peer) {
    trace_.events.push_back(TraceEvent{now_, node, kind, id, nodes_[node].t, peer});
  }

  void post(std::vector<InFlightMessage> messages) {
    for (auto& msg : messages) {
      log(EventKind::send, msg.from, msg.gradient->id, msg.to);
      const SimTime at = msg.deliver_at;
      const NodeIndex to = msg.to;
      in_flight_.push_back(std::move(msg));
      queue_.push(at, Rank::deliver, to, in_flight_.size() - 1);
    }
  }

  void schedule_step(NodeIndex i) {
    nodes_[i].status = NodeStatus::step_pending;
    queue_.push(now_, Rank::step, i);
  }

  void deliver(std::size_t slot) {
    InFlightMessage msg = std::move(in_flight_[slot]);
    in_flight_[slot].gradient.reset();
    NodeState& node = nodes_[msg.to];
    log(EventKind::deliver, msg.to, msg.gradient->id, msg.from);
    const NodeIndex to = msg.to;
    node.buffer.push_back(std::move(msg));
    if (node.status == NodeStatus::idle) schedule_step(to);
  }

  // One iteration of the node loop: apply one received gradient if any,
  // otherwise start computing a new one while budget remains.
  void step(NodeIndex i) {
    NodeState& node = nodes_[i];
    while (!node.buffer.empty()) {
      InFlightMessage msg = std::move(node.buffer.front());
      node.buffer.pop_front();
      auto received = net_.on_receive(msg, now_);
      if (!received.accepted) {
        log(EventKind::duplicate, i, msg.gradient->id, msg.from);
        continue;
      }
      post(std::move(received.relays));
      apply(i, *msg.gradient);
      schedule_step(i);
      return;
    }
    if (node.samples_remaining > 0) {
      --node.samples_remaining;
      node.status = NodeStatus::computing;
      queue_.push(now_ + config_.compute.sample(config_.seed, i, node.t), Rank::compute_done, i);
      return;
    }
    node.status = NodeStatus::idle;
  }

  void compute_done(NodeIndex i) {
    NodeState& node = nodes_[i];
    const GradientId id{i, node.t};
    auto message = std::make_shared<GradientMessage>(
        GradientMessage{id, stochastic_gradient(config_.objective, node.params, gradient_seed(config_.seed, i, node.t))});
    ledger_.record_compute(id);
    log(EventKind::compute, i, id, i);
    gradient_slot_.emplace(id, trace_.gradients.size());
    trace_.gradients.push_back(ComputedGradient{id, message->values});
    ++trace_.gradients_computed;

    apply(i, *message);
    post(net_.disseminate(i, std::move(message), now_));
    schedule_step(i);
  }

  void apply(NodeIndex i, const GradientMessage& g) {
    NodeState& node = nodes_[i];
    const Step t = node.t;
    const auto record = ledger_.record_application(i, t, g.id);
    const auto metrics = detail::measure(config_.objective, node.params);
    detail::guard_finite(node.params, metrics.loss, config_, i, t, ledger_.records());

    trace_.applications.push_back(ApplicationSample{i, t, now_, g.id, metrics.loss, metrics.grad_norm_sq,
                                                    record.tight_size, record.loose_size, std::nullopt});
    log(EventKind::apply, i, g.id, g.id.producer);

    ParamVector next = node.params - config_.eta * g.values;
    if (config_.check_descent) check_descent(i, t, g.id, metrics, next);
    node.params = std::move(next);
    ++node.t;
    if (!node.params.allFinite()) detail::guard_finite(node.params, metrics.loss, config_, i, node.t, ledger_.records());
  }

  void check_descent(NodeIndex i, Step t, const GradientId& id, const detail::ModelMetrics& before,
                     const ParamVector& next) {
    double residual = 0.0;
    for (const auto& member : ledger_.staleness_set(LogRef{i, t}, ledger_.snapshot_of(id))) {
      residual += trace_.gradients[gradient_slot_.at(member)].values.norm();
    }
    const double delta = config_.eta * residual;
    const double lhs = detail::loss_or_inf(config_.objective, next);
    const double rhs = before.loss - 0.5 * config_.eta * before.grad_norm_sq +
                       0.5 * config_.eta * lipschitz_ * lipschitz_ * delta * delta;
    const double slack = 1e-12 * (1.0 + std::abs(before.loss));
    trace_.descent.push_back(DescentCheck{i, t, lhs, rhs, lhs <= rhs + slack});
  }

  void finish() {
    for (NodeIndex i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].t != trace_.gradients_computed || !nodes_[i].buffer.empty()) {
        throw ProtocolError("node " + std::to_string(i) + " finished with " + std::to_string(nodes_[i].t) +
                            " of " + std::to_string(trace_.gradients_computed) + " gradients applied");
      }
      trace_.final_models.push_back(nodes_[i].params);
      trace_.applied.push_back(ledger_.applied(i));
    }
    trace_.staleness = ledger_.records();
    trace_.summary = ledger_.summarize();
    trace_.end_time = now_;
  }

  const SimConfig& config_;
  Network net_;
  Ledger ledger_;
  double lipschitz_;
  std::vector<NodeState> nodes_;
  EventQueue queue_;
  std::vector<InFlightMessage> in_flight_;
  std::unordered_map<GradientId, std::size_t, GradientIdHash> gradient_slot_;
  RunTrace trace_;
  SimTime now_ = 0.0;
};

}  // namespace

RunTrace run(const SimConfig& config) {
  detail::validate_config(config);
  return DasgdRun(config).execute();
}

ParamVector reconstruct_model(const ParamVector& x0, double eta, const std::vector<ComputedGradient>& gradients,
                              std::vector<GradientId> ids) {
  std::unordered_map<GradientId, const ParamVector*, GradientIdHash> by_id;
  for (const auto& g : gradients) by_id.emplace(g.id, &g.values);
  std::sort(ids.begin(), ids.end());
  ParamVector sum = ParamVector::Zero(x0.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ProtocolError("reconstruct_model: unknown gradient");
    sum += *it->second;
  }
  return x0 - eta * sum;
}

std::vector<LogEvent> to_event_log(const RunTrace& trace) {
  if (trace.mode != RunMode::dasgd) throw Error("event logs exist only for decentralized runs");
  std::vector<LogEvent> out;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::compute) out.push_back(LogEvent::compute(e.node, e.gradient.step));
    if (e.kind == EventKind::apply) out.push_back(LogEvent::apply(e.node, e.step, e.gradient));
  }
  return out;
}

std::vector<double> psi_series(const RunTrace& trace, NodeIndex node) {
  std::vector<double> out;
  double total = 0.0;
  for (const auto& a : trace.applications) {
    if (a.node != node) continue;
    total += a.grad_norm_sq;
    out.push_back(total / static_cast<double>(out.size() + 1));
  }
  return out;
}

}  // namespace dasgd
