#include <algorithm>
#include <random>

#include "dasgd/engine.hpp"
#include "dasgd/error.hpp"
#include "dasgd/seeding.hpp"
#include "sim_common.hpp"

namespace dasgd {

RunTrace run_sync_baseline(const SimConfig& config) {
  detail::validate_config(config);
  const std::size_t n = config.n();
  RunTrace trace;
  trace.mode = RunMode::sync;
  trace.applied.emplace_back();

  ParamVector x = config.initial_point();
  SimTime now = 0.0;
  for (Step round = 0; round < config.samples_per_node; ++round) {
    const auto metrics = detail::measure(config.objective, x);
    detail::guard_finite(x, metrics.loss, config, 0, round, trace.staleness);

    ParamVector sum = ParamVector::Zero(x.size());
    SimTime slowest = 0.0;
    for (NodeIndex j = 0; j < n; ++j) {
      const GradientId id{j, round};
      const double dt = config.compute.sample(config.seed, j, round);
      slowest = std::max(slowest, dt);
      ParamVector g = stochastic_gradient(config.objective, x, gradient_seed(config.seed, j, round));
      sum += g;
      trace.events.push_back(TraceEvent{now + dt, j, EventKind::compute, id, round, j});
      trace.gradients.push_back(ComputedGradient{id, std::move(g)});
      trace.applied.front().push_back(id);
    }
    now += slowest;
    trace.gradients_computed += n;
    trace.applications.push_back(
        ApplicationSample{0, round, now, GradientId{0, round}, metrics.loss, metrics.grad_norm_sq, 0, 0, std::nullopt});
    trace.events.push_back(TraceEvent{now, 0, EventKind::apply, GradientId{0, round}, round, 0});
    x -= config.eta * (sum / static_cast<double>(n));
  }
  detail::guard_finite(x, detail::loss_or_inf(config.objective, x), config, 0, config.samples_per_node, trace.staleness);
  trace.final_models.push_back(std::move(x));
  trace.end_time = now;
  return trace;
}

namespace {

using detail::EventQueue;
using detail::Rank;

// Workers are nodes 0..n-1; the server is log n of the ledger.
class CentralizedRun {
 public:
  explicit CentralizedRun(const SimConfig& config)
      : config_(config),
        n_(static_cast<NodeIndex>(config.n())),
        ledger_(config.n() + 1),
        latency_rng_(make_stream(config.seed, Stream::latency)),
        server_(config.initial_point()),
        workers_(config.n()) {
    trace_.mode = RunMode::centralized_asgd;
    for (auto& w : workers_) w.samples_remaining = config.samples_per_node;
  }

  RunTrace execute() {
    for (NodeIndex w = 0; w < n_; ++w) {
      now_ = detail::start_time(config_, w);
      fetch(w);
      queue_.push(now_, Rank::step, w);
    }
    while (!queue_.empty()) {
      const auto ev = queue_.pop();
      now_ = ev.time;
      switch (ev.rank) {
        case Rank::step: start_compute(ev.node); break;
        case Rank::compute_done: compute_done(ev.node); break;
        case Rank::deliver: server_apply(ev.payload); break;
      }
    }
    const Step expected = static_cast<Step>(n_) * config_.samples_per_node;
    if (ledger_.length(n_) != expected) throw ProtocolError("server did not apply every gradient");
    trace_.final_models.push_back(server_);
    trace_.applied.push_back(ledger_.applied(n_));
    trace_.staleness = ledger_.records();
    trace_.summary = ledger_.summarize();
    trace_.end_time = now_;
    return std::move(trace_);
  }

 private:
  struct Worker {
    ParamVector params;
    ParamVector pending;  // model reply in flight
    Step fetched_len = 0;
    Step fetched_updates = 0;
    Step local_step = 0;
    std::size_t samples_remaining = 0;
  };

  struct Upload {
    GradientId id;
    ParamVector values;
    NodeIndex worker = 0;
  };

  double latency() {
    const double d = config_.latency.sample(latency_rng_);
    return std::max(d, std::numeric_limits<double>::min());
  }

  void fetch(NodeIndex w) {
    workers_[w].pending = server_;
    workers_[w].fetched_len = ledger_.length(n_);
    workers_[w].fetched_updates = server_updates_;
  }

  void start_compute(NodeIndex w) {
    Worker& worker = workers_[w];
    worker.params = std::move(worker.pending);
    --worker.samples_remaining;
    queue_.push(now_ + config_.compute.sample(config_.seed, w, worker.local_step), Rank::compute_done, w);
  }

  void compute_done(NodeIndex w) {
    Worker& worker = workers_[w];
    const GradientId id{w, worker.local_step++};
    ParamVector g = stochastic_gradient(config_.objective, worker.params, gradient_seed(config_.seed, id.producer, id.step));
    ledger_.record_compute(id, LogRef{n_, worker.fetched_len});
    trace_.events.push_back(TraceEvent{now_, w, EventKind::compute, id, id.step, w});
    trace_.events.push_back(TraceEvent{now_, w, EventKind::send, id, id.step, n_});
    trace_.gradients.push_back(ComputedGradient{id, g});
    ++trace_.gradients_computed;
    uploads_.push_back(Upload{id, std::move(g), w});
    queue_.push(now_ + latency(), Rank::deliver, n_, uploads_.size() - 1);
  }

  void server_apply(std::size_t slot) {
    Upload up = std::move(uploads_[slot]);
    Worker& worker = workers_[up.worker];
    const Step len = ledger_.length(n_);
    const std::size_t delay = server_updates_ - worker.fetched_updates;
    const auto record = ledger_.record_application(n_, len, up.id);
    const auto metrics = detail::measure(config_.objective, server_);
    detail::guard_finite(server_, metrics.loss, config_, n_, len, ledger_.records());

    trace_.events.push_back(TraceEvent{now_, n_, EventKind::deliver, up.id, len, up.worker});
    trace_.events.push_back(TraceEvent{now_, n_, EventKind::apply, up.id, len, up.worker});
    trace_.applications.push_back(ApplicationSample{n_, len, now_, up.id, metrics.loss, metrics.grad_norm_sq,
                                                    record.tight_size, record.loose_size, delay});
    server_ -= config_.eta * up.values;
    ++server_updates_;
    if (!server_.allFinite()) detail::guard_finite(server_, metrics.loss, config_, n_, len + 1, ledger_.records());

    if (worker.samples_remaining > 0) {
      fetch(up.worker);
      queue_.push(now_ + latency(), Rank::step, up.worker);
    }
  }

  const SimConfig& config_;
  NodeIndex n_;
  Ledger ledger_;
  std::mt19937_64 latency_rng_;
  ParamVector server_;
  std::vector<Worker> workers_;
  std::vector<Upload> uploads_;
  Step server_updates_ = 0;
  EventQueue queue_;
  RunTrace trace_;
  SimTime now_ = 0.0;
};

}  // namespace

RunTrace run_centralized_asgd(const SimConfig& config) {
  detail::validate_config(config);
  return CentralizedRun(config).execute();
}

}  // namespace dasgd
