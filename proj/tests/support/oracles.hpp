#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "dasgd/event_log.hpp"
#include "dasgd/ledger.hpp"
#include "dasgd/objective.hpp"

namespace dasgd::testing {

/// Loose staleness by literal re-expansion: every model reachable from the
/// producer set gets an estimate, initialised to its symmetric difference with
/// the applier set, and each estimate is repeatedly replaced by the right-hand
/// side of the recursive definition until no estimate grows.
GradientSet naive_loose_staleness(const CausalSnapshot& snapshots, const GradientSet& applier,
                                  const GradientSet& producer);

/// A protocol-valid event log: every node computes at most `max_computes`
/// gradients in total across the run, every computed gradient is eventually
/// applied by every node, and foreign gradients are applied in random order.
std::vector<LogEvent> random_event_log(std::mt19937_64& rng, std::size_t nodes, std::size_t max_total_gradients);

/// Central differences with step h * max(1, |x_k|).
ParamVector finite_difference_gradient(const std::function<double(const ParamVector&)>& f, const ParamVector& x,
                                       double h = 1e-6);

}  // namespace dasgd::testing
