#pragma once

#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "dasgd/engine.hpp"
#include "dasgd/error.hpp"

namespace dasgd::detail {

/// Events at the same time run deliveries first, then compute completions,
/// then loop iterations; remaining ties go by node and scheduling order.
enum class Rank : std::uint8_t { deliver = 0, compute_done = 1, step = 2 };

struct Scheduled {
  SimTime time = 0.0;
  Rank rank = Rank::step;
  NodeIndex node = 0;
  std::uint64_t sequence = 0;
  std::size_t payload = 0;
};

class EventQueue {
 public:
  void push(SimTime time, Rank rank, NodeIndex node, std::size_t payload = 0) {
    queue_.push(Scheduled{time, rank, node, next_++, payload});
  }
  bool empty() const { return queue_.empty(); }
  Scheduled pop() {
    Scheduled top = queue_.top();
    queue_.pop();
    return top;
  }

 private:
  struct Later {
    bool operator()(const Scheduled& a, const Scheduled& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.rank != b.rank) return a.rank > b.rank;
      if (a.node != b.node) return a.node > b.node;
      return a.sequence > b.sequence;
    }
  };

  std::priority_queue<Scheduled, std::vector<Scheduled>, Later> queue_;
  std::uint64_t next_ = 0;
};

void validate_config(const SimConfig& config);
SimTime start_time(const SimConfig& config, NodeIndex node);

struct ModelMetrics {
  double loss = 0.0;
  ParamVector gradient;
  double grad_norm_sq = 0.0;
};

/// Loss, or +infinity when x or the loss is not finite.
double loss_or_inf(const ObjectiveSpec& objective, const ParamVector& x);

ModelMetrics measure(const ObjectiveSpec& objective, const ParamVector& x);

/// Throws DivergenceError when `x` or `loss` is not finite.
void guard_finite(const ParamVector& x, double loss, const SimConfig& config, NodeIndex node, Step step,
                  const std::vector<StalenessRecord>& records);

}  // namespace dasgd::detail
