#include <random>

#include <benchmark/benchmark.h>

#include "dasgd/engine.hpp"
#include "dasgd/event_log.hpp"
#include "dasgd/ledger.hpp"

namespace {

using namespace dasgd;

// Every node computes in turn and every other node applies the gradient right
// away, so each application sees a short, steady staleness.
void BM_LedgerRoundRobin(benchmark::State& state) {
  const auto nodes = static_cast<NodeIndex>(state.range(0));
  const auto rounds = static_cast<Step>(state.range(1));
  for (auto _ : state) {
    Ledger ledger(nodes);
    std::vector<Step> step(nodes, 0);
    for (Step r = 0; r < rounds; ++r) {
      for (NodeIndex i = 0; i < nodes; ++i) {
        const GradientId id{i, step[i]};
        ledger.record_compute(id);
        ledger.record_application(i, step[i]++, id);
        for (NodeIndex j = 0; j < nodes; ++j)
          if (j != i) ledger.record_application(j, step[j]++, id);
      }
    }
    benchmark::DoNotOptimize(ledger.records().size());
  }
  state.SetItemsProcessed(state.iterations() * nodes * nodes * static_cast<std::int64_t>(rounds));
}
BENCHMARK(BM_LedgerRoundRobin)->Args({4, 50})->Args({4, 200})->Args({8, 100});

void BM_Run(benchmark::State& state) {
  SimConfig c;
  const auto n = static_cast<std::size_t>(state.range(0));
  c.topology = state.range(1) ? Topology::ring(n) : Topology::fully_connected(n);
  c.objective = random_quadratic(10, 0.1, 1.0, 1.0, 0.0, 7);
  c.samples_per_node = static_cast<std::size_t>(state.range(2));
  c.eta = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(run(c).end_time);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * c.samples_per_node));
}
BENCHMARK(BM_Run)->Args({4, 0, 100})->Args({8, 0, 100})->Args({8, 1, 100})->Unit(benchmark::kMillisecond);

std::vector<LogEvent> interleaved_log(std::size_t nodes, Step per_node, std::uint64_t seed) {
  SimConfig c;
  c.topology = Topology::fully_connected(nodes);
  c.objective = random_quadratic(2, 0.5, 1.0, 1.0, 0.0, 1);
  c.samples_per_node = per_node;
  c.compute.kind = ComputeTimeModel::Kind::exponential;
  c.latency = LatencyModel::exponential(0.5);
  c.seed = seed;
  return to_event_log(run(c));
}

void BM_ReplayIncremental(benchmark::State& state) {
  const auto log = interleaved_log(5, static_cast<Step>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(replay_incremental(log).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.size()));
}
BENCHMARK(BM_ReplayIncremental)->Arg(10)->Arg(40);

void BM_ReplayBruteForce(benchmark::State& state) {
  const auto log = interleaved_log(5, static_cast<Step>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(replay_brute_force(log).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.size()));
}
BENCHMARK(BM_ReplayBruteForce)->Arg(10)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
