#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dasgd/error.hpp"
#include "dasgd/event_log.hpp"
#include "dasgd/ledger.hpp"
#include "oracles.hpp"

namespace dasgd {
namespace {

const GradientId a{0, 0};
const GradientId b{0, 1};
const GradientId c{1, 0};
const GradientId d{2, 0};

TEST(TightStaleness, SymmetricDifference) {
  const GradientSet s = tight_staleness({a, b, c}, {b, c, d});
  EXPECT_EQ(s, (GradientSet{a, d}));
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(tight_staleness({b, c, d}, {a, b, c}), s);
}

TEST(TightStaleness, IdenticalSetsAreFresh) {
  const GradientSet g{a, b, c};
  EXPECT_TRUE(tight_staleness(g, g).empty());
}

TEST(LooseStaleness, NoForeignGradientsMeansTight) {
  CausalSnapshot snaps{{a, {}}, {b, {a}}, {c, {}}};
  const GradientSet applier{a, b, c};
  const GradientSet producer{a, c};
  EXPECT_EQ(loose_staleness(snaps, applier, producer), tight_staleness(applier, producer));
}

TEST(LooseStaleness, SelfApplicationIsEmpty) {
  CausalSnapshot snaps{{a, {}}, {b, {a}}};
  EXPECT_TRUE(loose_staleness(snaps, {a}, {a}).empty());
}

TEST(LooseStaleness, FollowsSnapshotsOfForeignGradients) {
  // d was computed after applying a; the producer holds d but not a.
  CausalSnapshot snaps{{a, {}}, {d, {a}}, {c, {d}}};
  const GradientSet applier{};
  const GradientSet producer{d};
  EXPECT_EQ(tight_staleness(applier, producer), (GradientSet{d}));
  EXPECT_EQ(loose_staleness(snaps, applier, producer), (GradientSet{a, d}));
}

TEST(LooseStaleness, MissingSnapshotIsAnError) {
  CausalSnapshot snaps{{a, {}}};
  EXPECT_THROW(loose_staleness(snaps, {a}, {a, c}), ProtocolError);
}

// Replays a log with explicit sets, handing each application to `visit`.
template <typename Visit>
void replay_sets(const std::vector<LogEvent>& log, Visit visit) {
  std::vector<GradientSet> sets(node_count(log));
  CausalSnapshot snaps;
  for (const auto& e : log) {
    if (e.kind == LogEvent::Kind::compute) {
      snaps.emplace(GradientId{e.node, e.step}, sets[e.node]);
    } else {
      visit(snaps, sets[e.node], snaps.at(e.gradient));
      sets[e.node].insert(e.gradient);
    }
  }
}

TEST(LooseStaleness, FixedPointMatchesNaiveReexpansion) {
  std::mt19937_64 rng(2024);
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto log = testing::random_event_log(rng, 3, 10);
    replay_sets(log, [&](const CausalSnapshot& snaps, const GradientSet& applier, const GradientSet& producer) {
      const GradientSet fast = loose_staleness(snaps, applier, producer);
      ASSERT_EQ(fast, testing::naive_loose_staleness(snaps, applier, producer)) << "trial " << trial;
      for (const auto& g : tight_staleness(applier, producer)) EXPECT_TRUE(fast.contains(g));
      ++compared;
    });
  }
  EXPECT_GT(compared, 5000u);
}

TEST(Ledger, FirstEventIsFresh) {
  Ledger ledger(2);
  ledger.record_compute(a);
  const auto r = ledger.record_application(0, 0, a);
  EXPECT_EQ(r.tight_size, 0u);
  EXPECT_EQ(r.loose_size, 0u);
}

TEST(Ledger, ProtocolViolationsThrow) {
  Ledger ledger(2);
  ledger.record_compute(a);
  ledger.record_application(0, 0, a);
  EXPECT_THROW(ledger.record_application(0, 1, a), ProtocolError);    // duplicate
  EXPECT_THROW(ledger.record_application(1, 0, c), ProtocolError);    // never computed
  EXPECT_THROW(ledger.record_application(1, 3, a), ProtocolError);    // step out of sync
  EXPECT_THROW(ledger.record_compute(a), ProtocolError);              // computed twice
  EXPECT_THROW(ledger.record_compute(GradientId{1, 4}), ProtocolError);
  EXPECT_THROW(ledger.record_compute(GradientId{7, 0}), ProtocolError);
  EXPECT_THROW(ledger.record_compute(GradientId{1, 0}, LogRef{0, 5}), ProtocolError);
}

TEST(Ledger, RecordsMatchBruteForceOnRandomLogs) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto log = testing::random_event_log(rng, 4, 40);
    const auto fast = replay_incremental(log);
    std::size_t k = 0;
    replay_sets(log, [&](const CausalSnapshot& snaps, const GradientSet& applier, const GradientSet& producer) {
      ASSERT_LT(k, fast.size());
      EXPECT_EQ(fast[k].tight_size, tight_staleness(applier, producer).size());
      EXPECT_EQ(fast[k].loose_size, testing::naive_loose_staleness(snaps, applier, producer).size());
      EXPECT_GE(fast[k].loose_size, fast[k].tight_size);
      ++k;
    });
    EXPECT_EQ(k, fast.size());
  }
}

TEST(Ledger, StalenessSetAndMaterializedSets) {
  Ledger ledger(2);
  ledger.record_compute(a);
  ledger.record_application(0, 0, a);
  ledger.record_compute(c);
  ledger.record_application(1, 0, c);
  ledger.record_application(1, 1, a);
  ledger.record_compute(GradientId{1, 2});
  EXPECT_EQ(ledger.snapshot_of(GradientId{1, 2}), (LogRef{1, 2}));
  EXPECT_EQ(ledger.applied_set(LogRef{1, 2}), (GradientSet{a, c}));
  EXPECT_EQ(ledger.staleness_set(LogRef{0, 1}, LogRef{1, 2}), (std::vector<GradientId>{c}));
  EXPECT_EQ(ledger.applied(1), (std::vector<GradientId>{c, a}));
  EXPECT_TRUE(ledger.contains(1, a));
  EXPECT_FALSE(ledger.contains(0, c));
  const auto r = ledger.record_application(0, 1, GradientId{1, 2});
  EXPECT_EQ(r.tight_size, 1u);
}

TEST(Summary, SingleNodeIsAlwaysFresh) {
  Ledger ledger(1);
  for (Step t = 0; t < 25; ++t) {
    ledger.record_compute(GradientId{0, t});
    ledger.record_application(0, t, GradientId{0, t});
  }
  const auto s = ledger.summarize();
  EXPECT_EQ(s.s_avg, 0.0);
  EXPECT_EQ(s.s_max, 0u);
  EXPECT_EQ(s.max_step, 24u);
  EXPECT_EQ(s.events, 25u);
}

TEST(Summary, WorstNodeAverageAndGlobalMax) {
  std::vector<StalenessRecord> records{
      {0, 0, 0, 0, 0, 0}, {0, 1, 1, 0, 2, 3}, {1, 0, 1, 0, 0, 0}, {1, 1, 0, 0, 1, 1}, {1, 2, 2, 0, 5, 5},
  };
  const auto s = summarize(records);
  EXPECT_DOUBLE_EQ(s.s_avg, 2.0);     // node 1: (0 + 1 + 5) / 3
  EXPECT_EQ(s.s_max, 5u);
  EXPECT_DOUBLE_EQ(s.shat_avg, 2.0);  // node 1 again; node 0 is 1.5
  EXPECT_EQ(s.shat_max, 5u);
  EXPECT_THROW(summarize(std::vector<StalenessRecord>{}), Error);
  EXPECT_THROW(Ledger(1).summarize(), Error);
}

TEST(GradientId, PrintsProducerAndStep) {
  std::ostringstream out;
  out << GradientId{3, 14};
  EXPECT_EQ(out.str(), "g(3,14)");
}

}  // namespace
}  // namespace dasgd
