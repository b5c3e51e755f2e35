#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dasgd {

using NodeIndex = std::uint32_t;
using Step = std::uint64_t;

/// Identity of gradient g_j^s: producer j and the producer's local step s.
/// Ordering is the canonical (producer, step) order.
struct GradientId {
  NodeIndex producer = 0;
  Step step = 0;

  friend auto operator<=>(const GradientId&, const GradientId&) = default;
};

std::ostream& operator<<(std::ostream& os, const GradientId& id);

struct GradientIdHash {
  std::size_t operator()(const GradientId& id) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(id.producer) << 48) ^ id.step);
  }
};

/// A set of gradient identities, e.g. G_i^t.
class GradientSet {
 public:
  GradientSet() = default;
  GradientSet(std::initializer_list<GradientId> ids);

  bool insert(const GradientId& id) { return members_.insert(id).second; }
  bool contains(const GradientId& id) const { return members_.contains(id); }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }

  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  /// Members in canonical order.
  std::vector<GradientId> sorted() const;

  friend bool operator==(const GradientSet& a, const GradientSet& b) { return a.members_ == b.members_; }

 private:
  std::unordered_set<GradientId, GradientIdHash> members_;
};

/// For each computed gradient g_k^u, the producer's set G_k^u at the moment
/// it was computed.
using CausalSnapshot = std::unordered_map<GradientId, GradientSet, GradientIdHash>;

/// Tight staleness: (a \ b) u (b \ a).
GradientSet tight_staleness(const GradientSet& a, const GradientSet& b);

/// Loose staleness of applier set `applier` against producer set `producer`:
/// the symmetric difference, enlarged by the loose staleness against the
/// snapshot of every gradient in producer \ applier, recursively. Computed as
/// a worklist fixed point. Throws ProtocolError when a snapshot is missing.
GradientSet loose_staleness(const CausalSnapshot& snapshots, const GradientSet& applier,
                            const GradientSet& producer);

/// |S| and |S^| of one application event "applier applies g_producer^producer_step
/// at applier_step + 1".
struct StalenessRecord {
  NodeIndex applier = 0;
  Step applier_step = 0;
  NodeIndex producer = 0;
  Step producer_step = 0;
  std::size_t tight_size = 0;
  std::size_t loose_size = 0;

  friend bool operator==(const StalenessRecord&, const StalenessRecord&) = default;
};

std::ostream& operator<<(std::ostream& os, const StalenessRecord& r);

/// Worst-node average and global maximum of per-application staleness.
struct StalenessSummary {
  double s_avg = 0.0;
  std::size_t s_max = 0;
  double shat_avg = 0.0;
  std::size_t shat_max = 0;
  Step max_step = 0;          // T: largest applier step seen
  std::size_t events = 0;
};

/// Prefix of length `length` of the application log of `owner`. Every model
/// in the system is such a prefix: a node's gradient set only grows by
/// appending, so G_i^t is the first t entries of node i's log.
struct LogRef {
  NodeIndex owner = 0;
  Step length = 0;

  friend bool operator==(const LogRef&, const LogRef&) = default;
};

/// Incremental record of who applied what, and of the producer-side snapshot
/// of every computed gradient. Snapshots are stored as LogRefs into the
/// append-only application logs, so memory is O(logs x gradients) rather than
/// one full set copy per gradient.
class Ledger {
 public:
  /// `logs` is the number of models that apply gradients (n for DASGD, one
  /// server log for the parameter-server emulation).
  explicit Ledger(std::size_t logs);

  std::size_t log_count() const noexcept { return logs_.size(); }
  std::size_t gradient_count() const noexcept { return ids_.size(); }

  /// Registers g = `id`, computed from the model `snapshot`.
  /// Throws ProtocolError for a repeated id or a snapshot beyond the log end.
  void record_compute(const GradientId& id, LogRef snapshot);
  /// DASGD case: the producer computes from its own current model, which must
  /// be exactly `id.step` applications long.
  void record_compute(const GradientId& id);

  /// Records that `applier` (currently at `applier_step`) applies `id`.
  /// Staleness is computed against the applier's set before insertion.
  /// Throws ProtocolError on duplicate application, unknown gradient, or
  /// applier_step != current log length.
  StalenessRecord record_application(NodeIndex applier, Step applier_step, const GradientId& id);

  /// Members of the tight staleness set between two prefixes, canonical order.
  std::vector<GradientId> staleness_set(LogRef a, LogRef b) const;
  std::size_t tight_size(LogRef a, LogRef b) const;
  std::size_t loose_size(LogRef applier, LogRef producer) const;

  LogRef snapshot_of(const GradientId& id) const;
  bool knows(const GradientId& id) const { return serial_.contains(id); }
  bool contains(NodeIndex log, const GradientId& id) const;
  Step length(NodeIndex log) const { return logs_.at(log).order.size(); }

  /// Application order of `log`.
  std::vector<GradientId> applied(NodeIndex log) const;
  /// G materialized as a set.
  GradientSet applied_set(LogRef ref) const;

  const std::vector<StalenessRecord>& records() const noexcept { return records_; }

  /// Throws Error when no application has been recorded.
  StalenessSummary summarize() const;

 private:
  static constexpr std::uint32_t kAbsent = std::numeric_limits<std::uint32_t>::max();

  struct Log {
    std::vector<std::uint32_t> order;     // serials in application order
    std::vector<std::uint32_t> position;  // serial -> index in order, kAbsent if not applied
  };

  std::uint32_t serial_for(const GradientId& id) const;
  bool in_prefix(LogRef ref, std::uint32_t serial) const {
    const std::uint32_t pos = logs_[ref.owner].position[serial];
    return pos != kAbsent && pos < ref.length;
  }
  void check_ref(LogRef ref) const;

  std::vector<Log> logs_;
  std::vector<GradientId> ids_;             // serial -> id
  std::vector<LogRef> snapshots_;           // serial -> producing model
  std::unordered_map<GradientId, std::uint32_t, GradientIdHash> serial_;
  std::vector<StalenessRecord> records_;
};

/// Worst-node average and global maximum over an arbitrary record list.
StalenessSummary summarize(std::span<const StalenessRecord> records);

}  // namespace dasgd
