#include "dasgd/ledger.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include "dasgd/error.hpp"

namespace dasgd {

std::ostream& operator<<(std::ostream& os, const GradientId& id) {
  return os << "g(" << id.producer << "," << id.step << ")";
}

std::ostream& operator<<(std::ostream& os, const StalenessRecord& r) {
  return os << "{applier=" << r.applier << " t=" << r.applier_step << " producer=" << r.producer
            << " s=" << r.producer_step << " tight=" << r.tight_size << " loose=" << r.loose_size << "}";
}

GradientSet::GradientSet(std::initializer_list<GradientId> ids) {
  for (const auto& id : ids) members_.insert(id);
}

std::vector<GradientId> GradientSet::sorted() const {
  std::vector<GradientId> out(members_.begin(), members_.end());
  std::sort(out.begin(), out.end());
  return out;
}

GradientSet tight_staleness(const GradientSet& a, const GradientSet& b) {
  GradientSet out;
  for (const auto& id : a)
    if (!b.contains(id)) out.insert(id);
  for (const auto& id : b)
    if (!a.contains(id)) out.insert(id);
  return out;
}

GradientSet loose_staleness(const CausalSnapshot& snapshots, const GradientSet& applier,
                            const GradientSet& producer) {
  GradientSet result = tight_staleness(applier, producer);
  std::vector<GradientId> worklist;
  for (const auto& id : producer)
    if (!applier.contains(id)) worklist.push_back(id);

  GradientSet expanded;
  while (!worklist.empty()) {
    const GradientId id = worklist.back();
    worklist.pop_back();
    if (!expanded.insert(id)) continue;
    const auto it = snapshots.find(id);
    if (it == snapshots.end()) {
      std::ostringstream msg;
      msg << "missing causal snapshot for " << id;
      throw ProtocolError(msg.str());
    }
    for (const auto& member : tight_staleness(applier, it->second)) result.insert(member);
    for (const auto& member : it->second)
      if (!applier.contains(member) && !expanded.contains(member)) worklist.push_back(member);
  }
  return result;
}

Ledger::Ledger(std::size_t logs) : logs_(logs) {
  if (logs == 0) throw Error("ledger needs at least one log");
}

std::uint32_t Ledger::serial_for(const GradientId& id) const {
  const auto it = serial_.find(id);
  if (it == serial_.end()) {
    std::ostringstream msg;
    msg << "unknown gradient " << id;
    throw ProtocolError(msg.str());
  }
  return it->second;
}

void Ledger::check_ref(LogRef ref) const {
  if (ref.owner >= logs_.size()) throw ProtocolError("log index out of range");
  if (ref.length > logs_[ref.owner].order.size()) throw ProtocolError("snapshot extends beyond the log end");
}

void Ledger::record_compute(const GradientId& id, LogRef snapshot) {
  if (serial_.contains(id)) {
    std::ostringstream msg;
    msg << "gradient " << id << " computed twice";
    throw ProtocolError(msg.str());
  }
  check_ref(snapshot);
  const auto serial = static_cast<std::uint32_t>(ids_.size());
  ids_.push_back(id);
  snapshots_.push_back(snapshot);
  serial_.emplace(id, serial);
  for (auto& log : logs_) log.position.push_back(kAbsent);
}

void Ledger::record_compute(const GradientId& id) {
  if (id.producer >= logs_.size()) throw ProtocolError("producer index out of range");
  const Step current = logs_[id.producer].order.size();
  if (current != id.step) {
    std::ostringstream msg;
    msg << "node " << id.producer << " computes at step " << id.step << " but has applied " << current
        << " gradients";
    throw ProtocolError(msg.str());
  }
  record_compute(id, LogRef{id.producer, current});
}

StalenessRecord Ledger::record_application(NodeIndex applier, Step applier_step, const GradientId& id) {
  if (applier >= logs_.size()) throw ProtocolError("applier index out of range");
  Log& log = logs_[applier];
  if (applier_step != log.order.size()) {
    std::ostringstream msg;
    msg << "node " << applier << " reports step " << applier_step << " but has applied " << log.order.size()
        << " gradients";
    throw ProtocolError(msg.str());
  }
  const std::uint32_t serial = serial_for(id);
  if (log.position[serial] != kAbsent) {
    std::ostringstream msg;
    msg << "node " << applier << " applies " << id << " twice";
    throw ProtocolError(msg.str());
  }

  const LogRef current{applier, applier_step};
  const LogRef produced = snapshots_[serial];
  StalenessRecord record{applier, applier_step, id.producer, id.step, tight_size(current, produced),
                         loose_size(current, produced)};

  log.position[serial] = static_cast<std::uint32_t>(log.order.size());
  log.order.push_back(serial);
  records_.push_back(record);
  return record;
}

std::size_t Ledger::tight_size(LogRef a, LogRef b) const {
  check_ref(a);
  check_ref(b);
  if (a.owner == b.owner) return a.length > b.length ? a.length - b.length : b.length - a.length;
  const auto& order = logs_[b.owner].order;
  std::size_t shared = 0;
  for (Step k = 0; k < b.length; ++k) shared += in_prefix(a, order[k]) ? 1 : 0;
  return a.length + b.length - 2 * shared;
}

std::vector<GradientId> Ledger::staleness_set(LogRef a, LogRef b) const {
  check_ref(a);
  check_ref(b);
  std::vector<GradientId> out;
  for (Step k = 0; k < a.length; ++k) {
    const auto serial = logs_[a.owner].order[k];
    if (!in_prefix(b, serial)) out.push_back(ids_[serial]);
  }
  for (Step k = 0; k < b.length; ++k) {
    const auto serial = logs_[b.owner].order[k];
    if (!in_prefix(a, serial)) out.push_back(ids_[serial]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// The loose set equals
//   (union over reached models X of X \ A)  u  (A \ intersection of reached X)
// where the reached models are the producer's model plus the snapshot of every
// foreign gradient transitively reachable through snapshots. The first part is
// exactly the set of reached foreign gradients. Reached models owned by the same
// log are nested prefixes, so the intersection only needs the shortest prefix per
// owner, and each owner's log only needs scanning up to its longest reached prefix.
std::size_t Ledger::loose_size(LogRef applier, LogRef producer) const {
  check_ref(applier);
  check_ref(producer);
  const std::size_t owners = logs_.size();
  constexpr Step kUnset = std::numeric_limits<Step>::max();
  std::vector<Step> shortest(owners, kUnset);
  std::vector<Step> scanned(owners, 0);
  std::vector<char> reached(ids_.size(), 0);
  std::vector<std::uint32_t> worklist;
  std::size_t foreign = 0;

  auto visit_model = [&](LogRef model) {
    shortest[model.owner] = std::min(shortest[model.owner], model.length);
    const auto& order = logs_[model.owner].order;
    for (Step k = scanned[model.owner]; k < model.length; ++k) {
      const auto serial = order[k];
      if (!reached[serial] && !in_prefix(applier, serial)) {
        reached[serial] = 1;
        worklist.push_back(serial);
      }
    }
    scanned[model.owner] = std::max(scanned[model.owner], model.length);
  };

  visit_model(producer);
  while (!worklist.empty()) {
    const auto serial = worklist.back();
    worklist.pop_back();
    ++foreign;
    visit_model(snapshots_[serial]);
  }

  std::size_t missing = 0;
  const auto& own = logs_[applier.owner].order;
  for (Step k = 0; k < applier.length; ++k) {
    const auto serial = own[k];
    for (std::size_t o = 0; o < owners; ++o) {
      if (shortest[o] != kUnset && !in_prefix(LogRef{static_cast<NodeIndex>(o), shortest[o]}, serial)) {
        ++missing;
        break;
      }
    }
  }
  return foreign + missing;
}

LogRef Ledger::snapshot_of(const GradientId& id) const { return snapshots_[serial_for(id)]; }

bool Ledger::contains(NodeIndex log, const GradientId& id) const {
  const auto it = serial_.find(id);
  return it != serial_.end() && logs_.at(log).position[it->second] != kAbsent;
}

std::vector<GradientId> Ledger::applied(NodeIndex log) const {
  std::vector<GradientId> out;
  out.reserve(logs_.at(log).order.size());
  for (const auto serial : logs_[log].order) out.push_back(ids_[serial]);
  return out;
}

GradientSet Ledger::applied_set(LogRef ref) const {
  check_ref(ref);
  GradientSet out;
  for (Step k = 0; k < ref.length; ++k) out.insert(ids_[logs_[ref.owner].order[k]]);
  return out;
}

StalenessSummary Ledger::summarize() const { return dasgd::summarize(records_); }

StalenessSummary summarize(std::span<const StalenessRecord> records) {
  if (records.empty()) throw Error("cannot summarize staleness of an empty ledger");
  struct PerNode {
    std::size_t count = 0;
    double tight = 0.0;
    double loose = 0.0;
  };
  std::map<NodeIndex, PerNode> per_node;
  StalenessSummary s;
  for (const auto& r : records) {
    auto& p = per_node[r.applier];
    ++p.count;
    p.tight += static_cast<double>(r.tight_size);
    p.loose += static_cast<double>(r.loose_size);
    s.s_max = std::max(s.s_max, r.tight_size);
    s.shat_max = std::max(s.shat_max, r.loose_size);
    s.max_step = std::max(s.max_step, r.applier_step);
  }
  for (const auto& [node, p] : per_node) {
    s.s_avg = std::max(s.s_avg, p.tight / static_cast<double>(p.count));
    s.shat_avg = std::max(s.shat_avg, p.loose / static_cast<double>(p.count));
  }
  s.events = records.size();
  return s;
}

}  // namespace dasgd
