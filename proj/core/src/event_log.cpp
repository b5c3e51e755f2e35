#include "dasgd/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace dasgd {
namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
    if (pos > start) out.push_back(line.substr(start, pos - start));
  }
  return out;
}

template <typename T>
T parse_uint(std::string_view token, std::size_t line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw EventLogError(EventLogError::Reason::malformed, line,
                        "expected a non-negative integer, got '" + std::string(token) + "'");
  }
  return value;
}

template <typename Fn>
auto with_line(const LogEvent& e, Fn&& fn) {
  try {
    return fn();
  } catch (const ProtocolError& err) {
    throw EventLogError(EventLogError::Reason::protocol, e.line, err.what());
  }
}

}  // namespace

std::vector<LogEvent> parse_event_log(std::istream& in) {
  std::vector<LogEvent> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto tok = tokens(raw);
    if (tok.empty() || tok.front().front() == '#') continue;
    LogEvent e;
    e.line = lineno;
    if (tok[0] == "COMPUTE") {
      if (tok.size() != 3) throw EventLogError(EventLogError::Reason::malformed, lineno, "COMPUTE takes 2 fields");
      e.kind = LogEvent::Kind::compute;
      e.node = parse_uint<NodeIndex>(tok[1], lineno);
      e.step = parse_uint<Step>(tok[2], lineno);
    } else if (tok[0] == "APPLY") {
      if (tok.size() != 5) throw EventLogError(EventLogError::Reason::malformed, lineno, "APPLY takes 4 fields");
      e.kind = LogEvent::Kind::apply;
      e.node = parse_uint<NodeIndex>(tok[1], lineno);
      e.step = parse_uint<Step>(tok[2], lineno);
      e.gradient = {parse_uint<NodeIndex>(tok[3], lineno), parse_uint<Step>(tok[4], lineno)};
    } else {
      throw EventLogError(EventLogError::Reason::malformed, lineno,
                          "unknown record '" + std::string(tok[0]) + "'");
    }
    out.push_back(e);
  }
  return out;
}

void write_event_log(std::ostream& out, std::span<const LogEvent> events) {
  for (const auto& e : events) {
    if (e.kind == LogEvent::Kind::compute) {
      out << "COMPUTE " << e.node << ' ' << e.step << '\n';
    } else {
      out << "APPLY " << e.node << ' ' << e.step << ' ' << e.gradient.producer << ' ' << e.gradient.step << '\n';
    }
  }
}

std::size_t node_count(std::span<const LogEvent> events) {
  std::size_t n = 0;
  for (const auto& e : events) {
    n = std::max<std::size_t>(n, e.node + 1);
    if (e.kind == LogEvent::Kind::apply) n = std::max<std::size_t>(n, e.gradient.producer + 1);
  }
  return n;
}

std::vector<StalenessRecord> replay_incremental(std::span<const LogEvent> events) {
  std::vector<StalenessRecord> out;
  if (events.empty()) return out;
  Ledger ledger(node_count(events));
  for (const auto& e : events) {
    with_line(e, [&] {
      if (e.kind == LogEvent::Kind::compute) {
        ledger.record_compute(GradientId{e.node, e.step});
      } else {
        out.push_back(ledger.record_application(e.node, e.step, e.gradient));
      }
      return 0;
    });
  }
  return out;
}

std::vector<StalenessRecord> replay_brute_force(std::span<const LogEvent> events) {
  std::vector<StalenessRecord> out;
  std::vector<GradientSet> sets(node_count(events));
  CausalSnapshot snapshots;
  for (const auto& e : events) {
    with_line(e, [&] {
      GradientSet& current = sets[e.node];
      if (e.kind == LogEvent::Kind::compute) {
        if (current.size() != e.step) throw ProtocolError("COMPUTE step does not match the node's applied count");
        if (!snapshots.emplace(GradientId{e.node, e.step}, current).second) {
          throw ProtocolError("gradient computed twice");
        }
        return 0;
      }
      if (current.size() != e.step) throw ProtocolError("APPLY step does not match the node's applied count");
      const auto snap = snapshots.find(e.gradient);
      if (snap == snapshots.end()) throw ProtocolError("APPLY of a gradient that was never computed");
      if (current.contains(e.gradient)) throw ProtocolError("duplicate APPLY of the same gradient");
      out.push_back(StalenessRecord{e.node, e.step, e.gradient.producer, e.gradient.step,
                                    tight_staleness(current, snap->second).size(),
                                    loose_staleness(snapshots, current, snap->second).size()});
      current.insert(e.gradient);
      return 0;
    });
  }
  return out;
}

OracleReport check_event_log(std::span<const LogEvent> events) {
  OracleReport report;
  report.events = events.size();
  const auto incremental = replay_incremental(events);
  const auto brute = replay_brute_force(events);
  report.applications = brute.size();

  std::vector<std::size_t> lines;
  for (const auto& e : events)
    if (e.kind == LogEvent::Kind::apply) lines.push_back(e.line);

  for (std::size_t k = 0; k < brute.size(); ++k) {
    if (k >= incremental.size() || !(incremental[k] == brute[k])) {
      report.first_mismatch = OracleMismatch{k, lines[k], k < incremental.size() ? incremental[k] : StalenessRecord{},
                                             brute[k]};
      break;
    }
  }
  return report;
}

}  // namespace dasgd
