#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dasgd/error.hpp"
#include "dasgd/ledger.hpp"

namespace dasgd {

/// One line of the line-oriented event log:
///   COMPUTE node step
///   APPLY node step producer pstep
/// A node's application of its own gradient is an explicit APPLY line.
struct LogEvent {
  enum class Kind { compute, apply };

  Kind kind = Kind::compute;
  NodeIndex node = 0;
  Step step = 0;
  GradientId gradient;   // apply only
  std::size_t line = 0;  // 1-based source line, 0 when generated in memory

  static LogEvent compute(NodeIndex node, Step step) { return {Kind::compute, node, step, {}, 0}; }
  static LogEvent apply(NodeIndex node, Step step, GradientId g) { return {Kind::apply, node, step, g, 0}; }
};

/// Malformed input or protocol violation found while reading/replaying a log.
class EventLogError : public Error {
 public:
  enum class Reason { malformed, protocol };

  EventLogError(Reason reason, std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), reason_(reason), line_(line) {}

  Reason reason() const noexcept { return reason_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Reason reason_;
  std::size_t line_;
};

/// Blank lines and lines starting with '#' are skipped.
std::vector<LogEvent> parse_event_log(std::istream& in);
void write_event_log(std::ostream& out, std::span<const LogEvent> events);

/// Number of nodes referenced by a log (max index + 1).
std::size_t node_count(std::span<const LogEvent> events);

/// Replays through the incremental Ledger. Protocol violations surface as
/// EventLogError{protocol} carrying the offending line.
std::vector<StalenessRecord> replay_incremental(std::span<const LogEvent> events);

/// Replays with explicit per-node sets and full snapshot copies, computing every
/// value from scratch with tight_staleness / loose_staleness.
std::vector<StalenessRecord> replay_brute_force(std::span<const LogEvent> events);

struct OracleMismatch {
  std::size_t application_index = 0;
  std::size_t line = 0;
  StalenessRecord incremental;
  StalenessRecord brute_force;
};

struct OracleReport {
  std::size_t events = 0;
  std::size_t applications = 0;
  std::optional<OracleMismatch> first_mismatch;

  bool equivalent() const noexcept { return !first_mismatch.has_value(); }
};

/// Diffs replay_incremental against replay_brute_force.
OracleReport check_event_log(std::span<const LogEvent> events);

}  // namespace dasgd
