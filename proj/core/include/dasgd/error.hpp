#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dasgd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Violation of the gradient exchange protocol (duplicate application,
/// unknown gradient, step counters out of sync, missing snapshot).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A stepsize rule or rate bound was evaluated outside its preconditions.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A node's parameters became non-finite during a run.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double eta, std::uint32_t node,
                  std::uint64_t step, double measured_s_avg)
      : Error(what), eta_(eta), node_(node), step_(step), measured_s_avg_(measured_s_avg) {}

  double eta() const noexcept { return eta_; }
  std::uint32_t node() const noexcept { return node_; }
  std::uint64_t step() const noexcept { return step_; }
  /// S_avg of the events recorded before the abort (0 when none).
  double measured_s_avg() const noexcept { return measured_s_avg_; }

 private:
  double eta_;
  std::uint32_t node_;
  std::uint64_t step_;
  double measured_s_avg_;
};

}  // namespace dasgd
