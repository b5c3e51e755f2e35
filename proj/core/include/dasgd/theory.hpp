#pragma once

#include <cstdint>
#include <optional>

#include "dasgd/netsim.hpp"

namespace dasgd {

/// Constants of the convergence theorem for one run.
struct BoundInputs {
  double lipschitz = 1.0;       // L >= 1
  double sigma = 0.0;           // variance bound
  std::optional<double> q;      // gradient norm bound, needed by the tight-staleness rate
  double s_avg = 0.0;
  double s_max = 0.0;
  double shat_avg = 0.0;
  double shat_max = 0.0;
  double r0 = 0.0;              // f(x0) - f*
  double eta = 0.0;
};

/// 1/(4 L S_avg); 1/(4L) when S_avg = 0 (sequential case).
/// Throws PreconditionError for L < 1 or a negative / non-finite S_avg.
double stepsize_bound_tight(double lipschitz, double s_avg);

/// 1/(4 L sqrt(Shat_avg Shat_max)); 1/(4L) when the product is 0.
/// Throws PreconditionError for L < 1, negative values, or Shat_max < Shat_avg.
double stepsize_bound_loose(double lipschitz, double shat_avg, double shat_max);

/// Bound on Psi_T when gradient norms are bounded by Q:
///   2 (3 L sigma^2 r0 / (T+1))^(1/2) + 2 (L^2 S_avg^2 Q^2)^(1/3) (r0/(T+1))^(2/3) + 4 L r0 S_avg / (T+1)
/// Throws PreconditionError when Q is absent, an input is out of range, or
/// eta > stepsize_bound_tight (relative tolerance 1e-12); the message names
/// the violated inequality.
double rate_bound_with_q(const BoundInputs& in, std::uint64_t t);

/// Bound on Psi_T without a gradient norm bound:
///   2 (14 L sigma^2 r0 / (3 (T+1)))^(1/2) + 4 L r0 sqrt(Shat_avg Shat_max) / (T+1)
/// Throws PreconditionError when eta > stepsize_bound_loose or an input is out of range.
double rate_bound_no_q(const BoundInputs& in, std::uint64_t t);

/// The two expressions above without any precondition check.
double rate_formula_with_q(const BoundInputs& in, std::uint64_t t);
double rate_formula_no_q(const BoundInputs& in, std::uint64_t t);

enum class RateBound { with_q, no_q };

/// Smallest T with bound(T) <= epsilon, by doubling then bisection over the
/// formula (the eta precondition is not checked). Throws PreconditionError for
/// epsilon <= 0 and for with_q without Q.
std::uint64_t iterations_to_epsilon(const BoundInputs& in, double epsilon, RateBound which);

struct StalenessPrediction {
  double s_avg = 0.0;
  double s_max = 0.0;
};

/// Staleness expected under equal compute times and small latency:
/// fully connected ((n+1)/2, n), ring ((n^2+1)/2, n^2). No prediction for
/// custom graphs.
std::optional<StalenessPrediction> predict_topology_staleness(TopologyKind kind, std::size_t n);

}  // namespace dasgd
