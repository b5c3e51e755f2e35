#include "dasgd/theory.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "dasgd/error.hpp"

namespace dasgd {
namespace {

constexpr double kRelTol = 1e-12;

void require(bool ok, const std::string& inequality) {
  if (!ok) throw PreconditionError("precondition violated: " + inequality);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

void check_common(const BoundInputs& in) {
  require(std::isfinite(in.lipschitz) && in.lipschitz >= 1.0, "L >= 1");
  require(finite_nonneg(in.sigma), "sigma >= 0");
  require(finite_nonneg(in.r0), "r0 >= 0");
  require(std::isfinite(in.eta) && in.eta > 0.0, "eta > 0");
}

std::string describe(const char* inequality, double eta, double bound) {
  std::ostringstream out;
  out.precision(12);
  out << inequality << " (eta = " << eta << ", bound = " << bound << ")";
  return out.str();
}

double tplus1(std::uint64_t t) { return static_cast<double>(t) + 1.0; }

}  // namespace

double stepsize_bound_tight(double lipschitz, double s_avg) {
  require(std::isfinite(lipschitz) && lipschitz >= 1.0, "L >= 1");
  require(finite_nonneg(s_avg), "S_avg >= 0");
  if (s_avg == 0.0) return 1.0 / (4.0 * lipschitz);
  return 1.0 / (4.0 * lipschitz * s_avg);
}

double stepsize_bound_loose(double lipschitz, double shat_avg, double shat_max) {
  require(std::isfinite(lipschitz) && lipschitz >= 1.0, "L >= 1");
  require(finite_nonneg(shat_avg), "Shat_avg >= 0");
  require(finite_nonneg(shat_max) && shat_max >= shat_avg, "Shat_max >= Shat_avg");
  const double product = shat_avg * shat_max;
  if (product == 0.0) return 1.0 / (4.0 * lipschitz);
  return 1.0 / (4.0 * lipschitz * std::sqrt(product));
}

double rate_formula_with_q(const BoundInputs& in, std::uint64_t t) {
  const double L = in.lipschitz;
  const double q = in.q.value_or(0.0);
  const double n = tplus1(t);
  return 2.0 * std::sqrt(3.0 * L * in.sigma * in.sigma * in.r0 / n) +
         2.0 * std::cbrt(L * L * in.s_avg * in.s_avg * q * q) * std::pow(in.r0 / n, 2.0 / 3.0) +
         4.0 * L * in.r0 * in.s_avg / n;
}

double rate_formula_no_q(const BoundInputs& in, std::uint64_t t) {
  const double L = in.lipschitz;
  const double n = tplus1(t);
  return 2.0 * std::sqrt(14.0 * L * in.sigma * in.sigma * in.r0 / (3.0 * n)) +
         4.0 * L * in.r0 * std::sqrt(in.shat_avg * in.shat_max) / n;
}

double rate_bound_with_q(const BoundInputs& in, std::uint64_t t) {
  check_common(in);
  require(in.q.has_value(), "Q must be provided for the bounded-gradient rate");
  require(finite_nonneg(*in.q), "Q >= 0");
  require(finite_nonneg(in.s_avg), "S_avg >= 0");
  require(std::isfinite(in.s_max) && in.s_max >= in.s_avg, "S_max >= S_avg");
  const double bound = stepsize_bound_tight(in.lipschitz, in.s_avg);
  require(in.eta <= bound * (1.0 + kRelTol), describe("eta <= 1/(4 L S_avg)", in.eta, bound));
  return rate_formula_with_q(in, t);
}

double rate_bound_no_q(const BoundInputs& in, std::uint64_t t) {
  check_common(in);
  const double bound = stepsize_bound_loose(in.lipschitz, in.shat_avg, in.shat_max);
  require(in.eta <= bound * (1.0 + kRelTol), describe("eta <= 1/(4 L sqrt(Shat_avg Shat_max))", in.eta, bound));
  return rate_formula_no_q(in, t);
}

std::uint64_t iterations_to_epsilon(const BoundInputs& in, double epsilon, RateBound which) {
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon > 0");
  if (which == RateBound::with_q) require(in.q.has_value(), "Q must be provided for the bounded-gradient rate");
  const auto bound = [&](std::uint64_t t) {
    return which == RateBound::with_q ? rate_formula_with_q(in, t) : rate_formula_no_q(in, t);
  };
  if (bound(0) <= epsilon) return 0;

  std::uint64_t lo = 0;  // bound(lo) > epsilon
  std::uint64_t hi = 1;
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 62;
  while (bound(hi) > epsilon) {
    if (hi >= kLimit) throw PreconditionError("epsilon is unreachable within 2^62 iterations");
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (bound(mid) <= epsilon ? hi : lo) = mid;
  }
  return hi;
}

std::optional<StalenessPrediction> predict_topology_staleness(TopologyKind kind, std::size_t n) {
  const double m = static_cast<double>(n);
  switch (kind) {
    case TopologyKind::fully_connected: return StalenessPrediction{(m + 1.0) / 2.0, m};
    case TopologyKind::ring: return StalenessPrediction{(m * m + 1.0) / 2.0, m * m};
    case TopologyKind::custom: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace dasgd
