#include <cmath>

#include <gtest/gtest.h>

#include "dasgd/error.hpp"
#include "dasgd/theory.hpp"

namespace dasgd {
namespace {

BoundInputs deterministic_inputs(double s) {
  BoundInputs in;
  in.lipschitz = 1.0;
  in.sigma = 0.0;
  in.q = 0.0;
  in.s_avg = s;
  in.s_max = s;
  in.shat_avg = s;
  in.shat_max = s;
  in.r0 = 2.0;
  in.eta = 1e-3;
  return in;
}

TEST(Stepsize, TightExamples) {
  EXPECT_DOUBLE_EQ(stepsize_bound_tight(1.0, 2.0), 0.125);
  EXPECT_DOUBLE_EQ(stepsize_bound_tight(1.0, 2.5), 0.1);
  EXPECT_DOUBLE_EQ(stepsize_bound_tight(2.0, 8.5), 1.0 / 68.0);
  EXPECT_NEAR(stepsize_bound_tight(2.0, 8.5), 0.0147, 1e-4);
  EXPECT_DOUBLE_EQ(stepsize_bound_tight(3.0, 0.0), 1.0 / 12.0);
}

TEST(Stepsize, LooseExamples) {
  EXPECT_DOUBLE_EQ(stepsize_bound_loose(1.0, 4.0, 4.0), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(stepsize_bound_loose(1.0, 2.0, 8.0), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(stepsize_bound_loose(2.0, 0.0, 0.0), 1.0 / 8.0);
}

TEST(Stepsize, LooseNeverExceedsTightWhenLooseValuesDominate) {
  for (double s : {0.5, 1.0, 2.5, 7.0})
    for (double ha : {s, s + 0.5, 2 * s})
      for (double hm : {ha, ha + 1.0, 3 * ha}) {
        EXPECT_LE(stepsize_bound_loose(1.5, ha, hm), stepsize_bound_tight(1.5, s)) << s << " " << ha << " " << hm;
      }
}

TEST(Stepsize, LooseEqualsTightAtEqualValues) {
  for (double L : {1.0, 2.0, 9.5})
    for (double s : {0.0, 0.25, 1.0, 4.5, 63.0}) EXPECT_DOUBLE_EQ(stepsize_bound_loose(L, s, s), stepsize_bound_tight(L, s));
}

TEST(Stepsize, RejectsOutOfRangeInputs) {
  EXPECT_THROW(stepsize_bound_tight(0.5, 1.0), PreconditionError);
  EXPECT_THROW(stepsize_bound_tight(1.0, -1.0), PreconditionError);
  EXPECT_THROW(stepsize_bound_tight(1.0, std::nan("")), PreconditionError);
  EXPECT_THROW(stepsize_bound_loose(1.0, 4.0, 2.0), PreconditionError);
}

TEST(RateBound, WithQMatchesHandValue) {
  BoundInputs in;
  in.lipschitz = 2.0;
  in.sigma = 0.5;
  in.r0 = 3.0;
  in.s_avg = 2.0;
  in.s_max = 4.0;
  in.q = 1.5;
  in.eta = 1.0 / 16.0;
  EXPECT_NEAR(rate_bound_with_q(in, 99), 1.5418592102214952, 1e-12);
}

TEST(RateBound, NoQMatchesHandValue) {
  BoundInputs in;
  in.lipschitz = 2.0;
  in.sigma = 0.5;
  in.r0 = 3.0;
  in.shat_avg = 3.0;
  in.shat_max = 5.0;
  in.eta = 0.01;
  EXPECT_NEAR(rate_bound_no_q(in, 99), 1.4586662653026983, 1e-12);
}

TEST(RateBound, DeterministicCaseIsTheSingleTerm) {
  BoundInputs in = deterministic_inputs(3.0);
  for (std::uint64_t t : {0u, 1u, 10u, 12345u}) {
    EXPECT_DOUBLE_EQ(rate_bound_with_q(in, t), 4.0 * 2.0 * 3.0 / static_cast<double>(t + 1));
    EXPECT_DOUBLE_EQ(rate_bound_no_q(in, t), 4.0 * 2.0 * 3.0 / static_cast<double>(t + 1));
  }
}

TEST(RateBound, StrictlyDecreasingAndNonnegative) {
  BoundInputs in;
  in.lipschitz = 1.3;
  in.sigma = 0.7;
  in.q = 2.0;
  in.s_avg = 2.5;
  in.s_max = 4.0;
  in.shat_avg = 3.0;
  in.shat_max = 6.0;
  in.r0 = 1.1;
  in.eta = 1e-3;
  double prev_q = rate_bound_with_q(in, 0);
  double prev_no = rate_bound_no_q(in, 0);
  for (std::uint64_t t = 1; t < 100000; t = t * 3 / 2 + 1) {
    const double q = rate_bound_with_q(in, t);
    const double no = rate_bound_no_q(in, t);
    EXPECT_LT(q, prev_q);
    EXPECT_LT(no, prev_no);
    EXPECT_GE(q, 0.0);
    EXPECT_GE(no, 0.0);
    prev_q = q;
    prev_no = no;
  }
}

TEST(RateBound, PreconditionErrorsNameTheInequality) {
  BoundInputs in = deterministic_inputs(2.5);
  in.eta = 0.2;
  try {
    rate_bound_with_q(in, 10);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("eta <= 1/(4 L S_avg)"), std::string::npos) << e.what();
  }
  try {
    rate_bound_no_q(in, 10);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("sqrt(Shat_avg Shat_max)"), std::string::npos) << e.what();
  }
  in.eta = 0.1;  // exactly at the rule
  EXPECT_NO_THROW(rate_bound_with_q(in, 10));
  in.q.reset();
  EXPECT_THROW(rate_bound_with_q(in, 10), PreconditionError);
  EXPECT_NO_THROW(rate_formula_with_q(in, 10));
  in = deterministic_inputs(2.0);
  in.s_max = 1.0;
  EXPECT_THROW(rate_bound_with_q(in, 10), PreconditionError);
}

TEST(RateBound, MiniBatchShapeAtMaxNAvgHalfN) {
  // Shat_max = n, Shat_avg = n/2: the second term equals 4 L r0 n / (sqrt(2) (T+1)).
  BoundInputs in = deterministic_inputs(0.0);
  in.lipschitz = 1.5;
  in.sigma = 0.8;
  in.r0 = 0.9;
  for (double n : {2.0, 8.0, 32.0}) {
    in.shat_max = n;
    in.shat_avg = n / 2.0;
    for (std::uint64_t t : {10u, 1000u}) {
      const double m = static_cast<double>(t + 1);
      const double expected = 2.0 * std::sqrt(14.0 * 1.5 * 0.64 * 0.9 / (3.0 * m)) + 4.0 * 1.5 * 0.9 * n / (std::sqrt(2.0) * m);
      EXPECT_NEAR(rate_formula_no_q(in, t), expected, 1e-12 * expected);
    }
  }
}

TEST(IterationsToEpsilon, ClosedFormForTheSingleTerm) {
  BoundInputs in = deterministic_inputs(3.0);  // 4 L r0 S = 24
  for (double eps : {0.07, 0.013, 0.5, 3.3}) {
    const auto expected = static_cast<std::uint64_t>(std::ceil(24.0 / eps)) - 1;
    EXPECT_EQ(iterations_to_epsilon(in, eps, RateBound::with_q), expected) << eps;
    EXPECT_EQ(iterations_to_epsilon(in, eps, RateBound::no_q), expected) << eps;
  }
  EXPECT_EQ(iterations_to_epsilon(in, 100.0, RateBound::with_q), 0u);
}

TEST(IterationsToEpsilon, HalvingEpsilonDoublesCount) {
  BoundInputs in = deterministic_inputs(3.0);
  for (double eps : {0.07, 0.011, 0.0031}) {
    const auto a = iterations_to_epsilon(in, eps, RateBound::with_q);
    const auto b = iterations_to_epsilon(in, eps / 2.0, RateBound::with_q);
    EXPECT_NEAR(static_cast<double>(b + 1), 2.0 * static_cast<double>(a + 1), 1.0);
  }
}

TEST(IterationsToEpsilon, NoiseDominatedCountScalesBySixteen) {
  BoundInputs in = deterministic_inputs(1e-3);
  in.sigma = 1.0;
  in.r0 = 1.0;
  for (auto which : {RateBound::with_q, RateBound::no_q}) {
    const double a = static_cast<double>(iterations_to_epsilon(in, 1e-2, which));
    const double b = static_cast<double>(iterations_to_epsilon(in, 2.5e-3, which));
    EXPECT_NEAR(b / a, 16.0, 0.16);
  }
}

TEST(IterationsToEpsilon, MonotoneInEveryInput) {
  BoundInputs base;
  base.lipschitz = 1.2;
  base.sigma = 0.3;
  base.q = 1.0;
  base.s_avg = 2.0;
  base.s_max = 3.0;
  base.shat_avg = 2.5;
  base.shat_max = 4.0;
  base.r0 = 0.8;
  base.eta = 1e-3;
  for (auto which : {RateBound::with_q, RateBound::no_q}) {
    const auto t0 = iterations_to_epsilon(base, 0.05, which);
    EXPECT_GE(t0, iterations_to_epsilon(base, 0.1, which));
    auto bumped = [&](auto mutate) {
      BoundInputs in = base;
      mutate(in);
      return iterations_to_epsilon(in, 0.05, which);
    };
    EXPECT_GE(bumped([](BoundInputs& in) { in.sigma *= 2; }), t0);
    EXPECT_GE(bumped([](BoundInputs& in) { in.q = 3.0; }), t0);
    EXPECT_GE(bumped([](BoundInputs& in) { in.s_avg *= 2; }), t0);
    EXPECT_GE(bumped([](BoundInputs& in) { in.shat_max *= 2; }), t0);
    EXPECT_GE(bumped([](BoundInputs& in) { in.lipschitz *= 2; }), t0);
    EXPECT_GE(bumped([](BoundInputs& in) { in.r0 *= 2; }), t0);
  }
}

TEST(IterationsToEpsilon, RejectsNonPositiveEpsilon) {
  BoundInputs in = deterministic_inputs(1.0);
  EXPECT_THROW(iterations_to_epsilon(in, 0.0, RateBound::with_q), PreconditionError);
  in.q.reset();
  EXPECT_THROW(iterations_to_epsilon(in, 0.1, RateBound::with_q), PreconditionError);
  EXPECT_NO_THROW(iterations_to_epsilon(in, 0.1, RateBound::no_q));
}

TEST(TopologyPrediction, Examples) {
  const auto fc8 = predict_topology_staleness(TopologyKind::fully_connected, 8);
  ASSERT_TRUE(fc8.has_value());
  EXPECT_DOUBLE_EQ(fc8->s_avg, 4.5);
  EXPECT_DOUBLE_EQ(fc8->s_max, 8.0);
  const auto ring3 = predict_topology_staleness(TopologyKind::ring, 3);
  EXPECT_DOUBLE_EQ(ring3->s_avg, 5.0);
  EXPECT_DOUBLE_EQ(ring3->s_max, 9.0);
  const auto one = predict_topology_staleness(TopologyKind::fully_connected, 1);
  EXPECT_DOUBLE_EQ(one->s_avg, 1.0);
  EXPECT_DOUBLE_EQ(one->s_max, 1.0);
  EXPECT_FALSE(predict_topology_staleness(TopologyKind::custom, 5).has_value());
}

}  // namespace
}  // namespace dasgd
