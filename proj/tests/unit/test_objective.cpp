#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "dasgd/error.hpp"
#include "dasgd/objective.hpp"
#include "oracles.hpp"

namespace dasgd {
namespace {

ObjectiveSpec identity_quadratic(std::size_t d, double sigma = 0.0) {
  return ObjectiveSpec::quadratic(Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d), sigma);
}

ObjectiveSpec small_logistic() {
  Eigen::MatrixXd x(8, 2);
  x << 1, 0, 0, 1, -1, 0, 0, -1, 2, 1, 1, 2, -2, -1, -1, -2;
  Eigen::VectorXd y(8);
  y << 1, 0, 1, 0, 1, 1, 0, 0;
  return ObjectiveSpec::logistic(x, y, 0.0);
}

TEST(Objective, QuadraticLossAtOnesIsHalfSquaredNorm) {
  EXPECT_DOUBLE_EQ(loss(identity_quadratic(2), Eigen::Vector2d(1.0, 1.0)), 1.0);
}

TEST(Objective, QuadraticLossVanishesAtOffset) {
  const auto spec = random_quadratic(6, 0.2, 3.0, 1.0, 0.0, 11);
  EXPECT_NEAR(loss(spec, spec.quadratic_data().b), 0.0, 1e-15);
}

TEST(Objective, LogisticLossAtOriginIsLogTwo) {
  EXPECT_NEAR(loss(small_logistic(), Eigen::Vector2d::Zero()), std::log(2.0), 1e-15);
}

TEST(Objective, DeterministicQuadraticGradientIsExact) {
  const auto g = stochastic_gradient(identity_quadratic(2), Eigen::Vector2d(2.0, 0.0), 99);
  EXPECT_EQ(g, Eigen::Vector2d(2.0, 0.0));
}

TEST(Objective, QuadraticNoiseHasRequestedSecondMoment) {
  const auto spec = identity_quadratic(5, 1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  const Eigen::VectorXd exact = full_gradient(spec, x);
  double total = 0.0;
  constexpr int kDraws = 100000;
  for (int s = 0; s < kDraws; ++s) total += (stochastic_gradient(spec, x, s) - exact).squaredNorm();
  EXPECT_NEAR(total / kDraws, 1.0, 0.05);
}

TEST(Objective, LogisticStochasticGradientIsTheSampledRow) {
  const auto spec = small_logistic();
  const Eigen::Vector2d x(0.3, -0.7);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto row = sampled_row(spec, seed);
    EXPECT_LT(row, 8u);
    EXPECT_EQ(stochastic_gradient(spec, x, seed), row_gradient(spec, x, row));
  }
}

TEST(Objective, LogisticVarianceStaysBelowBound) {
  const auto data = synthetic_blobs(64, 4, 2.0, 3);
  const auto spec = ObjectiveSpec::logistic(data.features, data.labels, 0.1);
  const double sigma = variance_bound(spec);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x(4);
    for (auto& v : x) v = 2.0 * normal(rng);
    const Eigen::VectorXd exact = full_gradient(spec, x);
    double second_moment = 0.0;
    for (std::size_t r = 0; r < 64; ++r) second_moment += (row_gradient(spec, x, r) - exact).squaredNorm();
    EXPECT_LE(second_moment / 64.0, sigma * sigma);
  }
}

TEST(Objective, LipschitzOfDiagonalIsLargestEntry) {
  const auto spec = ObjectiveSpec::quadratic(Eigen::Vector2d(1.0, 3.0).asDiagonal(), Eigen::Vector2d::Zero(), 0.0);
  EXPECT_NEAR(lipschitz_constant(spec), 3.0, 1e-8);
}

TEST(Objective, LipschitzIsFlooredAtOne) {
  const auto spec = ObjectiveSpec::quadratic(0.25 * Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), 0.0);
  EXPECT_DOUBLE_EQ(lipschitz_constant(spec), 1.0);
  const auto logistic = ObjectiveSpec::logistic(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(lipschitz_constant(logistic), 1.0);
}

TEST(Objective, PowerIterationMatchesDenseEigensolver) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m(8, 8);
    for (auto& v : m.reshaped()) v = normal(rng);
    const Eigen::MatrixXd psd = m.transpose() * m;
    const double expected = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(psd).eigenvalues().maxCoeff();
    EXPECT_NEAR(largest_eigenvalue(psd), expected, 1e-6 * expected);
  }
  EXPECT_EQ(largest_eigenvalue(Eigen::MatrixXd::Zero(3, 3)), 0.0);
}

TEST(Objective, GradientNormBoundExamples) {
  EXPECT_NEAR(gradient_norm_bound(identity_quadratic(2), 2.0), 2.0, 1e-8);
  const auto diag = ObjectiveSpec::quadratic(Eigen::Vector2d(1.0, 3.0).asDiagonal(), Eigen::Vector2d::Zero(), 0.0);
  EXPECT_NEAR(gradient_norm_bound(diag, 1.0), 3.0, 1e-8);
  EXPECT_THROW(gradient_norm_bound(diag, 0.0), Error);
}

TEST(Objective, GradientNormBoundHoldsInsideTheBall) {
  const auto data = synthetic_blobs(40, 3, 1.0, 8);
  const auto spec = ObjectiveSpec::logistic(data.features, data.labels, 0.05);
  const Eigen::VectorXd xstar = minimizer(spec);
  const double q = gradient_norm_bound(spec, 1.5);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd dir(3);
    for (auto& v : dir) v = normal(rng);
    const Eigen::VectorXd x = xstar + 1.5 * dir.normalized();
    EXPECT_LE(full_gradient(spec, x).norm(), q);
  }
}

TEST(Objective, ShapeAndValueValidation) {
  EXPECT_THROW(ObjectiveSpec::quadratic(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(3), 0.0),
               DimensionError);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(ObjectiveSpec::quadratic(asym, Eigen::Vector2d::Zero(), 0.0), Error);
  EXPECT_THROW(ObjectiveSpec::quadratic(Eigen::Vector2d(1.0, -1.0).asDiagonal(), Eigen::Vector2d::Zero(), 0.0), Error);
  EXPECT_THROW(ObjectiveSpec::quadratic(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero(), -1.0), Error);
  EXPECT_THROW(ObjectiveSpec::logistic(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0.0, 2.0), 0.0), Error);
  EXPECT_THROW(loss(identity_quadratic(2), Eigen::Vector3d::Zero()), DimensionError);
  EXPECT_THROW(loss(identity_quadratic(2), Eigen::Vector2d(NAN, 0.0)), NumericError);
}

TEST(Objective, LogisticMinimizerIsStationary) {
  const auto data = synthetic_blobs(100, 5, 1.5, 4);
  const auto spec = ObjectiveSpec::logistic(data.features, data.labels, 0.01);
  EXPECT_LE(full_gradient(spec, minimizer(spec)).norm(), 1e-10);
  EXPECT_EQ(optimal_value(spec), loss(spec, minimizer(spec)));
}

TEST(Objective, GradientsAgreeWithFiniteDifferences) {
  const auto quad = random_quadratic(7, 0.1, 4.0, 1.0, 0.0, 21);
  const auto data = synthetic_blobs(30, 4, 2.0, 6);
  const auto logi = ObjectiveSpec::logistic(data.features, data.labels, 0.2);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (const ObjectiveSpec* spec : {&quad, &logi}) {
    for (int i = 0; i < 10; ++i) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(spec->dim()));
      for (auto& v : x) v = normal(rng);
      const Eigen::VectorXd g = full_gradient(*spec, x);
      const Eigen::VectorXd fd = testing::finite_difference_gradient([&](const ParamVector& p) { return loss(*spec, p); }, x);
      EXPECT_LE((g - fd).norm(), 1e-5 * std::max(1.0, g.norm()));
    }
  }
}

TEST(Objective, LogisticCsvRoundTripAndLineErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "dasgd_objective_csv";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "ok.csv");
    out << "f0,f1,label\n1.5,-2,1\n0,0.25,0\n";
  }
  const auto data = load_logistic_csv(dir / "ok.csv");
  ASSERT_EQ(data.features.rows(), 2);
  EXPECT_EQ(data.features(0, 1), -2.0);
  EXPECT_EQ(data.labels(1), 0.0);
  {
    std::ofstream out(dir / "bad.csv");
    out << "f0,f1,label\n1,2,1\n1,x,0\n";
  }
  try {
    load_logistic_csv(dir / "bad.csv");
    FAIL() << "malformed csv accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  std::filesystem::remove_all(dir);
}

TEST(Objective, RandomQuadraticHasRequestedSpectrum) {
  const auto spec = random_quadratic(6, 0.5, 2.0, 1.0, 0.0, 3);
  const auto eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(spec.quadratic_data().a).eigenvalues();
  EXPECT_NEAR(eig.minCoeff(), 0.5, 1e-12);
  EXPECT_NEAR(eig.maxCoeff(), 2.0, 1e-12);
  EXPECT_EQ(spec.quadratic_data().a, spec.quadratic_data().a.transpose());
}

}  // namespace
}  // namespace dasgd
