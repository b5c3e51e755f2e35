#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>

#include <Eigen/Dense>

namespace dasgd {

/// Model weights x. Dimension is fixed for the lifetime of a run.
using ParamVector = Eigen::VectorXd;

enum class ObjectiveKind { quadratic, logistic };

/// f(x) = 1/2 (x - b)^T A (x - b), A symmetric positive semidefinite.
struct QuadraticData {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

/// Mean cross-entropy over the rows of `features` plus (ridge/2)||x||^2.
struct LogisticData {
  Eigen::MatrixXd features;  // m x d
  Eigen::VectorXd labels;    // m entries in {0, 1}
  double ridge = 0.0;
};

/// A stochastic objective shared by every node. Homogeneity across nodes
/// holds by construction: all nodes evaluate the same objective and draw samples
/// from the same distribution.
class ObjectiveSpec {
 public:
  /// Throws DimensionError on shape mismatch, Error when A is not symmetric
  /// (1e-12 entrywise) or not positive semidefinite, or noise_sigma < 0.
  static ObjectiveSpec quadratic(Eigen::MatrixXd a, Eigen::VectorXd b, double noise_sigma);
  static ObjectiveSpec logistic(Eigen::MatrixXd features, Eigen::VectorXd labels, double ridge);

  ObjectiveKind kind() const noexcept;
  std::size_t dim() const noexcept;
  /// Standard deviation of the additive gradient noise (quadratic only; 0 for logistic).
  double noise_sigma() const noexcept { return noise_sigma_; }
  /// True when stochastic_gradient returns the exact full gradient for every seed.
  bool deterministic() const noexcept;

  const QuadraticData& quadratic_data() const;
  const LogisticData& logistic_data() const;

 private:
  ObjectiveSpec(std::variant<QuadraticData, LogisticData> data, double noise_sigma);

  std::variant<QuadraticData, LogisticData> data_;
  double noise_sigma_ = 0.0;
};

struct SmoothnessConstants {
  double lipschitz = 1.0;           // L >= 1
  double sigma = 0.0;               // variance bound of the stochastic gradient
  std::optional<double> gradient_bound;  // Q, absent when not requested
};

double loss(const ObjectiveSpec& spec, const ParamVector& x);
ParamVector full_gradient(const ObjectiveSpec& spec, const ParamVector& x);

/// One draw of nabla F(x, xi) with xi determined by `seed`.
/// quadratic: A(x - b) + z, z ~ N(0, (sigma^2/d) I) so E||z||^2 = sigma^2.
/// logistic: gradient of one uniformly drawn row plus the ridge term.
ParamVector stochastic_gradient(const ObjectiveSpec& spec, const ParamVector& x,
                                std::uint64_t seed);

/// Row picked by stochastic_gradient for `seed` (logistic only).
std::size_t sampled_row(const ObjectiveSpec& spec, std::uint64_t seed);
/// Loss of a single logistic row including the ridge term.
double row_loss(const ObjectiveSpec& spec, const ParamVector& x, std::size_t row);
ParamVector row_gradient(const ObjectiveSpec& spec, const ParamVector& x, std::size_t row);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration with a
/// Rayleigh-quotient stopping rule (relative change <= 1e-9).
/// Throws ConvergenceError after 10^4 iterations.
double largest_eigenvalue(const Eigen::MatrixXd& symmetric);

/// L of the exact gradient, floored at 1.
double lipschitz_constant(const ObjectiveSpec& spec);

/// Q with ||grad f(x)|| <= Q whenever ||x - x*|| <= radius.
double gradient_norm_bound(const ObjectiveSpec& spec, double radius);

/// sigma such that E||grad F(x, xi) - grad f(x)||^2 <= sigma^2 for every x.
double variance_bound(const ObjectiveSpec& spec);

SmoothnessConstants smoothness_constants(const ObjectiveSpec& spec,
                                         std::optional<double> radius = std::nullopt);

/// A global minimizer. Quadratic: b. Logistic: damped Newton on the full batch
/// until ||grad f|| <= 1e-10 (ConvergenceError otherwise).
ParamVector minimizer(const ObjectiveSpec& spec);
/// f* = f(minimizer).
double optimal_value(const ObjectiveSpec& spec);

struct LogisticDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
};

/// Two isotropic Gaussian blobs centred at +/- (separation/2) * u for a
/// seeded random unit direction u; labels alternate 0/1.
LogisticDataset synthetic_blobs(std::size_t rows, std::size_t dim, double separation,
                                std::uint64_t seed);

/// Reads `f0,...,f{d-1},label` CSV with a header row. Throws Error with the
/// offending line number on malformed input.
LogisticDataset load_logistic_csv(const std::filesystem::path& path);

/// A = R diag(lambda) R^T with a seeded random rotation R and eigenvalues
/// evenly spaced in [lambda_min, lambda_max]; b ~ N(0, offset_scale^2 I).
ObjectiveSpec random_quadratic(std::size_t dim, double lambda_min, double lambda_max,
                               double offset_scale, double noise_sigma, std::uint64_t seed);

}  // namespace dasgd
