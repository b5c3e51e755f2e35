#include "dasgd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dasgd/error.hpp"
#include "dasgd/seeding.hpp"

namespace dasgd {
namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kPowerIterationTolerance = 1e-9;
constexpr int kPowerIterationLimit = 10'000;
constexpr double kMinimizerGradientTolerance = 1e-10;

void require_dim(const ObjectiveSpec& spec, const ParamVector& x) {
  if (static_cast<std::size_t>(x.size()) != spec.dim()) {
    throw DimensionError("parameter vector has dimension " + std::to_string(x.size()) +
                         ", objective expects " + std::to_string(spec.dim()));
  }
}

double require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string("non-finite ") + what);
  return value;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double max_row_norm(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 0.0 : m.rowwise().norm().maxCoeff();
}

}  // namespace

ObjectiveSpec::ObjectiveSpec(std::variant<QuadraticData, LogisticData> data, double noise_sigma)
    : data_(std::move(data)), noise_sigma_(noise_sigma) {}

ObjectiveSpec ObjectiveSpec::quadratic(Eigen::MatrixXd a, Eigen::VectorXd b, double noise_sigma) {
  if (a.rows() == 0 || a.rows() != a.cols()) throw DimensionError("quadratic A must be square, d >= 1");
  if (b.size() != a.rows()) throw DimensionError("quadratic offset b does not match A");
  if (!a.allFinite() || !b.allFinite()) throw NumericError("quadratic objective has non-finite entries");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("noise_sigma must be finite and >= 0");
  if (((a - a.transpose()).cwiseAbs().array() > kSymmetryTolerance).any()) {
    throw Error("quadratic A is not symmetric within 1e-12");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw Error("quadratic A is not positive semidefinite");
  }
  return ObjectiveSpec(QuadraticData{std::move(a), std::move(b)}, noise_sigma);
}

ObjectiveSpec ObjectiveSpec::logistic(Eigen::MatrixXd features, Eigen::VectorXd labels, double ridge) {
  if (features.rows() < 1 || features.cols() < 1) throw DimensionError("logistic data needs m >= 1 rows and d >= 1 columns");
  if (labels.size() != features.rows()) throw DimensionError("label count does not match row count");
  if (!features.allFinite()) throw NumericError("logistic features contain non-finite values");
  for (Eigen::Index r = 0; r < labels.size(); ++r) {
    if (labels[r] != 0.0 && labels[r] != 1.0) throw Error("logistic labels must be 0 or 1");
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw Error("ridge must be finite and >= 0");
  return ObjectiveSpec(LogisticData{std::move(features), std::move(labels), ridge}, 0.0);
}

ObjectiveKind ObjectiveSpec::kind() const noexcept {
  return std::holds_alternative<QuadraticData>(data_) ? ObjectiveKind::quadratic : ObjectiveKind::logistic;
}

std::size_t ObjectiveSpec::dim() const noexcept {
  return std::visit([](const auto& d) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(d)>, QuadraticData>) {
      return static_cast<std::size_t>(d.b.size());
    } else {
      return static_cast<std::size_t>(d.features.cols());
    }
  }, data_);
}

bool ObjectiveSpec::deterministic() const noexcept {
  if (kind() == ObjectiveKind::quadratic) return noise_sigma_ == 0.0;
  return logistic_data().features.rows() == 1;
}

const QuadraticData& ObjectiveSpec::quadratic_data() const {
  if (const auto* q = std::get_if<QuadraticData>(&data_)) return *q;
  throw Error("objective is not quadratic");
}

const LogisticData& ObjectiveSpec::logistic_data() const {
  if (const auto* l = std::get_if<LogisticData>(&data_)) return *l;
  throw Error("objective is not logistic");
}

double loss(const ObjectiveSpec& spec, const ParamVector& x) {
  require_dim(spec, x);
  if (spec.kind() == ObjectiveKind::quadratic) {
    const auto& q = spec.quadratic_data();
    const Eigen::VectorXd r = x - q.b;
    return require_finite(0.5 * r.dot(q.a * r), "loss");
  }
  const auto& l = spec.logistic_data();
  const Eigen::VectorXd z = l.features * x;
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.size(); ++r) total += softplus(z[r]) - l.labels[r] * z[r];
  const double value = total / static_cast<double>(z.size()) + 0.5 * l.ridge * x.squaredNorm();
  return require_finite(value, "loss");
}

ParamVector full_gradient(const ObjectiveSpec& spec, const ParamVector& x) {
  require_dim(spec, x);
  if (spec.kind() == ObjectiveKind::quadratic) {
    const auto& q = spec.quadratic_data();
    return q.a * (x - q.b);
  }
  const auto& l = spec.logistic_data();
  const Eigen::VectorXd z = l.features * x;
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index r = 0; r < z.size(); ++r) residual[r] = sigmoid(z[r]) - l.labels[r];
  return l.features.transpose() * residual / static_cast<double>(z.size()) + l.ridge * x;
}

std::size_t sampled_row(const ObjectiveSpec& spec, std::uint64_t seed) {
  const auto& l = spec.logistic_data();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(l.features.rows()) - 1);
  return pick(rng);
}

double row_loss(const ObjectiveSpec& spec, const ParamVector& x, std::size_t row) {
  require_dim(spec, x);
  const auto& l = spec.logistic_data();
  const double z = l.features.row(static_cast<Eigen::Index>(row)).dot(x);
  return require_finite(softplus(z) - l.labels[static_cast<Eigen::Index>(row)] * z +
                            0.5 * l.ridge * x.squaredNorm(),
                        "row loss");
}

ParamVector row_gradient(const ObjectiveSpec& spec, const ParamVector& x, std::size_t row) {
  require_dim(spec, x);
  const auto& l = spec.logistic_data();
  const auto r = static_cast<Eigen::Index>(row);
  const double z = l.features.row(r).dot(x);
  return (sigmoid(z) - l.labels[r]) * l.features.row(r).transpose() + l.ridge * x;
}

ParamVector stochastic_gradient(const ObjectiveSpec& spec, const ParamVector& x, std::uint64_t seed) {
  require_dim(spec, x);
  if (spec.kind() == ObjectiveKind::logistic) return row_gradient(spec, x, sampled_row(spec, seed));

  ParamVector g = full_gradient(spec, x);
  if (spec.noise_sigma() > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma() / std::sqrt(static_cast<double>(g.size())));
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] += noise(rng);
  }
  return g;
}

double largest_eigenvalue(const Eigen::MatrixXd& symmetric) {
  if (symmetric.rows() == 0 || symmetric.rows() != symmetric.cols()) {
    throw DimensionError("power iteration needs a non-empty square matrix");
  }
  // Fixed start vector; a random direction has no component along the top
  // eigenvector with probability zero.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(symmetric.rows());
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = normal(rng);
  v.normalize();

  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < kPowerIterationLimit; ++it) {
    const Eigen::VectorXd w = symmetric * v;
    const double rayleigh = v.dot(w);
    const double norm = w.norm();
    if (!std::isfinite(norm)) throw NumericError("power iteration produced non-finite values");
    if (norm == 0.0) return 0.0;
    if (std::abs(rayleigh - previous) <= kPowerIterationTolerance * std::abs(rayleigh)) return rayleigh;
    previous = rayleigh;
    v = w / norm;
  }
  throw ConvergenceError("power iteration did not converge in 10^4 steps");
}

double lipschitz_constant(const ObjectiveSpec& spec) {
  double l = 0.0;
  if (spec.kind() == ObjectiveKind::quadratic) {
    l = largest_eigenvalue(spec.quadratic_data().a);
  } else {
    const auto& d = spec.logistic_data();
    const Eigen::MatrixXd gram = d.features.transpose() * d.features;
    l = largest_eigenvalue(gram) / (4.0 * static_cast<double>(d.features.rows())) + d.ridge;
  }
  return std::max(1.0, l);
}

double gradient_norm_bound(const ObjectiveSpec& spec, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error("gradient_norm_bound needs a finite radius > 0");
  if (spec.kind() == ObjectiveKind::quadratic) {
    return largest_eigenvalue(spec.quadratic_data().a) * radius;
  }
  const auto& d = spec.logistic_data();
  return max_row_norm(d.features) + d.ridge * (minimizer(spec).norm() + radius);
}

double variance_bound(const ObjectiveSpec& spec) {
  if (spec.kind() == ObjectiveKind::quadratic) return spec.noise_sigma();
  return max_row_norm(spec.logistic_data().features);
}

SmoothnessConstants smoothness_constants(const ObjectiveSpec& spec, std::optional<double> radius) {
  SmoothnessConstants c;
  c.lipschitz = lipschitz_constant(spec);
  c.sigma = variance_bound(spec);
  if (radius) c.gradient_bound = gradient_norm_bound(spec, *radius);
  return c;
}

ParamVector minimizer(const ObjectiveSpec& spec) {
  if (spec.kind() == ObjectiveKind::quadratic) return spec.quadratic_data().b;

  const auto& d = spec.logistic_data();
  const auto m = static_cast<double>(d.features.rows());
  const auto dim = static_cast<Eigen::Index>(spec.dim());
  ParamVector x = ParamVector::Zero(dim);
  for (int it = 0; it < 200; ++it) {
    const ParamVector g = full_gradient(spec, x);
    const double gnorm = g.norm();
    if (gnorm <= kMinimizerGradientTolerance) return x;

    const Eigen::VectorXd z = d.features * x;
    Eigen::VectorXd weights(z.size());
    for (Eigen::Index r = 0; r < z.size(); ++r) {
      const double p = sigmoid(z[r]);
      weights[r] = p * (1.0 - p);
    }
    Eigen::MatrixXd hessian = d.features.transpose() * weights.asDiagonal() * d.features / m;
    hessian.diagonal().array() += d.ridge;
    const ParamVector direction = hessian.ldlt().solve(g);
    if (!direction.allFinite()) break;

    const double f0 = loss(spec, x);
    double step = 1.0;
    ParamVector next = x - direction;
    while (step > 1e-12) {
      next = x - step * direction;
      const double f1 = loss(spec, next);
      if (f1 <= f0 - 1e-4 * step * g.dot(direction) || full_gradient(spec, next).norm() < gnorm) break;
      step *= 0.5;
    }
    x = next;
  }
  throw ConvergenceError("logistic minimizer did not reach ||grad f|| <= 1e-10 "
                         "(data may be separable with ridge = 0)");
}

double optimal_value(const ObjectiveSpec& spec) {
  if (spec.kind() == ObjectiveKind::quadratic) return 0.0;
  return loss(spec, minimizer(spec));
}

LogisticDataset synthetic_blobs(std::size_t rows, std::size_t dim, double separation, std::uint64_t seed) {
  if (rows < 1 || dim < 1) throw DimensionError("synthetic dataset needs rows >= 1 and dim >= 1");
  auto rng = make_stream(seed, Stream::data);
  std::normal_distribution<double> normal;
  Eigen::VectorXd direction(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < direction.size(); ++k) direction[k] = normal(rng);
  direction.normalize();

  LogisticDataset out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim)),
                      Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
  for (Eigen::Index r = 0; r < out.features.rows(); ++r) {
    const double label = static_cast<double>(r % 2);
    const double side = label == 1.0 ? 0.5 : -0.5;
    for (Eigen::Index k = 0; k < out.features.cols(); ++k) {
      out.features(r, k) = side * separation * direction[k] + normal(rng);
    }
    out.labels[r] = label;
  }
  return out;
}

LogisticDataset load_logistic_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };
  auto fail = [&](std::size_t line, const std::string& msg) -> Error {
    return Error(path.string() + ":" + std::to_string(line) + ": " + msg);
  };

  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header row");
  const auto header = split(line);
  if (header.size() < 2 || header.back() != "label") throw fail(1, "header must be f0,...,f{d-1},label");
  const std::size_t dim = header.size() - 1;
  for (std::size_t k = 0; k < dim; ++k) {
    if (header[k] != "f" + std::to_string(k)) throw fail(1, "expected column f" + std::to_string(k));
  }

  std::vector<double> values;
  std::vector<double> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != dim + 1) throw fail(lineno, "expected " + std::to_string(dim + 1) + " columns");
    for (std::size_t k = 0; k <= dim; ++k) {
      char* end = nullptr;
      const double v = std::strtod(cells[k].c_str(), &end);
      if (cells[k].empty() || end != cells[k].c_str() + cells[k].size() || !std::isfinite(v)) {
        throw fail(lineno, "not a finite number: '" + cells[k] + "'");
      }
      if (k < dim) {
        values.push_back(v);
      } else {
        if (v != 0.0 && v != 1.0) throw fail(lineno, "label must be 0 or 1");
        labels.push_back(v);
      }
    }
  }
  if (labels.empty()) throw fail(lineno, "dataset has no rows");

  LogisticDataset out;
  out.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));
  out.labels = Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return out;
}

ObjectiveSpec random_quadratic(std::size_t dim, double lambda_min, double lambda_max,
                               double offset_scale, double noise_sigma, std::uint64_t seed) {
  if (dim < 1) throw DimensionError("quadratic needs dim >= 1");
  if (!(lambda_min >= 0.0) || !(lambda_max >= lambda_min)) {
    throw Error("quadratic eigenvalues need 0 <= lambda_min <= lambda_max");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  auto rng = make_stream(seed, Stream::data);
  std::normal_distribution<double> normal;

  Eigen::MatrixXd gaussian(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) gaussian(r, c) = normal(rng);
  const Eigen::MatrixXd rotation = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ();

  Eigen::VectorXd eigenvalues(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    eigenvalues[k] = d == 1 ? lambda_max
                            : lambda_min + (lambda_max - lambda_min) * static_cast<double>(k) /
                                               static_cast<double>(d - 1);
  }
  Eigen::MatrixXd a = rotation * eigenvalues.asDiagonal() * rotation.transpose();
  a = (0.5 * (a + a.transpose())).eval();

  Eigen::VectorXd b(d);
  for (Eigen::Index k = 0; k < d; ++k) b[k] = offset_scale * normal(rng);
  return ObjectiveSpec::quadratic(std::move(a), std::move(b), noise_sigma);
}

}  // namespace dasgd
