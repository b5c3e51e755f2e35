#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dasgd/engine.hpp"
#include "dasgd/error.hpp"

namespace dasgd::cli {

/// Bad configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, std::size_t line, const std::string& message)
      : Error(format(field, line, message)), field_(field), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field, std::size_t line, const std::string& message) {
    std::string out = line ? "line " + std::to_string(line) + ": " : std::string{};
    if (!field.empty()) out += field + ": ";
    return out + message;
  }

  std::string field_;
  std::size_t line_;
};

struct LatencySettings {
  LatencyModel::Kind kind = LatencyModel::Kind::constant;
  double value = 0.01;  // constant
  double lo = 0.005;    // uniform
  double hi = 0.015;    // uniform
  double mean = 0.01;   // exponential

  LatencyModel model() const;
  friend bool operator==(const LatencySettings&, const LatencySettings&) = default;
};

struct ObjectiveSettings {
  ObjectiveKind kind = ObjectiveKind::quadratic;
  std::size_t dim = 10;
  std::uint64_t data_seed = 7;
  // quadratic
  double lambda_min = 0.1;
  double lambda_max = 1.0;
  double offset_scale = 1.0;
  double noise_sigma = 0.0;
  // logistic
  std::size_t rows = 200;
  double separation = 2.0;
  double ridge = 0.01;
  std::string csv;  // load rows from here instead of generating blobs

  friend bool operator==(const ObjectiveSettings&, const ObjectiveSettings&) = default;
};

/// Everything needed to reproduce one experiment.
struct ExperimentConfig {
  // run
  RunMode mode = RunMode::dasgd;
  std::uint64_t seed = 1;
  std::size_t replicas = 1;
  std::string output = "dasgd-out";
  std::size_t stride = 1;
  // network
  TopologyKind topology = TopologyKind::fully_connected;
  std::size_t n = 4;
  std::vector<Topology::Edge> edges;
  LatencySettings latency;
  // compute
  ComputeTimeModel compute;
  StartPhase start = StartPhase::random;
  // training
  std::optional<double> eta;  // absent: chosen by a pilot run
  std::size_t samples_per_node = 500;
  double pilot_fraction = 0.1;
  std::optional<bool> check_descent;  // absent: on when gradients are deterministic
  std::optional<std::vector<double>> x0;
  // objective
  ObjectiveSettings objective;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError naming the field and line for unknown keys, wrong
/// types and out-of-range values. Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical YAML with every field spelled out; parse_config inverts it exactly.
std::string serialize_config(const ExperimentConfig& config);

/// Hex SHA-256 of serialize_config(config).
std::string config_digest(const ExperimentConfig& config);

ObjectiveSpec build_objective(const ExperimentConfig& config);
Topology build_topology(const ExperimentConfig& config);

/// Simulator input for one replica (seed offset by `replica`). `eta`
/// overrides the configured stepsize; one of the two must be present.
SimConfig build_sim_config(const ExperimentConfig& config, std::size_t replica,
                           std::optional<double> eta = std::nullopt);

}  // namespace dasgd::cli
