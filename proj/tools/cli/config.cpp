#include "dasgd_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

namespace dasgd::cli {
namespace {

std::size_t line_of(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0;
}

[[noreturn]] void fail(const std::string& field, const YAML::Node& node, const std::string& message) {
  throw ConfigError(field, line_of(node), message);
}

std::string scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(field, node, "expected a scalar value");
  return node.Scalar();
}

double as_double(const YAML::Node& node, const std::string& field) {
  const std::string text = scalar(node, field);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(field, node, "expected a finite number, got '" + text + "'");
}

std::uint64_t as_uint(const YAML::Node& node, const std::string& field) {
  const std::string text = scalar(node, field);
  if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos) {
    try {
      return std::stoull(text);
    } catch (const std::exception&) {
    }
  }
  fail(field, node, "expected a non-negative integer, got '" + text + "'");
}

bool as_bool(const YAML::Node& node, const std::string& field) {
  const std::string text = scalar(node, field);
  if (text == "true") return true;
  if (text == "false") return false;
  fail(field, node, "expected true or false, got '" + text + "'");
}

double positive(const YAML::Node& node, const std::string& field) {
  const double v = as_double(node, field);
  if (v <= 0.0) fail(field, node, "must be > 0");
  return v;
}

double non_negative(const YAML::Node& node, const std::string& field) {
  const double v = as_double(node, field);
  if (v < 0.0) fail(field, node, "must be >= 0");
  return v;
}

std::size_t at_least_one(const YAML::Node& node, const std::string& field) {
  const auto v = as_uint(node, field);
  if (v < 1) fail(field, node, "must be >= 1");
  return static_cast<std::size_t>(v);
}

std::vector<double> as_double_list(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail(field, node, "expected a list of numbers");
  std::vector<double> out;
  for (const auto& item : node) out.push_back(as_double(item, field));
  return out;
}

template <typename Parse>
auto enum_value(const YAML::Node& node, const std::string& field, Parse parse) {
  const std::string text = scalar(node, field);
  try {
    return parse(text);
  } catch (const Error& e) {
    fail(field, node, e.what());
  }
}

LatencyModel::Kind parse_latency_kind(const std::string& s) {
  if (s == "constant") return LatencyModel::Kind::constant;
  if (s == "uniform") return LatencyModel::Kind::uniform;
  if (s == "exponential") return LatencyModel::Kind::exponential;
  throw Error("unknown latency '" + s + "' (expected constant, uniform or exponential)");
}

ComputeTimeModel::Kind parse_compute_kind(const std::string& s) {
  if (s == "constant") return ComputeTimeModel::Kind::constant;
  if (s == "uniform") return ComputeTimeModel::Kind::uniform;
  if (s == "exponential") return ComputeTimeModel::Kind::exponential;
  throw Error("unknown compute time '" + s + "' (expected constant, uniform or exponential)");
}

ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "quadratic") return ObjectiveKind::quadratic;
  if (s == "logistic") return ObjectiveKind::logistic;
  throw Error("unknown objective '" + s + "' (expected quadratic or logistic)");
}

std::string name(LatencyModel::Kind k) {
  switch (k) {
    case LatencyModel::Kind::constant: return "constant";
    case LatencyModel::Kind::uniform: return "uniform";
    case LatencyModel::Kind::exponential: return "exponential";
  }
  return "";
}

std::string name(ComputeTimeModel::Kind k) {
  switch (k) {
    case ComputeTimeModel::Kind::constant: return "constant";
    case ComputeTimeModel::Kind::uniform: return "uniform";
    case ComputeTimeModel::Kind::exponential: return "exponential";
  }
  return "";
}

std::string name(ObjectiveKind k) { return k == ObjectiveKind::quadratic ? "quadratic" : "logistic"; }

using FieldHandler = std::function<void(const YAML::Node&, const std::string&)>;

void parse_section(const YAML::Node& root, const std::string& section,
                   const std::map<std::string, FieldHandler>& handlers) {
  const YAML::Node node = root[section];
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) fail(section, node, "expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string field = section + "." + key;
    const auto it = handlers.find(key);
    if (it == handlers.end()) fail(field, kv.first, "unknown key");
    it->second(kv.second, field);
  }
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

LatencyModel LatencySettings::model() const {
  switch (kind) {
    case LatencyModel::Kind::constant: return LatencyModel::constant(value);
    case LatencyModel::Kind::uniform: return LatencyModel::uniform(lo, hi);
    case LatencyModel::Kind::exponential: return LatencyModel::exponential(mean);
  }
  return LatencyModel::constant(value);
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", static_cast<std::size_t>(e.mark.line) + 1, e.msg);
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) fail("", root, "top level must be a mapping of sections");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (key != "run" && key != "network" && key != "compute" && key != "training" && key != "objective") {
      fail(key, kv.first, "unknown section (expected run, network, compute, training, objective)");
    }
  }

  YAML::Node edges_node;
  YAML::Node scales_node;
  YAML::Node x0_node;

  parse_section(root, "run", {
      {"mode", [&](auto& v, auto& f) { c.mode = enum_value(v, f, parse_run_mode); }},
      {"seed", [&](auto& v, auto& f) { c.seed = as_uint(v, f); }},
      {"replicas", [&](auto& v, auto& f) { c.replicas = at_least_one(v, f); }},
      {"output", [&](auto& v, auto& f) { c.output = scalar(v, f); }},
      {"stride", [&](auto& v, auto& f) { c.stride = at_least_one(v, f); }},
  });
  parse_section(root, "network", {
      {"topology", [&](auto& v, auto& f) { c.topology = enum_value(v, f, parse_topology_kind); }},
      {"n", [&](auto& v, auto& f) { c.n = at_least_one(v, f); }},
      {"edges", [&](auto& v, auto& f) {
         if (!v.IsSequence()) fail(f, v, "expected a list of [u, v] pairs");
         c.edges.clear();
         for (const auto& e : v) {
           if (!e.IsSequence() || e.size() != 2) fail(f, e, "each edge must be a [u, v] pair");
           c.edges.emplace_back(static_cast<NodeIndex>(as_uint(e[0], f)), static_cast<NodeIndex>(as_uint(e[1], f)));
         }
         edges_node = v;
       }},
      {"latency", [&](auto& v, auto& f) { c.latency.kind = enum_value(v, f, parse_latency_kind); }},
      {"latency_value", [&](auto& v, auto& f) { c.latency.value = positive(v, f); }},
      {"latency_lo", [&](auto& v, auto& f) { c.latency.lo = positive(v, f); }},
      {"latency_hi", [&](auto& v, auto& f) { c.latency.hi = positive(v, f); }},
      {"latency_mean", [&](auto& v, auto& f) { c.latency.mean = positive(v, f); }},
  });
  parse_section(root, "compute", {
      {"kind", [&](auto& v, auto& f) { c.compute.kind = enum_value(v, f, parse_compute_kind); }},
      {"mean", [&](auto& v, auto& f) { c.compute.mean = positive(v, f); }},
      {"lo", [&](auto& v, auto& f) { c.compute.lo = positive(v, f); }},
      {"hi", [&](auto& v, auto& f) { c.compute.hi = positive(v, f); }},
      {"node_scales", [&](auto& v, auto& f) {
         c.compute.node_scales = as_double_list(v, f);
         for (const double s : c.compute.node_scales)
           if (s <= 0.0) fail(f, v, "entries must be > 0");
         scales_node = v;
       }},
      {"start", [&](auto& v, auto& f) { c.start = enum_value(v, f, parse_start_phase); }},
  });
  parse_section(root, "training", {
      {"eta", [&](auto& v, auto& f) {
         if (v.IsScalar() && v.Scalar() == "auto") {
           c.eta.reset();
         } else {
           c.eta = positive(v, f);
         }
       }},
      {"samples_per_node", [&](auto& v, auto& f) { c.samples_per_node = at_least_one(v, f); }},
      {"pilot_fraction", [&](auto& v, auto& f) {
         c.pilot_fraction = positive(v, f);
         if (c.pilot_fraction > 1.0) fail(f, v, "must be in (0, 1]");
       }},
      {"check_descent", [&](auto& v, auto& f) {
         if (v.IsScalar() && v.Scalar() == "auto") {
           c.check_descent.reset();
         } else {
           c.check_descent = as_bool(v, f);
         }
       }},
      {"x0", [&](auto& v, auto& f) {
         if (v.IsScalar() && v.Scalar() == "zero") {
           c.x0.reset();
         } else {
           c.x0 = as_double_list(v, f);
           x0_node = v;
         }
       }},
  });
  parse_section(root, "objective", {
      {"kind", [&](auto& v, auto& f) { c.objective.kind = enum_value(v, f, parse_objective_kind); }},
      {"dim", [&](auto& v, auto& f) { c.objective.dim = at_least_one(v, f); }},
      {"data_seed", [&](auto& v, auto& f) { c.objective.data_seed = as_uint(v, f); }},
      {"lambda_min", [&](auto& v, auto& f) { c.objective.lambda_min = non_negative(v, f); }},
      {"lambda_max", [&](auto& v, auto& f) { c.objective.lambda_max = non_negative(v, f); }},
      {"offset_scale", [&](auto& v, auto& f) { c.objective.offset_scale = non_negative(v, f); }},
      {"noise_sigma", [&](auto& v, auto& f) { c.objective.noise_sigma = non_negative(v, f); }},
      {"rows", [&](auto& v, auto& f) { c.objective.rows = at_least_one(v, f); }},
      {"separation", [&](auto& v, auto& f) { c.objective.separation = non_negative(v, f); }},
      {"ridge", [&](auto& v, auto& f) { c.objective.ridge = non_negative(v, f); }},
      {"csv", [&](auto& v, auto& f) { c.objective.csv = scalar(v, f); }},
  });

  // Cross-field checks.
  if (c.topology == TopologyKind::custom && c.edges.empty() && c.n > 1) {
    throw ConfigError("network.edges", 0, "custom topology needs an edge list");
  }
  if (c.topology != TopologyKind::custom && !c.edges.empty()) {
    fail("network.edges", edges_node, "edges are only allowed with topology: custom");
  }
  if (c.latency.hi < c.latency.lo) throw ConfigError("network.latency_hi", 0, "must be >= latency_lo");
  if (c.compute.hi < c.compute.lo) throw ConfigError("compute.hi", 0, "must be >= compute.lo");
  if (!c.compute.node_scales.empty() && c.compute.node_scales.size() != c.n) {
    fail("compute.node_scales", scales_node, "needs exactly n = " + std::to_string(c.n) + " entries");
  }
  if (c.objective.lambda_max < c.objective.lambda_min) {
    throw ConfigError("objective.lambda_max", 0, "must be >= lambda_min");
  }
  if (c.x0 && c.x0->size() != c.objective.dim && c.objective.csv.empty()) {
    fail("training.x0", x0_node, "needs exactly objective.dim = " + std::to_string(c.objective.dim) + " entries");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) { out += fmt::format("  {}: {}\n", key, value); };
  auto num = [](double v) { return fmt::format("{}", v); };
  auto list = [&](const std::vector<double>& v) {
    std::vector<std::string> parts;
    for (const double d : v) parts.push_back(num(d));
    return fmt::format("[{}]", fmt::join(parts, ", "));
  };

  out += "run:\n";
  line("mode", to_string(c.mode));
  line("seed", std::to_string(c.seed));
  line("replicas", std::to_string(c.replicas));
  line("output", quoted(c.output));
  line("stride", std::to_string(c.stride));

  out += "network:\n";
  line("topology", to_string(c.topology));
  line("n", std::to_string(c.n));
  std::vector<std::string> edges;
  for (const auto& [u, v] : c.edges) edges.push_back(fmt::format("[{}, {}]", u, v));
  line("edges", fmt::format("[{}]", fmt::join(edges, ", ")));
  line("latency", name(c.latency.kind));
  line("latency_value", num(c.latency.value));
  line("latency_lo", num(c.latency.lo));
  line("latency_hi", num(c.latency.hi));
  line("latency_mean", num(c.latency.mean));

  out += "compute:\n";
  line("kind", name(c.compute.kind));
  line("mean", num(c.compute.mean));
  line("lo", num(c.compute.lo));
  line("hi", num(c.compute.hi));
  line("node_scales", list(c.compute.node_scales));
  line("start", to_string(c.start));

  out += "training:\n";
  line("eta", c.eta ? num(*c.eta) : "auto");
  line("samples_per_node", std::to_string(c.samples_per_node));
  line("pilot_fraction", num(c.pilot_fraction));
  line("check_descent", c.check_descent ? (*c.check_descent ? "true" : "false") : "auto");
  line("x0", c.x0 ? list(*c.x0) : "zero");

  out += "objective:\n";
  line("kind", name(c.objective.kind));
  line("dim", std::to_string(c.objective.dim));
  line("data_seed", std::to_string(c.objective.data_seed));
  line("lambda_min", num(c.objective.lambda_min));
  line("lambda_max", num(c.objective.lambda_max));
  line("offset_scale", num(c.objective.offset_scale));
  line("noise_sigma", num(c.objective.noise_sigma));
  line("rows", std::to_string(c.objective.rows));
  line("separation", num(c.objective.separation));
  line("ridge", num(c.objective.ridge));
  line("csv", quoted(c.objective.csv));
  return out;
}

std::string config_digest(const ExperimentConfig& config) {
  const std::string text = serialize_config(config);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &size, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < size; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

ObjectiveSpec build_objective(const ExperimentConfig& config) {
  const auto& o = config.objective;
  if (o.kind == ObjectiveKind::quadratic) {
    return random_quadratic(o.dim, o.lambda_min, o.lambda_max, o.offset_scale, o.noise_sigma, o.data_seed);
  }
  const LogisticDataset data = o.csv.empty() ? synthetic_blobs(o.rows, o.dim, o.separation, o.data_seed)
                                             : load_logistic_csv(o.csv);
  return ObjectiveSpec::logistic(data.features, data.labels, o.ridge);
}

Topology build_topology(const ExperimentConfig& config) {
  switch (config.topology) {
    case TopologyKind::fully_connected: return Topology::fully_connected(config.n);
    case TopologyKind::ring: return Topology::ring(config.n);
    case TopologyKind::custom: return Topology::custom(config.n, config.edges);
  }
  return Topology::fully_connected(config.n);
}

SimConfig build_sim_config(const ExperimentConfig& config, std::size_t replica, std::optional<double> eta) {
  SimConfig sim;
  sim.topology = build_topology(config);
  sim.objective = build_objective(config);
  if (config.x0) {
    if (config.x0->size() != sim.objective.dim()) {
      throw ConfigError("training.x0", 0, "needs exactly " + std::to_string(sim.objective.dim()) + " entries");
    }
    sim.x0 = Eigen::Map<const Eigen::VectorXd>(config.x0->data(), static_cast<Eigen::Index>(config.x0->size()));
  }
  const auto chosen = eta ? eta : config.eta;
  if (!chosen) throw ConfigError("training.eta", 0, "no stepsize resolved");
  sim.eta = *chosen;
  sim.samples_per_node = config.samples_per_node;
  sim.compute = config.compute;
  sim.start = config.start;
  sim.latency = config.latency.model();
  sim.seed = config.seed + replica;
  sim.check_descent = config.check_descent.value_or(sim.objective.deterministic());
  return sim;
}

}  // namespace dasgd::cli
