#include "dasgd_cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "dasgd/error.hpp"
#include "dasgd/event_log.hpp"

namespace dasgd::cli {
namespace fs = std::filesystem;

namespace {

constexpr double kRelTol = 1e-12;

RunTrace simulate(const SimConfig& sim, RunMode mode) {
  switch (mode) {
    case RunMode::dasgd: return run(sim);
    case RunMode::sync: return run_sync_baseline(sim);
    case RunMode::centralized_asgd: return run_centralized_asgd(sim);
  }
  return run(sim);
}

double bound_for(const StalenessSummary& s, bool deterministic, double lipschitz) {
  return deterministic ? stepsize_bound_tight(lipschitz, s.s_avg)
                       : stepsize_bound_loose(lipschitz, s.shat_avg, static_cast<double>(s.shat_max));
}

std::string g12(double v) { return fmt::format("{:.12g}", v); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

/// Runs fn(0..count-1) on up to worker_threads() threads. fn must not throw.
template <typename Fn>
void parallel_for(std::size_t count, Fn fn) {
  const std::size_t threads = std::min(worker_threads(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

/// What a replica job reports back to the orchestrator.
struct JobOutcome {
  enum class Status { ok, diverged, failed } status = Status::failed;
  std::string message;
  double final_psi = 0.0;
  double s_avg = 0.0;
};

std::string divergence_message(const DivergenceError& e, const ExperimentConfig& config, std::size_t replica) {
  std::string msg = fmt::format("diverged: node {} at step {} with eta = {}", e.node(), e.step(), g12(e.eta()));
  try {
    ExperimentConfig pilot = config;
    pilot.eta.reset();
    msg += fmt::format("; theorem-recommended eta <= {}", g12(choose_eta(pilot, replica)));
  } catch (const Error&) {
    if (e.measured_s_avg() > 0.0) msg += fmt::format(" (measured S_avg before abort {})", g12(e.measured_s_avg()));
  }
  return msg;
}

JobOutcome run_job(const ExperimentConfig& config, std::size_t replica, const std::string& run_id, const fs::path& dir) {
  JobOutcome outcome;
  try {
    const ExperimentResult result = execute(config, replica, run_id);
    write_run_outputs(result, dir);
    outcome.status = JobOutcome::Status::ok;
    outcome.final_psi = result.theory.final_psi;
    outcome.s_avg = result.theory.inputs.s_avg;
    outcome.message = fmt::format("{}: S_avg {} S_max {} final Psi {} -> {}", run_id, g12(result.theory.inputs.s_avg),
                                  g12(result.theory.inputs.s_max), g12(result.theory.final_psi), dir.string());
  } catch (const DivergenceError& e) {
    outcome.status = JobOutcome::Status::diverged;
    outcome.message = run_id + ": " + divergence_message(e, config, replica);
  } catch (const std::exception& e) {
    outcome.status = JobOutcome::Status::failed;
    outcome.message = run_id + ": " + e.what();
  }
  return outcome;
}

ExperimentConfig apply_overrides(ExperimentConfig config, const RunOptions& options) {
  if (options.out) config.output = options.out->string();
  if (options.seed) config.seed = *options.seed;
  if (options.replicas) {
    if (*options.replicas == 0) throw ConfigError("--replicas", 0, "must be >= 1");
    config.replicas = *options.replicas;
  }
  return config;
}

int report_outcomes(const std::vector<JobOutcome>& outcomes, std::ostream& out, std::ostream& err) {
  int code = kOk;
  for (const auto& o : outcomes) {
    switch (o.status) {
      case JobOutcome::Status::ok: out << o.message << '\n'; break;
      case JobOutcome::Status::diverged:
        err << o.message << '\n';
        code = std::max(code, static_cast<int>(kDiverged));
        break;
      case JobOutcome::Status::failed:
        err << "error: " << o.message << '\n';
        code = std::max(code, static_cast<int>(kBadInput));
        break;
    }
  }
  return code;
}

}  // namespace

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> columns{"run_id", "mode",     "topology", "n",    "eta",
                                                "seed",   "t",        "sim_time", "node", "loss",
                                                "grad_norm_sq", "tight_staleness", "loose_staleness"};
  return columns;
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("DASGD_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

double choose_eta(const ExperimentConfig& config, std::size_t replica) {
  if (config.eta) return *config.eta;
  const ObjectiveSpec objective = build_objective(config);
  const double lipschitz = lipschitz_constant(objective);
  if (config.mode == RunMode::sync) return stepsize_bound_tight(lipschitz, 0.0);

  ExperimentConfig pilot = config;
  pilot.samples_per_node = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.pilot_fraction * static_cast<double>(config.samples_per_node))));
  const double n = static_cast<double>(config.n);
  SimConfig sim = build_sim_config(pilot, replica, 1.0 / (4.0 * lipschitz * std::max(1.0, n * n)));
  sim.check_descent = false;
  const RunTrace trace = simulate(sim, config.mode);
  return bound_for(*trace.summary, objective.deterministic(), lipschitz);
}

ExperimentResult execute(const ExperimentConfig& config, std::size_t replica, const std::string& run_id) {
  ExperimentResult result;
  result.run_id = run_id;
  result.config = config;
  result.config.replicas = 1;
  result.config.seed = config.seed + replica;

  double eta = choose_eta(config, replica);
  result.sim = build_sim_config(result.config, 0, eta);
  result.trace = simulate(result.sim, config.mode);

  // The event schedule does not depend on eta, so a rerun at the bound measured
  // on the full run reproduces the same staleness and satisfies the rule exactly.
  if (!config.eta && result.trace.summary) {
    const double lipschitz = lipschitz_constant(result.sim.objective);
    const double full = bound_for(*result.trace.summary, result.sim.objective.deterministic(), lipschitz);
    if (eta > full * (1.0 + kRelTol)) {
      eta = full;
      result.sim.eta = eta;
      result.trace = simulate(result.sim, config.mode);
    }
  }
  result.config.eta = eta;
  result.theory = evaluate_theory(result.sim, result.trace);
  return result;
}

std::vector<std::pair<NodeIndex, std::vector<double>>> psi_by_node(const RunTrace& trace) {
  std::map<NodeIndex, std::vector<double>> series;
  std::map<NodeIndex, double> totals;
  for (const auto& a : trace.applications) {
    auto& s = series[a.node];
    totals[a.node] += a.grad_norm_sq;
    s.push_back(totals[a.node] / static_cast<double>(s.size() + 1));
  }
  return {series.begin(), series.end()};
}

TheoryReport evaluate_theory(const SimConfig& sim, const RunTrace& trace) {
  TheoryReport r;
  const ObjectiveSpec& objective = sim.objective;
  const ParamVector x0 = sim.initial_point();
  const ParamVector xstar = minimizer(objective);
  const double radius = std::max(2.0 * (x0 - xstar).norm(), 1e-12);

  BoundInputs& in = r.inputs;
  in.lipschitz = lipschitz_constant(objective);
  in.sigma = variance_bound(objective);
  in.q = gradient_norm_bound(objective, radius);
  in.r0 = std::max(0.0, loss(objective, x0) - loss(objective, xstar));
  in.eta = sim.eta;
  if (trace.summary) {
    in.s_avg = trace.summary->s_avg;
    in.s_max = static_cast<double>(trace.summary->s_max);
    in.shat_avg = trace.summary->shat_avg;
    in.shat_max = static_cast<double>(trace.summary->shat_max);
  }

  r.eta_bound_tight = stepsize_bound_tight(in.lipschitz, in.s_avg);
  r.eta_bound_loose = stepsize_bound_loose(in.lipschitz, in.shat_avg, in.shat_max);
  r.bound = objective.deterministic() ? RateBound::with_q : RateBound::no_q;
  const double rule = r.bound == RateBound::with_q ? r.eta_bound_tight : r.eta_bound_loose;
  r.precondition_met = sim.eta <= rule * (1.0 + kRelTol);

  for (const auto& a : trace.applications) r.max_grad_norm = std::max(r.max_grad_norm, std::sqrt(a.grad_norm_sq));

  const auto formula = [&](std::uint64_t t) {
    return r.bound == RateBound::with_q ? rate_formula_with_q(in, t) : rate_formula_no_q(in, t);
  };
  bool holds = true;
  for (const auto& [node, series] : psi_by_node(trace)) {
    for (std::size_t t = 0; t < series.size(); ++t) holds = holds && series[t] <= formula(t);
    if (!series.empty() && series.back() >= r.final_psi) {
      r.final_psi = series.back();
      r.final_t = series.size() - 1;
    }
  }
  r.bound_at_final = formula(r.final_t);
  r.bound_holds = holds && r.precondition_met;
  return r;
}

std::string format_trace_csv(const ExperimentResult& result) {
  std::string out;
  for (std::size_t i = 0; i < trace_columns().size(); ++i) {
    if (i) out += ',';
    out += trace_columns()[i];
  }
  out += '\n';
  const auto& c = result.config;
  const std::string prefix = fmt::format("{},{},{},{},{},{}", result.run_id, to_string(c.mode), to_string(c.topology),
                                         c.n, g12(result.sim.eta), c.seed);
  for (const auto& a : result.trace.applications) {
    if (a.step % c.stride != 0) continue;
    out += fmt::format("{},{},{},{},{},{},{},{}\n", prefix, a.step, g12(a.time), a.node, g12(a.loss),
                       g12(a.grad_norm_sq), a.tight, a.loose);
  }
  return out;
}

std::string format_staleness_csv(std::span<const StalenessRecord> records) {
  std::string out = "applier,applier_step,producer,producer_step,tight_staleness,loose_staleness\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{}\n", r.applier, r.applier_step, r.producer, r.producer_step, r.tight_size,
                       r.loose_size);
  }
  return out;
}

std::string format_summary(const ExperimentResult& result) {
  const auto& trace = result.trace;
  const auto& th = result.theory;
  std::string out;
  auto kv = [&](std::string_view key, const std::string& value) { out += fmt::format("{}: {}\n", key, value); };

  kv("run_id", result.run_id);
  kv("mode", to_string(result.config.mode));
  kv("topology", to_string(result.config.topology));
  kv("n", std::to_string(result.config.n));
  kv("seed", std::to_string(result.config.seed));
  kv("eta", g12(result.sim.eta));
  kv("gradients_computed", std::to_string(trace.gradients_computed));
  kv("applications", std::to_string(trace.applications.size()));
  kv("end_time", g12(trace.end_time));
  kv("throughput", g12(trace.throughput()));
  kv("S_avg", g12(th.inputs.s_avg));
  kv("S_max", g12(th.inputs.s_max));
  kv("Shat_avg", g12(th.inputs.shat_avg));
  kv("Shat_max", g12(th.inputs.shat_max));
  kv("T", std::to_string(trace.summary ? trace.summary->max_step : th.final_t));
  kv("L", g12(th.inputs.lipschitz));
  kv("sigma", g12(th.inputs.sigma));
  kv("Q", g12(th.inputs.q.value_or(0.0)));
  kv("max_grad_norm", g12(th.max_grad_norm));
  kv("r0", g12(th.inputs.r0));
  kv("eta_bound_tight", g12(th.eta_bound_tight));
  kv("eta_bound_loose", g12(th.eta_bound_loose));
  kv("bound", th.bound == RateBound::with_q ? "with_Q" : "no_Q");
  kv("precondition", th.precondition_met ? "met" : "violated");
  kv("final_psi", g12(th.final_psi));
  kv("bound_at_final", g12(th.bound_at_final));
  kv("bound_check", !th.precondition_met ? "not applicable" : (th.bound_holds ? "holds" : "violated"));

  bool monotone = true;
  std::map<NodeIndex, double> last;
  for (const auto& a : trace.applications) {
    const auto it = last.find(a.node);
    if (it != last.end() && a.loss > it->second) monotone = false;
    last[a.node] = a.loss;
  }
  kv("loss_monotone", monotone ? "yes" : "no");
  if (result.sim.check_descent) {
    const auto held = std::count_if(trace.descent.begin(), trace.descent.end(), [](const auto& d) { return d.holds; });
    kv("descent_check", fmt::format("{}/{} events hold", held, trace.descent.size()));
  } else {
    kv("descent_check", "skipped");
  }
  return out;
}

std::string format_manifest(const ExperimentResult& result) {
  return fmt::format("# dasgd-sim run manifest\n# run-id: {}\n# digest: sha256:{}\n{}", result.run_id,
                     config_digest(result.config), serialize_config(result.config));
}

void write_run_outputs(const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "trace.csv", format_trace_csv(result));
  write_file(dir / "staleness.csv", format_staleness_csv(result.trace.staleness));
  write_file(dir / "summary.txt", format_summary(result));
  write_file(dir / "manifest.txt", format_manifest(result));
  if (result.trace.mode == RunMode::dasgd) {
    std::ostringstream log;
    write_event_log(log, to_event_log(result.trace));
    write_file(dir / "events.log", log.str());
  }
  if (result.trace.mode == RunMode::centralized_asgd) {
    std::string delay = "server_step,producer,producer_step,delay,tight_staleness\n";
    for (const auto& a : result.trace.applications) {
      delay += fmt::format("{},{},{},{},{}\n", a.step, a.gradient.producer, a.gradient.step, a.delay.value_or(0),
                           a.tight);
    }
    write_file(dir / "delay.csv", delay);
  }
}

int run_command(const RunOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = apply_overrides(load_config(options.config), options);
    build_sim_config(config, 0, 1.0);  // surfaces topology and objective errors before any work
  } catch (const Error& e) {
    err << "error: " << options.config.string() << ": " << e.what() << '\n';
    return kBadInput;
  }

  const fs::path root = config.output;
  std::vector<JobOutcome> outcomes(config.replicas);
  parallel_for(config.replicas, [&](std::size_t r) {
    const bool single = config.replicas == 1;
    const std::string id = single ? "run" : fmt::format("replica-{}", r);
    outcomes[r] = run_job(config, r, id, single ? root : root / id);
  });
  return report_outcomes(outcomes, out, err);
}

int sweep_command(const SweepOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig base;
  std::vector<ExperimentConfig> points;
  try {
    base = apply_overrides(load_config(options.run.config), options.run);
    if (options.values.empty()) throw ConfigError("--values", 0, "needs at least one value");
    for (const auto& value : options.values) {
      ExperimentConfig point = base;
      try {
        if (options.axis == "n") {
          point.n = static_cast<std::size_t>(std::stoull(value));
          if (point.n == 0) throw ConfigError("--values", 0, "n must be >= 1");
          if (!point.compute.node_scales.empty() && point.compute.node_scales.size() != point.n) {
            throw ConfigError("compute.node_scales", 0, "does not match n = " + value);
          }
        } else if (options.axis == "topology") {
          point.topology = parse_topology_kind(value);
          if (point.topology == TopologyKind::custom) throw ConfigError("--values", 0, "custom is not a sweep value");
        } else if (options.axis == "eta") {
          point.eta = std::stod(value);
          if (!(*point.eta > 0.0) || !std::isfinite(*point.eta)) throw ConfigError("--values", 0, "eta must be > 0");
        } else if (options.axis == "sigma") {
          point.objective.noise_sigma = std::stod(value);
          if (!(point.objective.noise_sigma >= 0.0)) throw ConfigError("--values", 0, "sigma must be >= 0");
        } else {
          throw ConfigError("--axis", 0, "unknown axis '" + options.axis + "' (expected n, topology, eta or sigma)");
        }
      } catch (const std::logic_error&) {
        throw ConfigError("--values", 0, "cannot parse '" + value + "' for axis " + options.axis);
      }
      build_sim_config(point, 0, 1.0);
      points.push_back(std::move(point));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  }

  const fs::path root = base.output;
  const std::size_t replicas = base.replicas;
  std::vector<JobOutcome> outcomes(points.size() * replicas);
  parallel_for(outcomes.size(), [&](std::size_t job) {
    const std::size_t p = job / replicas;
    const std::size_t r = job % replicas;
    const std::string label = fmt::format("{}-{}", options.axis, options.values[p]);
    outcomes[job] = run_job(points[p], r, fmt::format("{}.r{}", label, r), root / label / fmt::format("replica-{}", r));
  });

  std::string csv = "axis,value,replicas,completed,diverged,psi_mean,psi_std,s_avg_mean,s_avg_std\n";
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<double> psi;
    std::vector<double> s_avg;
    std::size_t diverged = 0;
    for (std::size_t r = 0; r < replicas; ++r) {
      const auto& o = outcomes[p * replicas + r];
      if (o.status == JobOutcome::Status::ok) {
        psi.push_back(o.final_psi);
        s_avg.push_back(o.s_avg);
      }
      if (o.status == JobOutcome::Status::diverged) ++diverged;
    }
    const auto stats = [](const std::vector<double>& v) -> std::pair<std::string, std::string> {
      if (v.empty()) return {"nan", "nan"};
      double mean = 0.0;
      for (const double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (const double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      return {g12(mean), g12(sd)};
    };
    const auto [pm, ps] = stats(psi);
    const auto [sm, ss] = stats(s_avg);
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", options.axis, options.values[p], replicas, psi.size(), diverged,
                       pm, ps, sm, ss);
  }
  try {
    fs::create_directories(root);
    write_file(root / "sweep.csv", csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  }
  const int code = report_outcomes(outcomes, out, err);
  out << "wrote " << (root / "sweep.csv").string() << '\n';
  return code;
}

int verify_command(const fs::path& dir, std::ostream& out, std::ostream& err) {
  for (const char* name : {"trace.csv", "staleness.csv", "manifest.txt"}) {
    if (!fs::exists(dir / name)) {
      err << "error: missing " << (dir / name).string() << '\n';
      return kBadInput;
    }
  }

  std::string run_id;
  std::string digest;
  ExperimentConfig config;
  try {
    const std::string manifest = read_file(dir / "manifest.txt");
    std::istringstream lines(manifest);
    for (std::string line; std::getline(lines, line);) {
      if (line.starts_with("# run-id: ")) run_id = line.substr(10);
      if (line.starts_with("# digest: sha256:")) digest = line.substr(17);
    }
    config = parse_config(manifest);
    if (!config.eta) throw ConfigError("training.eta", 0, "manifest must record the stepsize used");
  } catch (const Error& e) {
    err << "error: manifest: " << e.what() << '\n';
    return kBadInput;
  }
  if (config.mode == RunMode::dasgd && !fs::exists(dir / "events.log")) {
    err << "error: missing " << (dir / "events.log").string() << '\n';
    return kBadInput;
  }

  bool failed = false;
  auto report = [&](std::string_view check, std::string_view status, const std::string& detail) {
    if (status == "FAIL") failed = true;
    out << check << ": " << status;
    if (!detail.empty()) out << " (" << detail << ")";
    out << '\n';
  };

  report("manifest-digest", config_digest(config) == digest ? "PASS" : "FAIL", "");

  ExperimentResult result;
  result.config = config;
  result.run_id = run_id;
  try {
    result.sim = build_sim_config(config, 0);
    const double lipschitz = lipschitz_constant(result.sim.objective);
    result.sim.check_descent = result.sim.objective.deterministic() && result.sim.eta <= 0.5 / lipschitz &&
                               config.mode == RunMode::dasgd;
    result.trace = simulate(result.sim, config.mode);
    result.theory = evaluate_theory(result.sim, result.trace);
  } catch (const DivergenceError& e) {
    report("re-simulation", "FAIL", e.what());
    return kCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  }

  try {
    report("trace-reproducible", format_trace_csv(result) == read_file(dir / "trace.csv") ? "PASS" : "FAIL",
           "trace.csv regenerated from the manifest");

    // (a) final agreement
    const auto& t = result.trace;
    if (t.final_models.size() < 2) {
      report("final-agreement", "PASS", "single model");
    } else {
      bool same_sets = true;
      bool bit_identical = true;
      double spread = 0.0;
      double scale = 0.0;
      auto sorted = [](std::vector<GradientId> v) {
        std::sort(v.begin(), v.end());
        return v;
      };
      const auto ref_set = sorted(t.applied.front());
      const ParamVector ref = reconstruct_model(result.sim.initial_point(), result.sim.eta, t.gradients, ref_set);
      for (std::size_t i = 0; i < t.final_models.size(); ++i) {
        same_sets = same_sets && sorted(t.applied[i]) == ref_set;
        const ParamVector rec = reconstruct_model(result.sim.initial_point(), result.sim.eta, t.gradients, t.applied[i]);
        bit_identical = bit_identical && rec == ref;
        scale = std::max(scale, t.final_models[i].norm());
        spread = std::max(spread, (t.final_models[i] - t.final_models.front()).norm());
        spread = std::max(spread, (t.final_models[i] - rec).norm());
      }
      const bool close = spread <= 1e-9 * (1.0 + scale);
      report("final-agreement", same_sets && bit_identical && close ? "PASS" : "FAIL",
             fmt::format("sets {}, canonical sums {}, max distance {}", same_sets ? "equal" : "differ",
                         bit_identical ? "bit-identical" : "differ", g12(spread)));
    }

    // (b) staleness oracle
    if (config.mode == RunMode::dasgd) {
      try {
        std::ifstream log(dir / "events.log");
        const auto events = parse_event_log(log);
        const auto oracle = check_event_log(events);
        const bool matches_file =
            format_staleness_csv(replay_incremental(events)) == read_file(dir / "staleness.csv");
        if (!oracle.equivalent()) {
          report("staleness-oracle", "FAIL", fmt::format("first mismatch at line {}", oracle.first_mismatch->line));
        } else if (!matches_file) {
          report("staleness-oracle", "FAIL", "staleness.csv differs from the replayed event log");
        } else {
          report("staleness-oracle", "PASS", fmt::format("equivalent ({} events)", oracle.events));
        }
      } catch (const EventLogError& e) {
        report("staleness-oracle", "FAIL", std::string("events.log ") + e.what());
      }
    } else {
      const bool matches = format_staleness_csv(result.trace.staleness) == read_file(dir / "staleness.csv");
      report("staleness-oracle", matches ? "PASS" : "FAIL", "staleness.csv regenerated; no event log for this mode");
    }

    // (c) theorem bound
    const auto& th = result.theory;
    const char* bound_name = th.bound == RateBound::with_q ? "with_Q" : "no_Q";
    if (!th.precondition_met) {
      report("theorem-bound", "skipped", fmt::format("eta {} above the {} stepsize rule", g12(result.sim.eta), bound_name));
    } else if (th.bound == RateBound::with_q && th.max_grad_norm > *th.inputs.q) {
      report("theorem-bound", "FAIL", fmt::format("observed gradient norm {} exceeds Q {}", g12(th.max_grad_norm),
                                                  g12(*th.inputs.q)));
    } else {
      report("theorem-bound", th.bound_holds ? "PASS" : "FAIL",
             fmt::format("{} bound, final Psi {} <= {}", bound_name, g12(th.final_psi), g12(th.bound_at_final)));
    }

    // (d) descent inequality
    if (!result.sim.objective.deterministic()) {
      report("descent-lemma", "skipped", "stochastic");
    } else if (!result.sim.check_descent) {
      report("descent-lemma", "skipped",
             config.mode == RunMode::dasgd ? "eta > 1/(2L)" : "decentralized runs only");
    } else {
      const auto held = std::count_if(t.descent.begin(), t.descent.end(), [](const auto& d) { return d.holds; });
      report("descent-lemma", static_cast<std::size_t>(held) == t.descent.size() ? "PASS" : "FAIL",
             fmt::format("{}/{} events", held, t.descent.size()));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return failed ? kCheckFailed : kOk;
}

int oracle_command(const fs::path& path, std::ostream& out, std::ostream& err) {
  std::ifstream in(path);
  if (!in) {
    err << "error: cannot read " << path.string() << '\n';
    return kBadInput;
  }
  try {
    const auto events = parse_event_log(in);
    const auto report = check_event_log(events);
    if (report.equivalent()) {
      out << "equivalent (" << report.events << " events)\n";
      return kOk;
    }
    const auto& m = *report.first_mismatch;
    std::ostringstream a;
    std::ostringstream b;
    a << m.incremental;
    b << m.brute_force;
    out << fmt::format("mismatch at line {} (application #{}): incremental {} vs brute force {}\n", m.line,
                       m.application_index, a.str(), b.str());
    return kCheckFailed;
  } catch (const EventLogError& e) {
    err << "error: " << path.string() << ": "
        << (e.reason() == EventLogError::Reason::protocol ? "protocol violation at " : "malformed input at ") << e.what()
        << '\n';
    return kBadInput;
  }
}

}  // namespace dasgd::cli
