// treestat: simulate detector-tree click statistics, estimate theta/g
// nonclassicality witnesses, and cross-check the combinatorics against an
// exact enumeration oracle.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treestat/analytic.hpp"
#include "treestat/estimate.hpp"
#include "treestat/io.hpp"
#include "treestat/oracle.hpp"
#include "treestat/rng.hpp"
#include "treestat/simulate.hpp"
#include "treestat/timetags.hpp"
#include "treestat/version.hpp"

namespace {

using nlohmann::json;
using namespace treestat;

constexpr int kExitSuccess = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// Run configuration: defaults < config file < command-line flags.

struct RunConfig {
  std::size_t emitters = 1;
  double efficiency = 0.5;
  std::vector<double> per_emitter;
  double noise_mean = 0.0;
  std::size_t channels = 2;
  double channel_efficiency = 0.5;
  std::vector<double> xi;
  std::vector<double> weights;
  std::uint64_t pulses = 1000000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double rep_rate_hz = 5.0e6;
  double window_ns = 40.0;

  std::vector<std::size_t> orders = {2, 3, 4};
  double k_sigma = 3.0;
  std::string uncertainty = "bootstrap";
  int bootstrap_rounds = 200;
  std::uint64_t bootstrap_seed = 0x626f6f74ull;
  bool inverse_variance = false;
};

template <typename T>
void load_field(const json& in, const char* key, T& value) {
  if (in.contains(key)) value = in.at(key).get<T>();
}

RunConfig load_config_file(const std::string& path) {
  RunConfig config;
  json in;
  try {
    in = json::parse(io::read_file(path));
  } catch (const json::exception& error) {
    throw std::runtime_error("invalid config file '" + path + "': " + error.what());
  }
  load_field(in, "emitters", config.emitters);
  load_field(in, "efficiency", config.efficiency);
  load_field(in, "per_emitter", config.per_emitter);
  load_field(in, "noise_mean", config.noise_mean);
  load_field(in, "channels", config.channels);
  load_field(in, "channel_efficiency", config.channel_efficiency);
  load_field(in, "xi", config.xi);
  load_field(in, "weights", config.weights);
  load_field(in, "pulses", config.pulses);
  load_field(in, "seed", config.seed);
  load_field(in, "threads", config.threads);
  load_field(in, "rep_rate_hz", config.rep_rate_hz);
  load_field(in, "window_ns", config.window_ns);
  load_field(in, "orders", config.orders);
  load_field(in, "k_sigma", config.k_sigma);
  load_field(in, "uncertainty", config.uncertainty);
  load_field(in, "bootstrap_rounds", config.bootstrap_rounds);
  load_field(in, "bootstrap_seed", config.bootstrap_seed);
  load_field(in, "inverse_variance", config.inverse_variance);
  return config;
}

json config_to_json(const RunConfig& config) {
  json out;
  out["emitters"] = config.emitters;
  out["efficiency"] = config.efficiency;
  if (!config.per_emitter.empty()) out["per_emitter"] = config.per_emitter;
  out["noise_mean"] = config.noise_mean;
  out["channels"] = config.channels;
  out["channel_efficiency"] = config.channel_efficiency;
  if (!config.xi.empty()) out["xi"] = config.xi;
  if (!config.weights.empty()) out["weights"] = config.weights;
  out["pulses"] = config.pulses;
  out["seed"] = config.seed;
  out["threads"] = config.threads;
  out["rep_rate_hz"] = config.rep_rate_hz;
  out["window_ns"] = config.window_ns;
  out["orders"] = config.orders;
  out["k_sigma"] = config.k_sigma;
  out["uncertainty"] = config.uncertainty;
  out["bootstrap_rounds"] = config.bootstrap_rounds;
  out["bootstrap_seed"] = config.bootstrap_seed;
  out["inverse_variance"] = config.inverse_variance;
  return out;
}

mc::SimulationConfig to_simulation(const RunConfig& config) {
  mc::SimulationConfig sim;
  sim.ensemble.emitters = config.emitters;
  sim.ensemble.efficiency = config.efficiency;
  sim.ensemble.per_emitter = config.per_emitter;
  sim.noise.mean_photons = config.noise_mean;
  if (!config.xi.empty()) {
    sim.tree.xi = config.xi;
    if (!config.weights.empty()) {
      sim.tree.weights = config.weights;
    } else {
      sim.tree.weights.assign(config.xi.size(), 1.0 / static_cast<double>(config.xi.size()));
    }
  } else {
    sim.tree = DetectorTree::balanced(config.channels, config.channel_efficiency);
  }
  sim.n_pulses = config.pulses;
  sim.seed = config.seed;
  sim.threads = config.threads;
  sim.rep_rate_hz = config.rep_rate_hz;
  sim.window_ns = config.window_ns;
  sim.validate();
  return sim;
}

estimator::Options to_options(const RunConfig& config) {
  estimator::Options options;
  if (config.uncertainty == "bootstrap") {
    options.method = estimator::UncertaintyMethod::bootstrap;
  } else if (config.uncertainty == "propagation") {
    options.method = estimator::UncertaintyMethod::propagation;
  } else {
    throw CLI::ValidationError("--uncertainty must be 'bootstrap' or 'propagation'");
  }
  options.bootstrap_rounds = config.bootstrap_rounds;
  options.bootstrap_seed = config.bootstrap_seed;
  options.k_sigma = config.k_sigma;
  options.orders = config.orders;
  options.inverse_variance = config.inverse_variance;
  return options;
}

// Reproducibility record written next to every produced file.
struct RunManifest {
  std::string command;
  json config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& manifest, const std::string& anchor_path) {
  json out;
  out["format"] = "treestat-manifest";
  out["version"] = 1;
  out["tool_version"] = kVersion;
  out["command"] = manifest.command;
  out["config"] = manifest.config;
  out["inputs"] = manifest.inputs;
  out["outputs"] = manifest.outputs;
  io::write_file(anchor_path + ".manifest.json", out.dump(2) + "\n");
}

// Pre-scan for --config/-c so file values become defaults for the real parse.
std::optional<std::string> find_config_flag(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if ((arg == "--config" || arg == "-c") && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

void add_model_flags(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--emitters,-M", config.emitters, "Number of emitters in the ensemble");
  cmd->add_option("--efficiency", config.efficiency,
                  "Uniform per-emitter collection efficiency");
  cmd->add_option("--per-emitter", config.per_emitter,
                  "Per-emitter efficiencies (overrides --efficiency)");
  cmd->add_option("--noise", config.noise_mean, "Mean background photons per pulse");
  cmd->add_option("--channels,-N", config.channels, "Detector channels (balanced tree)");
  cmd->add_option("--xi", config.channel_efficiency,
                  "Channel efficiency of the balanced tree");
  cmd->add_option("--xi-list", config.xi, "Per-channel efficiencies (unbalanced tree)");
  cmd->add_option("--weights", config.weights, "Splitting weights (with --xi-list)");
}

void add_run_flags(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--pulses,-n", config.pulses, "Excitation pulses to simulate");
  cmd->add_option("--seed,-s", config.seed, "Master seed (per-pulse substreams)");
  cmd->add_option("--threads,-j", config.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--rep-rate", config.rep_rate_hz, "Repetition rate in Hz");
  cmd->add_option("--window-ns", config.window_ns, "Acceptance window in ns");
}

void add_estimator_flags(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--orders", config.orders, "Coincidence orders to analyze");
  cmd->add_option("--k-sigma", config.k_sigma, "Decision threshold in sigmas");
  cmd->add_option("--uncertainty", config.uncertainty, "bootstrap or propagation");
  cmd->add_option("--bootstrap-rounds", config.bootstrap_rounds, "Bootstrap resamples");
  cmd->add_option("--bootstrap-seed", config.bootstrap_seed, "Bootstrap RNG seed");
  cmd->add_flag("--inverse-variance", config.inverse_variance,
                "Weight combinations by inverse variance");
}

// ---------------------------------------------------------------------------
// simulate

int run_simulate(const RunConfig& config, const std::string& output,
                 const std::string& stream_path, const std::string& stream_format) {
  const mc::SimulationConfig sim = to_simulation(config);
  RunManifest manifest{"simulate", config_to_json(config), {}, {output}};

  if (!stream_path.empty()) {
    mc::SimulationConfig streaming = sim;
    streaming.emit_stream = true;
    const mc::StreamResult result = mc::simulate_stream(streaming);
    const auto format = stream_format == "binary" ? timetags::StreamFormat::binary
                                                  : timetags::StreamFormat::text;
    timetags::write_stream(result.stream, stream_path, format);
    io::write_counts(result.counts, output);
    manifest.outputs.push_back(stream_path);
    std::cout << "simulated " << sim.n_pulses << " pulses -> " << output << ", "
              << stream_path << " (" << result.stream.events.size() << " events)\n";
  } else {
    const CountSummary counts = mc::simulate(sim);
    io::write_counts(counts, output);
    std::cout << "simulated " << sim.n_pulses << " pulses -> " << output << "\n";
  }
  write_manifest(manifest, output);
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// analyze

int run_analyze(const RunConfig& config, const std::string& input, const std::string& output,
                bool calibrate) {
  const std::string data = io::read_file(input);
  const io::InputKind kind = io::sniff(data);

  estimator::EstimateReport report;
  if (kind == io::InputKind::counts) {
    report = estimator::analyze(io::counts_from_json(data), to_options(config));
  } else if (kind == io::InputKind::stream) {
    timetags::TimeTagStream stream = timetags::parse_stream(data);
    timetags::WindowingPolicy policy = timetags::WindowingPolicy::from_header(stream.header);
    if (calibrate) {
      const timetags::T0Scan scan = timetags::calibrate_t0(stream, policy);
      std::cout << "calibrated t0 = " << scan.t0_ps << " ps (in-window fraction "
                << scan.in_window_fraction << ")\n";
      stream.header.t0_ps = scan.t0_ps;
      std::erase_if(stream.events, [&](const timetags::TimeTagEvent& e) {
        return e.time_ps < scan.t0_ps;
      });
    }
    const timetags::IngestResult result = timetags::ingest(stream, policy);
    std::cout << "ingested " << result.stats.events_in_window << "/"
              << result.stats.events_total << " events into " << result.counts.n_trials
              << " pulses";
    if (result.stats.events_outside_window != 0) {
      std::cout << " (" << result.stats.events_outside_window << " outside the window)";
    }
    std::cout << "\n";
    report = estimator::analyze(result.counts, to_options(config));
  } else if (kind == io::InputKind::estimates) {
    report = estimator::aggregate_and_classify(io::estimates_from_json(data), config.k_sigma,
                                               config.inverse_variance);
  } else {
    throw std::runtime_error("unrecognized input '" + input +
                             "': expected a counts, stream, or estimates file");
  }

  std::cout << io::report_to_text(report);
  if (!output.empty()) {
    io::write_file(output, io::report_to_json(report));
    RunManifest manifest{"analyze", config_to_json(config), {input}, {output}};
    write_manifest(manifest, output);
  }
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// sweep

int run_sweep(RunConfig config, const std::string& axis, const std::vector<double>& values,
              const std::string& output) {
  if (values.empty()) throw CLI::ValidationError("--values must not be empty");

  std::string csv = "axis,value,theta_closed,g_closed,theta_sim,theta_sim_sem,g_sim,g_sim_sem\n";
  estimator::Options options = to_options(config);

  for (const double value : values) {
    RunConfig point = config;
    if (axis == "noise") {
      point.noise_mean = value;
    } else if (axis == "emitters") {
      if (value < 0 || value != std::floor(value)) {
        throw CLI::ValidationError("--values for the emitters axis must be integers >= 0");
      }
      point.emitters = static_cast<std::size_t>(value);
    } else if (axis == "xi") {
      point.channel_efficiency = value;
    } else {
      throw CLI::ValidationError("--axis must be one of: noise, emitters, xi");
    }

    const mc::SimulationConfig sim = to_simulation(point);
    const double theta_closed =
        analytic::theta_order(sim.ensemble, sim.noise, sim.tree, 2);
    double g_closed = std::numeric_limits<double>::quiet_NaN();
    try {
      g_closed = analytic::g_order(sim.ensemble, sim.noise, sim.tree, 2);
    } catch (const UndefinedEstimator&) {
    }

    const CountSummary counts = mc::simulate(sim);
    estimator::Options point_options = options;
    point_options.orders = {2};
    const estimator::EstimateReport report = estimator::analyze(counts, point_options);
    const estimator::Aggregate& theta = report.orders.at(0).theta_aggregate;
    const estimator::Aggregate& g = report.orders.at(0).g_aggregate;

    char line[256];
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  axis.c_str(), value, theta_closed, g_closed,
                  theta.defined ? theta.mean : std::numeric_limits<double>::quiet_NaN(),
                  theta.defined ? theta.sem : std::numeric_limits<double>::quiet_NaN(),
                  g.defined ? g.mean : std::numeric_limits<double>::quiet_NaN(),
                  g.defined ? g.sem : std::numeric_limits<double>::quiet_NaN());
    csv += line;
  }

  io::write_file(output, csv);
  RunManifest manifest{"sweep", config_to_json(config), {}, {output}};
  manifest.config["axis"] = axis;
  manifest.config["values"] = values;
  write_manifest(manifest, output);
  std::cout << "swept " << values.size() << " points -> " << output << "\n";
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// oracle-check

int run_oracle_check(int max_photons, std::size_t max_channels, int trees, std::uint64_t seed,
                     double tolerance, bool broken_exponent) {
  if (max_photons < 0 || max_photons > oracle::kDefaultEnumerationLimit) {
    throw CLI::ValidationError("--max-photons must lie in [0, 12]");
  }
  if (max_channels < 2 || max_channels > 6) {
    throw CLI::ValidationError("--max-channels must lie in [2, 6]");
  }

  PulseRng rng(seed, 0);
  double worst = 0.0;
  for (std::size_t channels = 2; channels <= max_channels; ++channels) {
    double worst_here = 0.0;
    for (int t = 0; t < trees; ++t) {
      DetectorTree tree;
      double total = 0.0;
      for (std::size_t i = 0; i < channels; ++i) {
        tree.xi.push_back(0.05 + 0.95 * rng.next_unit());
        tree.weights.push_back(0.05 + 0.95 * rng.next_unit());
        total += tree.weights.back();
      }
      for (double& w : tree.weights) w /= total;

      for (int photons = 0; photons <= max_photons; ++photons) {
        const oracle::OutcomeDistribution outcomes = oracle::enumerate_outcomes(photons, tree);
        const ChannelMask full = full_mask(channels);
        for (ChannelMask subset = 1; subset <= full; ++subset) {
          const double formula =
              broken_exponent ? oracle::q_kfold_click_no_exponent(photons, tree, subset)
                              : oracle::q_kfold_click(photons, tree, subset);
          worst_here = std::max(worst_here, std::abs(outcomes.all_click(subset) - formula));
        }
        worst_here = std::max(
            worst_here, std::abs(outcomes.none_click(full) - oracle::q_all_noclick(photons, tree)));
        for (std::size_t c = 0; c < channels; ++c) {
          worst_here = std::max(worst_here,
                                std::abs(outcomes.none_click(ChannelMask{1} << c) -
                                         oracle::q_single_noclick(photons, tree, c)));
        }
      }
    }
    std::printf("channels %zu: max deviation %.3e over %d trees\n", channels, worst_here, trees);
    worst = std::max(worst, worst_here);
  }

  if (worst > tolerance) {
    std::printf("FAIL: max deviation %.3e exceeds tolerance %.1e\n", worst, tolerance);
    return kExitFailure;
  }
  std::printf("OK: max deviation %.3e within tolerance %.1e\n", worst, tolerance);
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detector-tree click statistics: simulation, estimation, oracles"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunConfig config;
  try {
    if (const auto config_path = find_config_flag(argc, argv)) {
      config = load_config_file(*config_path);
    }
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitFailure;
  }
  std::string config_path_unused;

  // --- simulate ---
  CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo source model");
  simulate->add_option("--config,-c", config_path_unused, "JSON config file");
  add_model_flags(simulate, config);
  add_run_flags(simulate, config);
  std::string sim_output;
  std::string sim_stream;
  std::string sim_stream_format = "text";
  simulate->add_option("--output,-o", sim_output, "Counts JSON output path")->required();
  simulate->add_option("--stream", sim_stream, "Also emit a time-tag stream to this path");
  simulate->add_option("--stream-format", sim_stream_format, "text or binary")
      ->check(CLI::IsMember({"text", "binary"}));

  // --- analyze ---
  CLI::App* analyze = app.add_subcommand("analyze", "Estimate theta/g and classify");
  analyze->add_option("--config,-c", config_path_unused, "JSON config file");
  add_estimator_flags(analyze, config);
  std::string analyze_input;
  std::string analyze_output;
  bool analyze_calibrate = false;
  analyze->add_option("input", analyze_input, "Counts, stream, or estimates file")->required();
  analyze->add_option("--output,-o", analyze_output, "Report JSON output path");
  analyze->add_flag("--calibrate-t0", analyze_calibrate,
                    "Scan window phase before ingesting a stream");

  // --- sweep ---
  CLI::App* sweep = app.add_subcommand("sweep", "Closed form vs simulation along an axis");
  sweep->add_option("--config,-c", config_path_unused, "JSON config file");
  add_model_flags(sweep, config);
  add_run_flags(sweep, config);
  add_estimator_flags(sweep, config);
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::string sweep_output;
  sweep->add_option("--axis", sweep_axis, "noise, emitters, or xi")->required();
  sweep->add_option("--values", sweep_values, "Axis values")->required()->delimiter(',');
  sweep->add_option("--output,-o", sweep_output, "CSV output path")->required();

  // --- oracle-check ---
  CLI::App* oracle_check =
      app.add_subcommand("oracle-check", "Validate formulas against exact enumeration");
  int oc_max_photons = 6;
  std::size_t oc_max_channels = 4;
  int oc_trees = 50;
  std::uint64_t oc_seed = 1;
  double oc_tolerance = 1e-12;
  bool oc_broken = false;
  oracle_check->add_option("--max-photons", oc_max_photons, "Largest photon number checked");
  oracle_check->add_option("--max-channels", oc_max_channels, "Largest tree width checked");
  oracle_check->add_option("--trees", oc_trees, "Random trees per channel count");
  oracle_check->add_option("--seed", oc_seed, "Seed for the random trees");
  oracle_check->add_option("--tolerance", oc_tolerance, "Maximum allowed deviation");
  oracle_check->add_flag("--broken-exponent", oc_broken,
                         "Use the exponent-free variant (demonstrates its failure)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(config, sim_output, sim_stream, sim_stream_format);
    }
    if (analyze->parsed()) {
      return run_analyze(config, analyze_input, analyze_output, analyze_calibrate);
    }
    if (sweep->parsed()) {
      return run_sweep(config, sweep_axis, sweep_values, sweep_output);
    }
    if (oracle_check->parsed()) {
      return run_oracle_check(oc_max_photons, oc_max_channels, oc_trees, oc_seed, oc_tolerance,
                              oc_broken);
    }
  } catch (const CLI::ValidationError& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
