#include "treestat/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "treestat/rng.hpp"

namespace treestat::mc {

namespace {

// Each pulse owns three independent RNG substreams.  Keeping signal, noise
// and time-jitter draws apart means a change in one ingredient (say the
// background rate) leaves the draws of the others untouched, so runs with a
// shared seed stay comparable photon by photon, and emitting time tags
// cannot alter the click patterns.
enum Substream : std::uint64_t { kSignal = 0, kNoise = 1, kJitter = 2 };

PulseRng pulse_rng(const SimulationConfig& config, std::uint64_t pulse, Substream substream) {
  return PulseRng(config.seed, pulse * 3 + substream);
}

// Routes one photon through the tree; returns the channel it clicked, or
// npos if it was lost.
std::size_t detect_photon(PulseRng& rng, const DetectorTree& tree) {
  const std::size_t channel = sample_channel(rng, tree.weights);
  if (rng.bernoulli(tree.xi[channel])) return channel;
  return std::string::npos;
}

ChannelMask sample_pattern(const SimulationConfig& config, std::uint64_t pulse,
                           std::vector<std::uint32_t>* detected) {
  const EmitterEnsemble& ensemble = config.ensemble;
  ChannelMask pattern = 0;

  PulseRng signal_rng = pulse_rng(config, pulse, kSignal);
  int signal_photons = 0;
  if (ensemble.uniform()) {
    signal_photons = sample_binomial(signal_rng, static_cast<int>(ensemble.emitters),
                                     ensemble.efficiency);
  } else {
    for (std::size_t alpha = 0; alpha < ensemble.emitters; ++alpha) {
      if (signal_rng.bernoulli(ensemble.per_emitter[alpha])) ++signal_photons;
    }
  }
  for (int p = 0; p < signal_photons; ++p) {
    const std::size_t channel = detect_photon(signal_rng, config.tree);
    if (channel == std::string::npos) continue;
    pattern |= ChannelMask{1} << channel;
    if (detected) detected->push_back(static_cast<std::uint32_t>(channel));
  }

  PulseRng noise_rng = pulse_rng(config, pulse, kNoise);
  const int noise_photons = sample_poisson(noise_rng, config.noise.mean_photons);
  for (int p = 0; p < noise_photons; ++p) {
    const std::size_t channel = detect_photon(noise_rng, config.tree);
    if (channel == std::string::npos) continue;
    pattern |= ChannelMask{1} << channel;
    if (detected) detected->push_back(static_cast<std::uint32_t>(channel));
  }
  return pattern;
}

unsigned effective_threads(const SimulationConfig& config) {
  unsigned threads = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  const std::uint64_t pulses = std::max<std::uint64_t>(config.n_pulses, 1);
  return static_cast<unsigned>(std::min<std::uint64_t>(threads, pulses));
}

struct BlockResult {
  CountSummary counts;
  std::vector<timetags::TimeTagEvent> events;
};

void run_block(const SimulationConfig& config, std::uint64_t first, std::uint64_t last,
               bool collect_events, BlockResult& out) {
  out.counts.init(config.tree.channels(), last - first);
  const std::uint64_t period = config.period_ps();
  const std::uint64_t window = config.window_ps();

  std::vector<std::uint32_t> detected;
  std::vector<timetags::TimeTagEvent> pulse_events;
  for (std::uint64_t pulse = first; pulse < last; ++pulse) {
    detected.clear();
    const ChannelMask pattern =
        sample_pattern(config, pulse, collect_events ? &detected : nullptr);
    out.counts.record_pattern(pattern);
    if (!collect_events || detected.empty()) continue;

    PulseRng jitter_rng = pulse_rng(config, pulse, kJitter);
    pulse_events.clear();
    for (std::uint32_t channel : detected) {
      const std::uint64_t t = pulse * period + jitter_rng.uniform_below(window);
      pulse_events.push_back({channel, t});
    }
    std::sort(pulse_events.begin(), pulse_events.end(),
              [](const timetags::TimeTagEvent& a, const timetags::TimeTagEvent& b) {
                return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
              });
    out.events.insert(out.events.end(), pulse_events.begin(), pulse_events.end());
  }
}

std::vector<BlockResult> run_blocks(const SimulationConfig& config, bool collect_events) {
  config.validate();
  const unsigned threads = effective_threads(config);
  const std::uint64_t pulses = config.n_pulses;
  const std::uint64_t block = (pulses + threads - 1) / threads;

  std::vector<BlockResult> results(threads);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t first = std::min<std::uint64_t>(static_cast<std::uint64_t>(t) * block, pulses);
    const std::uint64_t last = std::min<std::uint64_t>(first + block, pulses);
    workers.emplace_back(run_block, std::cref(config), first, last, collect_events,
                         std::ref(results[t]));
  }
  for (std::thread& worker : workers) worker.join();
  return results;
}

CountSummary merge_counts(const SimulationConfig& config, std::vector<BlockResult>& blocks) {
  CountSummary total;
  total.init(config.tree.channels(), 0);
  for (BlockResult& block : blocks) total.merge(block.counts);
  return total;
}

}  // namespace

std::uint64_t SimulationConfig::period_ps() const {
  return static_cast<std::uint64_t>(std::llround(1e12 / rep_rate_hz));
}

std::uint64_t SimulationConfig::window_ps() const {
  return static_cast<std::uint64_t>(std::llround(window_ns * 1e3));
}

void SimulationConfig::validate() const {
  ensemble.validate();
  noise.validate();
  tree.validate();
  if (!(rep_rate_hz > 0.0) || !std::isfinite(rep_rate_hz)) {
    throw std::invalid_argument("repetition rate must be finite and > 0");
  }
  if (!(window_ns > 0.0) || !std::isfinite(window_ns)) {
    throw std::invalid_argument("window length must be finite and > 0");
  }
  if (window_ps() == 0 || window_ps() > period_ps()) {
    throw std::invalid_argument("window must be nonzero and fit inside the pulse period");
  }
}

CountSummary simulate(const SimulationConfig& config) {
  std::vector<BlockResult> blocks = run_blocks(config, /*collect_events=*/false);
  return merge_counts(config, blocks);
}

StreamResult simulate_stream(const SimulationConfig& config) {
  if (!config.emit_stream) {
    throw std::invalid_argument("simulate_stream requires config.emit_stream");
  }
  std::vector<BlockResult> blocks = run_blocks(config, /*collect_events=*/true);

  StreamResult result;
  result.counts = merge_counts(config, blocks);
  result.stream.header.rep_rate_hz = config.rep_rate_hz;
  result.stream.header.t0_ps = 0;
  result.stream.header.window_ns = config.window_ns;
  result.stream.header.channels = static_cast<std::uint32_t>(config.tree.channels());
  result.stream.header.pulses = config.n_pulses;
  result.stream.header.source = "mc-simulator seed=" + std::to_string(config.seed);

  std::size_t total_events = 0;
  for (const BlockResult& block : blocks) total_events += block.events.size();
  result.stream.events.reserve(total_events);
  for (const BlockResult& block : blocks) {
    result.stream.events.insert(result.stream.events.end(), block.events.begin(),
                                block.events.end());
  }
  return result;
}

}  // namespace treestat::mc
