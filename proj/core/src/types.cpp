#include "treestat/types.hpp"

#include <cmath>
#include <sstream>

namespace treestat {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

double clamp_probability(double p) {
  if (std::isnan(p) || p < -kProbabilitySlack || p > 1.0 + kProbabilitySlack) {
    std::ostringstream msg;
    msg << "probability " << p << " out of [0,1] beyond slack " << kProbabilitySlack;
    throw ProbabilityRangeError(msg.str());
  }
  if (p < 0.0) return 0.0;
  if (p > 1.0) return 1.0;
  return p;
}

ChannelMask full_mask(std::size_t channels) {
  require(channels <= kMaxChannels, "channel count exceeds kMaxChannels");
  return channels == 0 ? 0u : static_cast<ChannelMask>((1u << channels) - 1u);
}

std::vector<std::size_t> channels_of(ChannelMask mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kMaxChannels; ++i) {
    if (mask & (ChannelMask{1} << i)) out.push_back(i);
  }
  return out;
}

ChannelMask mask_of(const std::vector<std::size_t>& channels) {
  ChannelMask mask = 0;
  for (std::size_t c : channels) {
    require(c < kMaxChannels, "channel index exceeds kMaxChannels");
    mask |= ChannelMask{1} << c;
  }
  return mask;
}

double EmitterEnsemble::efficiency_of(std::size_t alpha) const {
  require(alpha < emitters, "emitter index out of range");
  return uniform() ? efficiency : per_emitter[alpha];
}

void EmitterEnsemble::validate() const {
  if (uniform()) {
    require(in_unit_interval(efficiency), "emitter efficiency must lie in [0,1]");
  } else {
    require(per_emitter.size() == emitters,
            "per-emitter efficiency list must match the emitter count");
    for (double eta : per_emitter) {
      require(in_unit_interval(eta), "per-emitter efficiency must lie in [0,1]");
    }
  }
}

void NoiseModel::validate() const {
  require(std::isfinite(mean_photons) && mean_photons >= 0.0,
          "noise mean photon number must be finite and >= 0");
}

DetectorTree DetectorTree::balanced(std::size_t channels, double channel_efficiency) {
  require(channels >= 1 && channels <= kMaxChannels, "channel count out of range");
  require(in_unit_interval(channel_efficiency), "channel efficiency must lie in [0,1]");
  DetectorTree tree;
  tree.xi.assign(channels, channel_efficiency);
  tree.weights.assign(channels, 1.0 / static_cast<double>(channels));
  return tree;
}

bool DetectorTree::is_balanced() const noexcept {
  if (xi.empty()) return false;
  const double w = 1.0 / static_cast<double>(weights.size());
  for (double wi : weights) {
    if (std::abs(wi - w) > 1e-12) return false;
  }
  for (double x : xi) {
    if (std::abs(x - xi.front()) > 1e-12) return false;
  }
  return true;
}

double DetectorTree::arm_transmission(std::size_t channel) const {
  require(channel < channels(), "channel index out of range");
  return weights[channel] * xi[channel];
}

double DetectorTree::subset_transmission(ChannelMask mask) const {
  require((mask >> channels()) == 0u, "subset mask references unknown channels");
  double sum = 0.0;
  for (std::size_t i = 0; i < channels(); ++i) {
    if (mask & (ChannelMask{1} << i)) sum += weights[i] * xi[i];
  }
  return sum;
}

void DetectorTree::validate() const {
  require(!xi.empty(), "detector tree needs at least one channel");
  require(xi.size() <= kMaxChannels, "channel count exceeds kMaxChannels");
  require(weights.size() == xi.size(), "weights and xi must have equal length");
  double total = 0.0;
  for (double x : xi) require(in_unit_interval(x), "channel efficiency must lie in [0,1]");
  for (double w : weights) {
    require(w >= 0.0 && w <= 1.0, "splitting weight must lie in [0,1]");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, "splitting weights must sum to 1");
}

void PhotonNumberDistribution::validate(double tolerance) const {
  require(!probs.empty(), "photon-number distribution must not be empty");
  require(tail_bound >= 0.0 && tail_bound <= 1.0 + tolerance, "tail bound out of range");
  double total = 0.0;
  for (double p : probs) {
    require(p >= -tolerance && p <= 1.0 + tolerance,
            "photon-number probability out of range");
    total += p;
  }
  require(std::abs(total + tail_bound - 1.0) <= tolerance,
          "photon-number probabilities plus tail must sum to 1");
}

void CountSummary::init(std::size_t channels, std::uint64_t trials) {
  if (channels > kMaxChannels) throw std::invalid_argument("channel count exceeds kMaxChannels");
  channel_count = channels;
  n_trials = trials;
  counts.assign(std::size_t{1} << channels, 0);
  counts[0] = trials;
}

std::uint64_t CountSummary::at(ChannelMask mask) const {
  if (mask >= counts.size()) throw std::invalid_argument("mask references unknown channels");
  return counts[mask];
}

void CountSummary::record_pattern(ChannelMask pattern) {
  if (pattern >= counts.size()) throw std::invalid_argument("pattern references unknown channels");
  for (ChannelMask m = pattern; m != 0; m = (m - 1) & pattern) ++counts[m];
}

void CountSummary::merge(const CountSummary& other) {
  if (other.channel_count != channel_count) {
    throw std::invalid_argument("cannot merge summaries over different channel layouts");
  }
  n_trials += other.n_trials;
  for (std::size_t m = 0; m < counts.size(); ++m) counts[m] += other.counts[m];
}

void CountSummary::validate() const {
  require(channel_count <= kMaxChannels, "channel count exceeds kMaxChannels");
  require(counts.size() == (std::size_t{1} << channel_count),
          "counts table size does not match the channel count");
  require(counts[0] == n_trials, "counts[0] must equal n_trials");
  for (std::size_t m = 1; m < counts.size(); ++m) {
    const auto mask = static_cast<ChannelMask>(m);
    const ChannelMask low = mask & (~mask + 1u);
    require(counts[m] <= counts[m & ~low], "coincidence count exceeds a subset count");
    require(counts[m] <= counts[low], "coincidence count exceeds a single-channel count");
  }
}

}  // namespace treestat
