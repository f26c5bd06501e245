#include "treestat/oracle.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace treestat::oracle {

namespace {

void check(int photons, const DetectorTree& tree) {
  if (photons < 0) throw std::invalid_argument("photon number must be >= 0");
  tree.validate();
}

// n! / (k_1! .. k_N!) * prod w_i^{k_i}, built factor by factor to stay well
// inside double range for the photon numbers the oracle is meant for.
void extend_splits(const DetectorTree& tree, std::vector<int>& occupancy,
                   std::size_t channel, int remaining, double probability,
                   double multiplicity, std::vector<OccupancySplit>& out) {
  if (channel + 1 == tree.channels()) {
    occupancy[channel] = remaining;
    double prob = probability * multiplicity * std::pow(tree.weights[channel], remaining);
    for (int j = 2; j <= remaining; ++j) prob /= static_cast<double>(j);
    out.push_back({occupancy, prob});
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    occupancy[channel] = k;
    double prob = probability * std::pow(tree.weights[channel], k);
    for (int j = 2; j <= k; ++j) prob /= static_cast<double>(j);
    extend_splits(tree, occupancy, channel + 1, remaining - k, prob, multiplicity, out);
  }
}

}  // namespace

std::vector<OccupancySplit> multinomial_split_probs(int photons, const DetectorTree& tree) {
  check(photons, tree);
  double multiplicity = 1.0;  // n!
  for (int j = 2; j <= photons; ++j) multiplicity *= static_cast<double>(j);
  std::vector<OccupancySplit> out;
  std::vector<int> occupancy(tree.channels(), 0);
  extend_splits(tree, occupancy, 0, photons, 1.0, multiplicity, out);
  return out;
}

double q_single_noclick(int photons, const DetectorTree& tree, std::size_t channel) {
  check(photons, tree);
  return std::pow(1.0 - tree.arm_transmission(channel), photons);
}

double q_all_noclick(int photons, const DetectorTree& tree) {
  check(photons, tree);
  return std::pow(1.0 - tree.subset_transmission(full_mask(tree.channels())), photons);
}

double q_kfold_click(int photons, const DetectorTree& tree, ChannelMask subset) {
  check(photons, tree);
  if (subset == 0) return 1.0;
  double sum = 0.0;
  ChannelMask t = subset;
  while (true) {
    const double sign = std::popcount(t) % 2 == 0 ? 1.0 : -1.0;
    sum += sign * std::pow(1.0 - tree.subset_transmission(t), photons);
    if (t == 0) break;
    t = (t - 1) & subset;
  }
  return clamp_probability(sum);
}

double q_kfold_click_no_exponent(int photons, const DetectorTree& tree, ChannelMask subset) {
  check(photons, tree);
  if (subset == 0) return 1.0;
  double sum = 0.0;
  ChannelMask t = subset;
  while (true) {
    const double sign = std::popcount(t) % 2 == 0 ? 1.0 : -1.0;
    sum += sign * (1.0 - tree.subset_transmission(t));
    if (t == 0) break;
    t = (t - 1) & subset;
  }
  return sum;  // not clamped: the broken formula may leave [0,1]
}

double OutcomeDistribution::all_click(ChannelMask mask) const {
  double total = 0.0;
  for (std::size_t pattern = 0; pattern < prob.size(); ++pattern) {
    if ((static_cast<ChannelMask>(pattern) & mask) == mask) total += prob[pattern];
  }
  return total;
}

double OutcomeDistribution::none_click(ChannelMask mask) const {
  double total = 0.0;
  for (std::size_t pattern = 0; pattern < prob.size(); ++pattern) {
    if ((static_cast<ChannelMask>(pattern) & mask) == 0) total += prob[pattern];
  }
  return total;
}

void OutcomeDistribution::validate(double tolerance) const {
  if (prob.size() != (std::size_t{1} << channel_count)) {
    throw std::logic_error("outcome table size does not match the channel count");
  }
  double total = 0.0;
  for (double p : prob) {
    if (p < -tolerance || p > 1.0 + tolerance) {
      throw std::logic_error("outcome probability out of range");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tolerance) {
    throw std::logic_error("outcome probabilities must sum to 1");
  }
}

OutcomeDistribution enumerate_outcomes(int photons, const DetectorTree& tree, int limit) {
  check(photons, tree);
  if (photons > limit) {
    throw std::invalid_argument("photon number exceeds the enumeration limit");
  }

  const std::size_t n_channels = tree.channels();
  OutcomeDistribution out{n_channels, std::vector<double>(std::size_t{1} << n_channels, 0.0)};
  std::vector<double> pattern(out.prob.size(), 0.0);

  for (const OccupancySplit& split : multinomial_split_probs(photons, tree)) {
    pattern.assign(pattern.size(), 0.0);
    pattern[0] = split.probability;
    // Fold in each channel: with k_i photons on arm i the detector clicks
    // with probability 1 - (1 - xi_i)^{k_i}.
    for (std::size_t i = 0; i < n_channels; ++i) {
      const double click = 1.0 - std::pow(1.0 - tree.xi[i], split.occupancy[i]);
      const ChannelMask bit = ChannelMask{1} << i;
      for (ChannelMask m = bit; m-- > 0;) {
        pattern[m | bit] = pattern[m] * click;
        pattern[m] *= 1.0 - click;
      }
    }
    for (std::size_t m = 0; m < pattern.size(); ++m) out.prob[m] += pattern[m];
  }
  out.validate();
  return out;
}

}  // namespace treestat::oracle
