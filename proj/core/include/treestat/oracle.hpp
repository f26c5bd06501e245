#pragma once

#include <cstddef>
#include <vector>

#include "treestat/types.hpp"

namespace treestat::oracle {

/// Largest photon number enumerate_outcomes accepts by default; the outcome
/// expansion is exponential in the number of compositions.
inline constexpr int kDefaultEnumerationLimit = 12;

/// One way of distributing n photons over the tree arms, with its exact
/// multinomial probability.
struct OccupancySplit {
  std::vector<int> occupancy;
  double probability = 0.0;
};

/// All compositions of `photons` over the arms of `tree` with multinomial
/// probabilities n!/(k_1!..k_N!) * prod w_i^{k_i}.  Probabilities sum to 1.
std::vector<OccupancySplit> multinomial_split_probs(int photons, const DetectorTree& tree);

/// Probability that a given channel stays silent when exactly `photons`
/// photons enter the tree: (1 - w_c xi_c)^n.
double q_single_noclick(int photons, const DetectorTree& tree, std::size_t channel);

/// Probability that every channel stays silent: (1 - sum_i w_i xi_i)^n.
double q_all_noclick(int photons, const DetectorTree& tree);

/// Probability that every channel of `subset` clicks when exactly `photons`
/// photons enter the tree, by inclusion-exclusion:
///   sum_{T subseteq S} (-1)^{|T|} (1 - sum_{i in T} w_i xi_i)^n.
double q_kfold_click(int photons, const DetectorTree& tree, ChannelMask subset);

/// Deliberately wrong variant that drops the photon-number exponent from the
/// inclusion-exclusion terms.  Kept as a diagnostic: it collapses to 0 for
/// |subset| >= 2 and to the arm transmission for singles, so comparing it
/// against enumerate_outcomes demonstrates why the exponent is required.
double q_kfold_click_no_exponent(int photons, const DetectorTree& tree, ChannelMask subset);

/// Exact distribution over the 2^N click patterns for a fixed photon number,
/// built by brute-force enumeration of occupancy splits.
struct OutcomeDistribution {
  std::size_t channel_count = 0;
  std::vector<double> prob;  ///< indexed by click-pattern ChannelMask

  /// Marginal probability that all channels of `mask` click.
  [[nodiscard]] double all_click(ChannelMask mask) const;

  /// Marginal probability that no channel of `mask` clicks.
  [[nodiscard]] double none_click(ChannelMask mask) const;

  /// Throws std::logic_error unless probabilities are in range and sum to 1.
  void validate(double tolerance = 1e-9) const;
};

/// Enumerates every click pattern exactly; throws std::invalid_argument when
/// `photons` exceeds `limit`.
OutcomeDistribution enumerate_outcomes(int photons, const DetectorTree& tree,
                                       int limit = kDefaultEnumerationLimit);

}  // namespace treestat::oracle
