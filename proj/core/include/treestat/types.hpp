#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace treestat {

/// Hard cap on detector channels; masks are stored in 32-bit integers and
/// per-subset tables have 2^N entries, so the cap keeps those tables small.
inline constexpr std::size_t kMaxChannels = 16;

/// Default relative tail mass discarded when truncating a photon-number
/// distribution with unbounded support.
inline constexpr double kDefaultTailCutoff = 1e-12;

/// Numerical slack allowed before an out-of-range probability is treated as
/// a formula-misuse error rather than harmless rounding.
inline constexpr double kProbabilitySlack = 1e-12;

/// Thrown when a theta or g value is requested in a regime where its
/// defining ratio degenerates (a denominator probability is zero).
class UndefinedEstimator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a computed probability leaves [0,1] by more than
/// kProbabilitySlack, which signals misuse of a formula rather than rounding.
class ProbabilityRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clamps p into [0,1] when it is within kProbabilitySlack of the interval;
/// throws ProbabilityRangeError otherwise.
double clamp_probability(double p);

/// Set of detector channels encoded as a bitmask: bit i set means channel i
/// is in the set.  Channel indices are 0-based everywhere.
using ChannelMask = std::uint32_t;

/// Mask selecting the first `channels` channels.
ChannelMask full_mask(std::size_t channels);

/// Ascending list of channel indices contained in `mask`.
std::vector<std::size_t> channels_of(ChannelMask mask);

/// Inverse of channels_of.
ChannelMask mask_of(const std::vector<std::size_t>& channels);

/// Ensemble of M identical single-photon emitters excited once per pulse.
/// Each emitter contributes at most one photon; `efficiency` is the
/// probability that this photon reaches the detection tree.  A non-empty
/// `per_emitter` vector overrides the uniform efficiency with one value per
/// emitter (the photon number then follows a Poisson-binomial law).
struct EmitterEnsemble {
  std::size_t emitters = 0;
  double efficiency = 0.0;
  std::vector<double> per_emitter;

  [[nodiscard]] bool uniform() const noexcept { return per_emitter.empty(); }

  /// Efficiency of emitter `alpha`, honouring the per-emitter override.
  [[nodiscard]] double efficiency_of(std::size_t alpha) const;

  void validate() const;
};

/// Poissonian background (uncorrelated stray light / dark counts referred to
/// the tree input), parameterized by its mean photon number per pulse.
struct NoiseModel {
  double mean_photons = 0.0;

  void validate() const;
};

/// Passive splitting network routing each incoming photon to channel i with
/// probability weights[i], followed by a non-photon-number-resolving
/// detector of efficiency xi[i] on each output arm.
struct DetectorTree {
  std::vector<double> xi;
  std::vector<double> weights;

  /// Balanced N-arm tree: weights 1/N, all channel efficiencies equal.
  static DetectorTree balanced(std::size_t channels, double channel_efficiency);

  [[nodiscard]] std::size_t channels() const noexcept { return xi.size(); }
  [[nodiscard]] bool is_balanced() const noexcept;

  /// w_i * xi_i: probability that a photon entering the tree produces a
  /// click on channel i.
  [[nodiscard]] double arm_transmission(std::size_t channel) const;

  /// Sum of arm transmissions over the channels in `mask`.
  [[nodiscard]] double subset_transmission(ChannelMask mask) const;

  void validate() const;
};

/// Photon-number distribution truncated to a finite support [0, nmax], with
/// the discarded upper-tail mass tracked explicitly so downstream
/// expectations can bound their truncation error.
struct PhotonNumberDistribution {
  std::vector<double> probs;
  double tail_bound = 0.0;

  [[nodiscard]] std::size_t nmax() const noexcept {
    return probs.empty() ? 0 : probs.size() - 1;
  }

  void validate(double tolerance = 1e-9) const;
};

/// Per-pulse coincidence tallies for every channel subset.
///
/// counts[mask] is the number of pulses in which *all* channels of `mask`
/// clicked (further clicks allowed), so counts for a subset dominate counts
/// for any superset.  counts[0] is kept equal to n_trials: the empty
/// coincidence is vacuously true on every pulse, which makes the
/// inclusion-exclusion identities used by the estimator uniform.
struct CountSummary {
  std::uint64_t n_trials = 0;
  std::size_t channel_count = 0;
  std::vector<std::uint64_t> counts;

  void init(std::size_t channels, std::uint64_t trials);

  [[nodiscard]] std::uint64_t at(ChannelMask mask) const;

  /// Tallies one pulse whose set of clicking channels is `pattern`.
  void record_pattern(ChannelMask pattern);

  /// Adds another summary over the same channel layout (tallies and trials).
  void merge(const CountSummary& other);

  /// Checks monotonicity (superset counts never exceed subset counts) and
  /// basic bounds; throws std::invalid_argument on violation.
  void validate() const;

  bool operator==(const CountSummary&) const = default;
};

}  // namespace treestat
