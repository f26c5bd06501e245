#pragma once

#include <cstdint>
#include <vector>

namespace treestat {

/// Counter-seeded pseudo-random stream (splitmix64 core).
///
/// Every (seed, stream) pair opens its own deterministic sequence, so a
/// simulation can dedicate one stream per pulse and produce bit-identical
/// results regardless of how pulses are split across threads or blocks.
/// Satisfies UniformRandomBitGenerator.
class PulseRng {
 public:
  using result_type = std::uint64_t;

  PulseRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit();

  /// Exact Bernoulli draw: next_unit() < p.
  bool bernoulli(double p);

  /// Uniform integer in [0, bound); bound = 0 returns 0.  Uses rejection
  /// sampling, so the result is exactly uniform.
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

/// Exact Binomial(trials, p) sample via a chain of Bernoulli draws.  Always
/// consumes exactly `trials` uniforms, which keeps draw alignment stable
/// across parameter changes (common-random-number comparisons).
int sample_binomial(PulseRng& rng, int trials, double p);

/// Exact Poisson(mean) sample via Knuth's product-of-uniforms method, with
/// chunking for large means to avoid underflow of exp(-mean).
int sample_poisson(PulseRng& rng, double mean);

/// Samples an index from a normalized weight vector by inverse CDF.
std::size_t sample_channel(PulseRng& rng, const std::vector<double>& weights);

}  // namespace treestat
