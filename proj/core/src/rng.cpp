#include "treestat/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace treestat {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer; full-avalanche mixing of a 64-bit word.
constexpr std::uint64_t avalanche(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Largest mean handled in one Knuth round; exp(-500) is still normal.
constexpr double kPoissonChunk = 500.0;

}  // namespace

PulseRng::PulseRng(std::uint64_t seed, std::uint64_t stream)
    : state_(avalanche(seed ^ avalanche(stream + kGolden))) {}

std::uint64_t PulseRng::next_u64() {
  state_ += kGolden;
  return avalanche(state_);
}

double PulseRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool PulseRng::bernoulli(double p) { return next_unit() < p; }

std::uint64_t PulseRng::uniform_below(std::uint64_t bound) {
  if (bound == 0) return 0;
  const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
  while (true) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

int sample_binomial(PulseRng& rng, int trials, double p) {
  if (trials < 0) throw std::invalid_argument("binomial trials must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial p must lie in [0,1]");
  int successes = 0;
  for (int t = 0; t < trials; ++t) {
    if (rng.next_unit() < p) ++successes;
  }
  return successes;
}

int sample_poisson(PulseRng& rng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("poisson mean must be finite and >= 0");
  }
  int total = 0;
  while (mean > kPoissonChunk) {
    total += sample_poisson(rng, kPoissonChunk);
    mean -= kPoissonChunk;
  }
  if (mean == 0.0) return total;
  const double limit = std::exp(-mean);
  double product = 1.0;
  int k = -1;
  do {
    product *= rng.next_unit();
    ++k;
  } while (product > limit);
  return total + k;
}

std::size_t sample_channel(PulseRng& rng, const std::vector<double>& weights) {
  if (weights.empty()) throw std::invalid_argument("weight vector must not be empty");
  const double u = rng.next_unit();
  double cumulative = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative) return i;
  }
  return weights.size() - 1;
}

}  // namespace treestat
