#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "treestat/rng.hpp"

using namespace treestat;

TEST_SUITE_BEGIN("rng");

TEST_CASE("identical (seed, stream) pairs replay identical sequences") {
  PulseRng a(42, 7);
  PulseRng b(42, 7);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());

  PulseRng c(42, 8);
  PulseRng d(43, 7);
  int equal_c = 0;
  int equal_d = 0;
  PulseRng reference(42, 7);
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t r = reference.next_u64();
    equal_c += r == c.next_u64();
    equal_d += r == d.next_u64();
  }
  CHECK(equal_c == 0);
  CHECK(equal_d == 0);
}

TEST_CASE("next_unit lies in [0,1) and fills the interval") {
  PulseRng rng(1, 0);
  double sum = 0.0;
  double low = 1.0;
  double high = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    low = std::min(low, u);
    high = std::max(high, u);
  }
  // mean 1/2, sd 1/sqrt(12n); 5 sigma band.
  CHECK(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
  CHECK(low < 0.001);
  CHECK(high > 0.999);
}

TEST_CASE("uniform_below respects its bound and is uniform") {
  PulseRng rng(9, 2);
  CHECK(rng.uniform_below(0) == 0);
  CHECK(rng.uniform_below(1) == 0);
  const std::uint64_t bound = 13;
  std::vector<int> hits(bound, 0);
  const int n = 130000;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t v = rng.uniform_below(bound);
    REQUIRE(v < bound);
    ++hits[static_cast<std::size_t>(v)];
  }
  const double expected = static_cast<double>(n) / static_cast<double>(bound);
  const double sigma = std::sqrt(expected * (1.0 - 1.0 / static_cast<double>(bound)));
  for (int h : hits) CHECK(std::abs(h - expected) < 5.0 * sigma);
}

TEST_CASE("binomial sampler reproduces the exact pmf") {
  PulseRng rng(123, 0);
  const int trials = 4;
  const double p = 0.5;
  const int n = 160000;
  std::vector<int> hits(trials + 1, 0);
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(sample_binomial(rng, trials, p))];

  const double pmf[5] = {0.0625, 0.25, 0.375, 0.25, 0.0625};
  for (int k = 0; k <= trials; ++k) {
    const double expected = pmf[k] * n;
    const double sigma = std::sqrt(n * pmf[k] * (1.0 - pmf[k]));
    CHECK(std::abs(hits[static_cast<std::size_t>(k)] - expected) < 5.0 * sigma);
  }

  CHECK(sample_binomial(rng, 10, 0.0) == 0);
  CHECK(sample_binomial(rng, 10, 1.0) == 10);
  CHECK(sample_binomial(rng, 0, 0.5) == 0);
  CHECK_THROWS_AS(sample_binomial(rng, -1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(sample_binomial(rng, 1, 1.5), std::invalid_argument);
}

TEST_CASE("poisson sampler matches mean and variance") {
  PulseRng rng(55, 0);
  const double mean = 2.5;
  const int n = 100000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = sample_poisson(rng, mean);
    REQUIRE(k >= 0);
    sum += k;
    sum2 += static_cast<double>(k) * k;
  }
  const double sample_mean = sum / n;
  const double sample_var = sum2 / n - sample_mean * sample_mean;
  CHECK(std::abs(sample_mean - mean) < 5.0 * std::sqrt(mean / n));
  // Var of the variance estimate for Poisson ~ (mean + 2 mean^2)/n.
  CHECK(std::abs(sample_var - mean) < 5.0 * std::sqrt((mean + 2.0 * mean * mean) / n));

  CHECK(sample_poisson(rng, 0.0) == 0);
  CHECK_THROWS_AS(sample_poisson(rng, -1.0), std::invalid_argument);
}

TEST_CASE("poisson sampler survives large means via chunking") {
  PulseRng rng(56, 0);
  const double mean = 1200.0;
  const int n = 400;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_poisson(rng, mean);
  CHECK(std::abs(sum / n - mean) < 5.0 * std::sqrt(mean / n));
}

TEST_CASE("channel sampler follows the weight vector") {
  PulseRng rng(77, 0);
  const std::vector<double> weights{0.5, 0.3, 0.2};
  const int n = 100000;
  std::vector<int> hits(weights.size(), 0);
  for (int i = 0; i < n; ++i) ++hits[sample_channel(rng, weights)];
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double expected = weights[c] * n;
    const double sigma = std::sqrt(n * weights[c] * (1.0 - weights[c]));
    CHECK(std::abs(hits[c] - expected) < 5.0 * sigma);
  }
  CHECK_THROWS_AS(sample_channel(rng, {}), std::invalid_argument);
}

TEST_SUITE_END();
