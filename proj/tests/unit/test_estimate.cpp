#include <doctest.h>

#include <bit>
#include <cmath>
#include <vector>

#include "treestat/analytic.hpp"
#include "treestat/estimate.hpp"
#include "treestat/rng.hpp"
#include "treestat/simulate.hpp"

using namespace treestat;
using namespace treestat::estimator;

namespace {

CountSummary pair_counts(std::uint64_t n, std::uint64_t both, std::uint64_t first,
                         std::uint64_t second) {
  CountSummary counts;
  counts.init(2, n);
  counts.counts[0b01] = first;
  counts.counts[0b10] = second;
  counts.counts[0b11] = both;
  counts.validate();
  return counts;
}

// Probability table filled from the closed-form coincidence probabilities.
std::vector<double> analytic_probs(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                                   const DetectorTree& tree) {
  std::vector<double> probs(std::size_t{1} << tree.channels(), 1.0);
  for (ChannelMask mask = 1; mask < probs.size(); ++mask) {
    probs[mask] = analytic::pclick_subset(ensemble, noise, tree, mask);
  }
  return probs;
}

}  // namespace

TEST_SUITE_BEGIN("estimator");

TEST_CASE("probabilities normalize counts and pin the empty mask to 1") {
  const CountSummary counts = pair_counts(1000, 10, 100, 200);
  const std::vector<double> probs = probabilities(counts);
  CHECK(probs[0] == 1.0);
  CHECK(probs[0b01] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(probs[0b10] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(probs[0b11] == doctest::Approx(0.01).epsilon(1e-14));

  CountSummary empty;
  empty.init(2, 0);
  CHECK_THROWS_AS(probabilities(empty), std::invalid_argument);
}

TEST_CASE("subset cells recover exclusive patterns by moebius inversion") {
  const CountSummary counts = pair_counts(10, 2, 4, 3);
  const std::vector<std::uint64_t> cells = subset_cell_counts(counts, 0b11u);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0b00] == 5);  // neither clicked
  CHECK(cells[0b01] == 2);  // only channel 0
  CHECK(cells[0b10] == 1);  // only channel 1
  CHECK(cells[0b11] == 2);  // both

  // Restriction to one channel of a wider summary.
  const std::vector<std::uint64_t> single = subset_cell_counts(counts, 0b10u);
  REQUIRE(single.size() == 2);
  CHECK(single[0] == 7);
  CHECK(single[1] == 3);

  CountSummary broken = pair_counts(10, 2, 4, 3);
  broken.counts[0b11] = 0;
  broken.counts[0b01] = 9;
  broken.counts[0b10] = 9;  // 9 + 9 - 0 > 10: impossible jointly
  CHECK_THROWS_AS(subset_cell_counts(broken, 0b11u), std::invalid_argument);
}

TEST_CASE("theta point estimate matches the frozen example") {
  const CountSummary counts = pair_counts(1000000, 0, 100000, 100000);
  const Estimate theta = theta_k(counts, 0b11u);
  CHECK(theta.defined);
  CHECK(theta.value == doctest::Approx(0.9876543209876543).epsilon(1e-13));
  CHECK(theta.sigma > 0.0);

  const Estimate g = g_k(counts, 0b11u);
  CHECK(g.defined);
  CHECK(g.value == 0.0);
}

TEST_CASE("g point estimate matches the frozen example") {
  const CountSummary counts = pair_counts(1000000, 5000, 100000, 100000);
  const Estimate g = g_k(counts, 0b11u);
  CHECK(g.defined);
  CHECK(g.value == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("degenerate channels make the ratios undefined, not wrong") {
  // Channel 1 never clicks: g undefined, theta fine.
  const CountSummary silent = pair_counts(1000, 0, 200, 0);
  const Estimate g = g_k(silent, 0b11u);
  CHECK(!g.defined);
  CHECK(g.note.find("never clicked") != std::string::npos);
  CHECK(theta_k(silent, 0b11u).defined);

  // Channel 0 clicks on every trial: theta undefined.
  const CountSummary saturated = pair_counts(1000, 300, 1000, 300);
  const Estimate theta = theta_k(saturated, 0b11u);
  CHECK(!theta.defined);
  CHECK(g_k(saturated, 0b11u).defined);

  CHECK_THROWS_AS(theta_k(silent, 0b100u), std::invalid_argument);
  CHECK_THROWS_AS(theta_k(silent, 0u), std::invalid_argument);
}

TEST_CASE("estimator formulas reproduce the analytic ratios on exact tables") {
  PulseRng rng(31337, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t channels = 2 + static_cast<std::size_t>(rng.uniform_below(3));
    DetectorTree tree;
    double total = 0.0;
    for (std::size_t i = 0; i < channels; ++i) {
      tree.xi.push_back(0.1 + 0.9 * rng.next_unit());
      tree.weights.push_back(0.05 + 0.95 * rng.next_unit());
      total += tree.weights.back();
    }
    for (double& w : tree.weights) w /= total;
    const EmitterEnsemble ensemble{1 + static_cast<std::size_t>(rng.uniform_below(5)),
                                   0.05 + 0.9 * rng.next_unit(),
                                   {}};
    const NoiseModel noise{0.5 * rng.next_unit()};

    const std::vector<double> probs = analytic_probs(ensemble, noise, tree);
    const ChannelMask full = full_mask(channels);
    for (ChannelMask subset = 0b11; subset <= full; ++subset) {
      if (std::popcount(subset) < 2) continue;
      CHECK(theta_from_probs(probs, subset) ==
            doctest::Approx(analytic::theta_subset(ensemble, noise, tree, subset))
                .epsilon(1e-12));
      CHECK(g_from_probs(probs, subset) ==
            doctest::Approx(analytic::g_subset(ensemble, noise, tree, subset)).epsilon(1e-12));
    }
  }
}

TEST_CASE("theta flags arm imbalance that g barely sees") {
  const EmitterEnsemble ensemble{2, 0.5, {}};
  const NoiseModel noise{0.0};
  DetectorTree balanced;
  balanced.xi = {0.4, 0.4};
  balanced.weights = {0.5, 0.5};
  DetectorTree skewed;
  skewed.xi = {0.6, 0.2};
  skewed.weights = {0.5, 0.5};

  const double g_bal = analytic::g_order(ensemble, noise, balanced, 2);
  const double g_skew = analytic::g_order(ensemble, noise, skewed, 2);
  CHECK(std::abs(g_skew - g_bal) / g_bal < 1e-3);

  const double miss_bal = 1.0 - analytic::theta_order(ensemble, noise, balanced, 2);
  const double miss_skew = 1.0 - analytic::theta_order(ensemble, noise, skewed, 2);
  CHECK(std::abs(miss_skew - miss_bal) / miss_bal > 0.10);
}

TEST_CASE("bootstrap sigma is deterministic and tracks propagation") {
  mc::SimulationConfig config;
  config.ensemble = {3, 0.5, {}};
  config.noise = {0.01};
  config.tree = DetectorTree::balanced(2, 0.4);
  config.n_pulses = 100000;
  config.seed = 2718;
  const CountSummary counts = mc::simulate(config);

  Options bootstrap;
  bootstrap.method = UncertaintyMethod::bootstrap;
  Options propagation;
  propagation.method = UncertaintyMethod::propagation;

  for (bool use_theta : {true, false}) {
    const Estimate boot = use_theta ? theta_k(counts, 0b11u, bootstrap)
                                    : g_k(counts, 0b11u, bootstrap);
    const Estimate prop = use_theta ? theta_k(counts, 0b11u, propagation)
                                    : g_k(counts, 0b11u, propagation);
    REQUIRE(boot.defined);
    REQUIRE(prop.defined);
    CHECK(boot.value == prop.value);
    CHECK(prop.sigma > 0.0);
    // Two hundred bootstrap rounds estimate sigma to ~5 %; allow a wide band.
    CHECK(boot.sigma / prop.sigma > 0.6);
    CHECK(boot.sigma / prop.sigma < 1.6);

    const Estimate again = use_theta ? theta_k(counts, 0b11u, bootstrap)
                                     : g_k(counts, 0b11u, bootstrap);
    CHECK(again.sigma == boot.sigma);

    Options reseeded = bootstrap;
    reseeded.bootstrap_seed += 1;
    const Estimate other = use_theta ? theta_k(counts, 0b11u, reseeded)
                                     : g_k(counts, 0b11u, reseeded);
    CHECK(other.sigma != boot.sigma);
    CHECK(other.sigma / boot.sigma > 0.5);
    CHECK(other.sigma / boot.sigma < 2.0);
  }
}

TEST_CASE("repeated simulations show no estimator bias beyond 5 sigma") {
  mc::SimulationConfig config;
  config.ensemble = {3, 0.5, {}};
  config.noise = {0.02};
  config.tree = DetectorTree::balanced(2, 0.4);
  config.n_pulses = 20000;

  const double theta_true = analytic::theta_order(config.ensemble, config.noise, config.tree, 2);
  const double g_true = analytic::g_order(config.ensemble, config.noise, config.tree, 2);

  Options options;
  options.method = UncertaintyMethod::propagation;

  const int reps = 200;
  double theta_sum = 0.0;
  double theta_ss = 0.0;
  double g_sum = 0.0;
  double g_ss = 0.0;
  for (int r = 0; r < reps; ++r) {
    config.seed = 9000 + static_cast<std::uint64_t>(r);
    const CountSummary counts = mc::simulate(config);
    const double t = theta_k(counts, 0b11u, options).value;
    const double g = g_k(counts, 0b11u, options).value;
    theta_sum += t;
    theta_ss += t * t;
    g_sum += g;
    g_ss += g * g;
  }
  const double theta_mean = theta_sum / reps;
  const double theta_sem =
      std::sqrt((theta_ss / reps - theta_mean * theta_mean) / (reps - 1.0));
  CHECK(std::abs(theta_mean - theta_true) < 5.0 * theta_sem);

  const double g_mean = g_sum / reps;
  const double g_sem = std::sqrt((g_ss / reps - g_mean * g_mean) / (reps - 1.0));
  CHECK(std::abs(g_mean - g_true) < 5.0 * g_sem);
}

TEST_CASE("dark runs give theta exactly 1 and an inconclusive verdict") {
  CountSummary counts;
  counts.init(2, 50000);

  const Estimate theta = theta_k(counts, 0b11u);
  CHECK(theta.defined);
  CHECK(theta.value == 1.0);
  CHECK(theta.sigma == 0.0);
  CHECK(!g_k(counts, 0b11u).defined);

  const EstimateReport report = analyze(counts);
  CHECK(report.classification == Verdict::inconclusive);
  CHECK(!report.single_emitter_candidate);
  REQUIRE(report.orders.size() == 1);
  CHECK(report.orders[0].theta_aggregate.defined);
  CHECK(report.orders[0].theta_aggregate.mean == 1.0);
  CHECK(!report.orders[0].g_aggregate.defined);
}

TEST_CASE("independent channels give theta = g = 1 exactly") {
  const CountSummary counts = pair_counts(10000, 1000, 2000, 5000);
  const Estimate theta = theta_k(counts, 0b11u);
  const Estimate g = g_k(counts, 0b11u);
  CHECK(theta.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.value == doctest::Approx(1.0).epsilon(1e-14));

  const EstimateReport report = analyze(counts);
  CHECK(report.classification == Verdict::inconclusive);
}

TEST_CASE("analyze covers every combination of the requested orders") {
  mc::SimulationConfig config;
  config.ensemble = {3, 0.5, {}};
  config.noise = {0.01};
  config.tree = DetectorTree::balanced(4, 0.5);
  config.n_pulses = 100000;
  config.seed = 515151;
  const CountSummary counts = mc::simulate(config);

  Options options;
  options.method = UncertaintyMethod::propagation;
  const EstimateReport report = analyze(counts, options);

  REQUIRE(report.orders.size() == 3);
  CHECK(report.orders[0].order == 2);
  CHECK(report.orders[0].combinations.size() == 6);
  CHECK(report.orders[1].order == 3);
  CHECK(report.orders[1].combinations.size() == 4);
  CHECK(report.orders[2].order == 4);
  CHECK(report.orders[2].combinations.size() == 1);
  CHECK(report.n_trials == config.n_pulses);
  CHECK(report.channel_count == 4);
  CHECK(report.classification == report.orders[0].verdict);

  // The order-2 aggregate must sit on the closed form within its own error.
  const double truth = analytic::theta_order(config.ensemble, config.noise, config.tree, 2);
  const Aggregate& agg = report.orders[0].theta_aggregate;
  REQUIRE(agg.defined);
  CHECK(agg.used == 6);
  CHECK(std::abs(agg.mean - truth) < 5.0 * agg.sem);

  // Orders beyond the channel count are skipped silently.
  Options narrow;
  narrow.orders = {2, 9};
  const EstimateReport skipped = analyze(counts, narrow);
  REQUIRE(skipped.orders.size() == 1);
  CHECK(skipped.orders[0].order == 2);
}

TEST_CASE("aggregate_and_classify applies the decision rules") {
  SUBCASE("strongly antibunched g flags nonclassical single-emitter light") {
    Combination combo;
    combo.channels = 0b11u;
    combo.g = {0.407, 0.012, true, ""};
    combo.theta = {0.0, 0.0, false, "not provided"};
    const EstimateReport report = aggregate_and_classify({{2, {combo}}});
    CHECK(report.classification == Verdict::nonclassical);
    CHECK(report.single_emitter_candidate);
  }
  SUBCASE("moderate antibunching is nonclassical but not single-emitter") {
    Combination combo;
    combo.channels = 0b11u;
    combo.g = {0.832, 0.004, true, ""};
    combo.theta = {0.0, 0.0, false, "not provided"};
    const EstimateReport report = aggregate_and_classify({{2, {combo}}});
    CHECK(report.classification == Verdict::nonclassical);
    CHECK(!report.single_emitter_candidate);
  }
  SUBCASE("theta consistent with 1 stays inconclusive") {
    Combination combo;
    combo.channels = 0b11u;
    combo.theta = {1.0 + 4e-8, 2e-8, true, ""};
    combo.g = {0.0, 0.0, false, "not provided"};
    const EstimateReport report = aggregate_and_classify({{2, {combo}}});
    CHECK(report.classification == Verdict::inconclusive);
  }
  SUBCASE("bunched light classifies as classical") {
    Combination combo;
    combo.channels = 0b11u;
    combo.g = {1.30, 0.05, true, ""};
    combo.theta = {0.0, 0.0, false, "not provided"};
    const EstimateReport report = aggregate_and_classify({{2, {combo}}});
    CHECK(report.classification == Verdict::classical);
  }
  SUBCASE("empty input stays inconclusive") {
    const EstimateReport report = aggregate_and_classify({});
    CHECK(report.classification == Verdict::inconclusive);
    CHECK(report.orders.empty());
  }
  SUBCASE("k_sigma must be positive") {
    CHECK_THROWS_AS(aggregate_and_classify({}, 0.0), std::invalid_argument);
  }
}

TEST_CASE("aggregation uses the larger of scatter and propagated error") {
  Combination a;
  a.channels = 0b011u;
  a.theta = {0.90, 0.001, true, ""};
  Combination b;
  b.channels = 0b101u;
  b.theta = {0.94, 0.001, true, ""};
  const EstimateReport report = aggregate_and_classify({{2, {a, b}}});
  const Aggregate& agg = report.orders[0].theta_aggregate;
  REQUIRE(agg.defined);
  CHECK(agg.used == 2);
  CHECK(agg.mean == doctest::Approx(0.92).epsilon(1e-14));
  // Scatter SEM = sd/sqrt(2) = 0.02; far above the propagated 0.0007.
  CHECK(agg.sem == doctest::Approx(0.02).epsilon(1e-12));

  // Inverse-variance weighting puts the mean nearer the precise estimate.
  Combination precise = a;
  precise.theta = {0.90, 0.001, true, ""};
  Combination vague = b;
  vague.theta = {0.94, 0.01, true, ""};
  const EstimateReport weighted =
      aggregate_and_classify({{2, {precise, vague}}}, 3.0, /*inverse_variance=*/true);
  const Aggregate& wagg = weighted.orders[0].theta_aggregate;
  const double w1 = 1.0 / (0.001 * 0.001);
  const double w2 = 1.0 / (0.01 * 0.01);
  CHECK(wagg.mean == doctest::Approx((w1 * 0.90 + w2 * 0.94) / (w1 + w2)).epsilon(1e-12));
  CHECK(wagg.sem == doctest::Approx(std::sqrt(1.0 / (w1 + w2))).epsilon(1e-12));
}

TEST_SUITE_END();
