#include <doctest.h>

#include <stdexcept>

#include "treestat/types.hpp"

using namespace treestat;

TEST_SUITE_BEGIN("types");

TEST_CASE("channel masks round-trip through channel lists") {
  CHECK(full_mask(0) == 0u);
  CHECK(full_mask(3) == 0b111u);
  CHECK(channels_of(0b101u) == std::vector<std::size_t>{0, 2});
  CHECK(mask_of({0, 2}) == 0b101u);
  CHECK(mask_of(channels_of(0b1101u)) == 0b1101u);
  CHECK_THROWS_AS(full_mask(kMaxChannels + 1), std::invalid_argument);
  CHECK_THROWS_AS(mask_of({kMaxChannels}), std::invalid_argument);
}

TEST_CASE("clamp_probability tolerates rounding but rejects misuse") {
  CHECK(clamp_probability(0.25) == 0.25);
  CHECK(clamp_probability(-0.5e-12) == 0.0);
  CHECK(clamp_probability(1.0 + 0.5e-12) == 1.0);
  CHECK_THROWS_AS(clamp_probability(-1e-9), ProbabilityRangeError);
  CHECK_THROWS_AS(clamp_probability(1.0 + 1e-9), ProbabilityRangeError);
}

TEST_CASE("emitter ensemble validation") {
  EmitterEnsemble ensemble{3, 0.5, {}};
  CHECK_NOTHROW(ensemble.validate());
  CHECK(ensemble.uniform());
  CHECK(ensemble.efficiency_of(1) == 0.5);

  ensemble.efficiency = 1.5;
  CHECK_THROWS_AS(ensemble.validate(), std::invalid_argument);

  EmitterEnsemble per{2, 0.0, {0.2, 0.7}};
  CHECK_NOTHROW(per.validate());
  CHECK(!per.uniform());
  CHECK(per.efficiency_of(1) == 0.7);

  per.per_emitter.push_back(0.1);
  CHECK_THROWS_AS(per.validate(), std::invalid_argument);
}

TEST_CASE("noise model validation") {
  CHECK_NOTHROW(NoiseModel{0.0}.validate());
  CHECK_NOTHROW(NoiseModel{2.5}.validate());
  CHECK_THROWS_AS(NoiseModel{-0.1}.validate(), std::invalid_argument);
}

TEST_CASE("balanced detector tree factory") {
  const DetectorTree tree = DetectorTree::balanced(4, 0.6);
  CHECK_NOTHROW(tree.validate());
  CHECK(tree.channels() == 4);
  CHECK(tree.is_balanced());
  CHECK(tree.arm_transmission(2) == doctest::Approx(0.15).epsilon(1e-14));
  CHECK(tree.subset_transmission(0b1111u) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(tree.subset_transmission(0) == 0.0);
}

TEST_CASE("detector tree validation rejects bad weights") {
  DetectorTree tree;
  tree.xi = {0.5, 0.5};
  tree.weights = {0.6, 0.6};
  CHECK_THROWS_AS(tree.validate(), std::invalid_argument);
  tree.weights = {0.7, 0.3};
  CHECK_NOTHROW(tree.validate());
  CHECK(!tree.is_balanced());
}

TEST_CASE("photon-number distribution validation") {
  PhotonNumberDistribution dist{{0.5, 0.3}, 0.2};
  CHECK_NOTHROW(dist.validate());
  CHECK(dist.nmax() == 1);
  dist.tail_bound = 0.0;
  CHECK_THROWS_AS(dist.validate(), std::invalid_argument);
}

TEST_CASE("count summary records patterns into all subsets") {
  CountSummary counts;
  counts.init(3, 4);
  counts.record_pattern(0b011u);
  counts.record_pattern(0b011u);
  counts.record_pattern(0b100u);
  counts.record_pattern(0b000u);

  CHECK(counts.at(0) == 4);
  CHECK(counts.at(0b001u) == 2);
  CHECK(counts.at(0b010u) == 2);
  CHECK(counts.at(0b011u) == 2);
  CHECK(counts.at(0b100u) == 1);
  CHECK(counts.at(0b111u) == 0);
  CHECK_NOTHROW(counts.validate());
}

TEST_CASE("count summary merge adds trials and tallies") {
  CountSummary a;
  a.init(2, 1);
  a.record_pattern(0b11u);
  CountSummary b;
  b.init(2, 2);
  b.record_pattern(0b01u);
  a.merge(b);
  CHECK(a.n_trials == 3);
  CHECK(a.at(0b01u) == 2);
  CHECK(a.at(0b11u) == 1);
  CHECK_NOTHROW(a.validate());

  CountSummary c;
  c.init(3, 0);
  CHECK_THROWS_AS(a.merge(c), std::invalid_argument);
}

TEST_CASE("count summary validation catches non-monotone tables") {
  CountSummary counts;
  counts.init(2, 10);
  counts.counts[0b11u] = 5;  // pair exceeds both singles
  CHECK_THROWS_AS(counts.validate(), std::invalid_argument);
}

TEST_SUITE_END();
