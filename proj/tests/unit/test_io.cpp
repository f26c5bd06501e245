#include <doctest.h>

#include <cstdio>
#include <string>

#include "treestat/estimate.hpp"
#include "treestat/io.hpp"
#include "treestat/simulate.hpp"

using namespace treestat;
using namespace treestat::io;

TEST_SUITE_BEGIN("io");

TEST_CASE("counts JSON round-trips and is byte-stable") {
  CountSummary counts;
  counts.init(3, 1000);
  counts.counts[0b001] = 100;
  counts.counts[0b010] = 90;
  counts.counts[0b100] = 80;
  counts.counts[0b011] = 11;
  counts.counts[0b111] = 2;
  counts.counts[0b101] = 9;
  counts.counts[0b110] = 8;

  const std::string text = counts_to_json(counts);
  CHECK(counts_from_json(text) == counts);
  CHECK(counts_to_json(counts_from_json(text)) == text);
  CHECK(text.find("\"0,1,2\"") != std::string::npos);
}

TEST_CASE("counts JSON rejects malformed input") {
  CHECK_THROWS_AS(counts_from_json("{"), std::runtime_error);
  CHECK_THROWS_AS(counts_from_json("{\"format\":\"other\"}"), std::runtime_error);
  CHECK_THROWS_AS(counts_from_json(R"({"format":"treestat-counts","version":9,
      "channels":1,"n_trials":1,"counts":{}})"),
                  std::runtime_error);
  // Inconsistent tallies (pair above singles) must not load silently.
  CHECK_THROWS_AS(counts_from_json(R"({"format":"treestat-counts","version":1,
      "channels":2,"n_trials":10,"counts":{"0":1,"1":1,"0,1":5}})"),
                  std::runtime_error);
}

TEST_CASE("sniff recognizes the three input kinds") {
  CHECK(sniff("# treestat-timetags 1\n# format text\n") == InputKind::stream);
  CHECK(sniff("  {\"format\": \"treestat-counts\"}") == InputKind::counts);
  CHECK(sniff("{\n  \"format\": \"treestat-estimates\"}") == InputKind::estimates);
  CHECK(sniff("hello") == InputKind::unknown);
  CHECK(sniff("") == InputKind::unknown);
}

TEST_CASE("report serialization carries verdicts and combinations") {
  CountSummary counts;
  counts.init(2, 10000);
  counts.counts[0b01] = 1000;
  counts.counts[0b10] = 1100;
  counts.counts[0b11] = 50;

  estimator::Options options;
  options.method = estimator::UncertaintyMethod::propagation;
  const estimator::EstimateReport report = estimator::analyze(counts, options);

  const std::string json_text = report_to_json(report);
  CHECK(json_text.find("\"format\": \"treestat-report\"") != std::string::npos);
  CHECK(json_text.find("\"classification\"") != std::string::npos);
  CHECK(json_text.find("\"combinations\"") != std::string::npos);

  const std::string text = report_to_text(report);
  CHECK(text.find("order 2") != std::string::npos);
  CHECK(text.find("classification:") != std::string::npos);
}

TEST_CASE("estimates files parse into order groups") {
  const std::string text = R"({
    "format": "treestat-estimates",
    "version": 1,
    "estimates": [
      {"kind": "g", "order": 2, "channels": [0, 1], "value": 0.407, "sigma": 0.012},
      {"kind": "theta", "order": 2, "channels": [0, 1], "value": 0.99, "sigma": 0.001},
      {"kind": "g", "order": 3, "value": 0.66, "sigma": 0.01}
    ]
  })";
  const auto orders = estimates_from_json(text);
  REQUIRE(orders.size() == 2);
  CHECK(orders[0].order == 2);
  REQUIRE(orders[0].combinations.size() == 1);
  CHECK(orders[0].combinations[0].g.value == 0.407);
  CHECK(orders[0].combinations[0].theta.value == 0.99);
  CHECK(orders[0].combinations[0].theta.defined);
  CHECK(orders[1].order == 3);
  CHECK(orders[1].combinations[0].channels == full_mask(3));
  CHECK(!orders[1].combinations[0].theta.defined);

  CHECK_THROWS_AS(estimates_from_json("{\"format\":\"treestat-estimates\"}"),
                  std::runtime_error);
  CHECK_THROWS_AS(estimates_from_json(R"({"format":"treestat-estimates","estimates":
      [{"kind":"x","order":2,"value":1,"sigma":0}]})"),
                  std::runtime_error);
  CHECK_THROWS_AS(estimates_from_json(R"({"format":"treestat-estimates","estimates":
      [{"kind":"g","order":3,"channels":[0,1],"value":1,"sigma":0}]})"),
                  std::runtime_error);
}

TEST_CASE("file helpers round-trip bytes") {
  const std::string path = "io_test_scratch.txt";
  write_file(path, "payload\n");
  CHECK(read_file(path) == "payload\n");
  write_file(path, "changed");
  CHECK(read_file(path) == "changed");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_file(path), std::runtime_error);
}

TEST_SUITE_END();
