#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treestat/types.hpp"

namespace treestat::estimator {

/// Point estimate with a one-standard-error uncertainty.  `defined` is false
/// when the estimator degenerates on the given data (zero denominator); the
/// reason is then spelled out in `note`.
struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
  bool defined = false;
  std::string note;
};

enum class UncertaintyMethod { bootstrap, propagation };

/// Estimation options; the defaults match the command-line tool.
struct Options {
  UncertaintyMethod method = UncertaintyMethod::bootstrap;
  int bootstrap_rounds = 200;
  std::uint64_t bootstrap_seed = 0x626f6f74ull;
  double k_sigma = 3.0;
  std::vector<std::size_t> orders = {2, 3, 4};
  bool inverse_variance = false;
};

/// Empirical coincidence probabilities, indexed by ChannelMask like
/// CountSummary::counts; entry 0 is exactly 1.  Requires n_trials >= 1.
std::vector<double> probabilities(const CountSummary& counts);

/// theta over `subset` evaluated on a mask-indexed probability table
/// (inclusion-exclusion numerator over singles product).  Throws
/// UndefinedEstimator when a single-channel no-click probability is zero.
double theta_from_probs(const std::vector<double>& probs, ChannelMask subset);

/// g over `subset` evaluated on a mask-indexed probability table.  Throws
/// UndefinedEstimator when a single-channel click probability is zero.
double g_from_probs(const std::vector<double>& probs, ChannelMask subset);

/// Exclusive per-pattern counts restricted to the channels of `subset`,
/// recovered by Moebius inversion; indexed by local mask over the subset's
/// channels in ascending order.  Throws std::invalid_argument if the counts
/// are not consistent with any multinomial outcome.
std::vector<std::uint64_t> subset_cell_counts(const CountSummary& counts, ChannelMask subset);

/// theta estimate over `subset` with uncertainty per `options`.
Estimate theta_k(const CountSummary& counts, ChannelMask subset, const Options& options = {});

/// g estimate over `subset` with uncertainty per `options`.
Estimate g_k(const CountSummary& counts, ChannelMask subset, const Options& options = {});

enum class Verdict { nonclassical, classical, inconclusive };

std::string to_string(Verdict verdict);

/// Mean over channel combinations with a standard error of that mean.
struct Aggregate {
  double mean = 0.0;
  double sem = 0.0;
  int used = 0;
  bool defined = false;
};

/// Estimates for one channel combination.
struct Combination {
  ChannelMask channels = 0;
  Estimate theta;
  Estimate g;
};

/// Aggregated estimates and verdict for one coincidence order.
struct OrderReport {
  std::size_t order = 0;
  std::vector<Combination> combinations;
  Aggregate theta_aggregate;
  Aggregate g_aggregate;
  Verdict verdict = Verdict::inconclusive;
};

/// Full analysis output.
struct EstimateReport {
  std::uint64_t n_trials = 0;
  std::size_t channel_count = 0;
  double k_sigma = 3.0;
  std::vector<OrderReport> orders;
  Verdict classification = Verdict::inconclusive;
  bool single_emitter_candidate = false;
};

/// Runs theta/g estimation over every channel combination of the requested
/// orders, aggregates per order, and classifies the source.
EstimateReport analyze(const CountSummary& counts, const Options& options = {});

/// Pre-computed estimates for one order, for classification without counts.
struct OrderEstimates {
  std::size_t order = 0;
  std::vector<Combination> combinations;
};

/// Aggregates externally supplied estimates (as analyze() does internally)
/// and classifies.  The verdict uses theta when available, otherwise g:
/// mean + k*sem < 1 is nonclassical, mean - k*sem > 1 classical, anything
/// else inconclusive.  A source whose order-2 g satisfies
/// mean + k*sem < 0.5 is additionally flagged as single-emitter candidate.
EstimateReport aggregate_and_classify(const std::vector<OrderEstimates>& estimates,
                                      double k_sigma = 3.0,
                                      bool inverse_variance = false);

}  // namespace treestat::estimator
