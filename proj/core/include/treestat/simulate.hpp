#pragma once

#include <cstdint>

#include "treestat/timetags.hpp"
#include "treestat/types.hpp"

namespace treestat::mc {

/// Full description of a Monte Carlo run.  Every random decision is drawn
/// from a per-pulse counter-based stream keyed by (seed, pulse index), so
/// results are bit-identical for a given seed regardless of `threads` and of
/// whether time tags are emitted.
struct SimulationConfig {
  EmitterEnsemble ensemble;
  NoiseModel noise;
  DetectorTree tree;
  std::uint64_t n_pulses = 0;
  std::uint64_t seed = 1;
  bool emit_stream = false;
  double rep_rate_hz = 5.0e6;
  double window_ns = 40.0;
  unsigned threads = 0;  ///< 0 = hardware concurrency

  [[nodiscard]] std::uint64_t period_ps() const;
  [[nodiscard]] std::uint64_t window_ps() const;

  void validate() const;
};

/// Runs the simulation and returns coincidence tallies only.
CountSummary simulate(const SimulationConfig& config);

struct StreamResult {
  timetags::TimeTagStream stream;
  CountSummary counts;
};

/// Runs the simulation emitting a time-tag stream alongside the tallies.
/// Requires config.emit_stream; the tallies are bit-identical to what
/// simulate() returns for the same config.
StreamResult simulate_stream(const SimulationConfig& config);

}  // namespace treestat::mc
