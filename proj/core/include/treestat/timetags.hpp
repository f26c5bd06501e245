#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "treestat/types.hpp"

namespace treestat::timetags {

/// One detector click: channel index and absolute timestamp in picoseconds.
struct TimeTagEvent {
  std::uint32_t channel = 0;
  std::uint64_t time_ps = 0;

  bool operator==(const TimeTagEvent&) const = default;
};

/// Acquisition metadata carried in the stream header.
/// `pulses` is the acquisition length in excitation periods; 0 means unknown
/// (it is then inferred from the last event during ingestion).
struct StreamHeader {
  double rep_rate_hz = 5.0e6;
  std::uint64_t t0_ps = 0;
  double window_ns = 40.0;
  std::uint32_t channels = 0;
  std::uint64_t pulses = 0;
  std::string source;

  bool operator==(const StreamHeader&) const = default;
};

/// A parsed time-tag stream: header plus time-ordered events.
struct TimeTagStream {
  StreamHeader header;
  std::vector<TimeTagEvent> events;

  /// Throws std::invalid_argument on unsorted events or out-of-range
  /// channels (when the header declares a channel count).
  void validate() const;

  bool operator==(const TimeTagStream&) const = default;
};

/// Maps absolute timestamps onto excitation pulses: events falling into
/// [window_start_ps, window_start_ps + window_ps) relative to their pulse
/// are accepted.
struct WindowingPolicy {
  std::uint64_t period_ps = 200000;
  std::uint64_t window_start_ps = 0;
  std::uint64_t window_ps = 40000;

  static WindowingPolicy from_header(const StreamHeader& header);

  void validate() const;
};

/// Bookkeeping of what happened to each event during ingestion.
struct IngestStats {
  std::uint64_t events_total = 0;
  std::uint64_t events_in_window = 0;
  std::uint64_t events_outside_window = 0;
  std::uint64_t events_beyond_acquisition = 0;
  std::uint64_t duplicate_clicks = 0;

  bool operator==(const IngestStats&) const = default;
};

struct IngestResult {
  CountSummary counts;
  IngestStats stats;
};

/// Folds a stream into per-pulse coincidence tallies.  Events before t0 or
/// on channels >= header.channels throw std::invalid_argument; events beyond
/// the declared acquisition length are tallied and skipped.  The result is
/// independent of how the stream was chunked upstream.
IngestResult ingest(const TimeTagStream& stream, const WindowingPolicy& policy);

/// Parse failure, carrying the 1-based line (text) or record (binary) index.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message);
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class StreamFormat { text, binary };

/// Parses a full stream image (text or binary; detected from the header).
TimeTagStream parse_stream(std::string_view data);

/// Reads and parses a stream file.
TimeTagStream read_stream(const std::string& path);

/// Serializes a stream; parse_stream(format_stream(s)) == s.
std::string format_stream(const TimeTagStream& stream,
                          StreamFormat format = StreamFormat::text);

/// Writes a stream file in the requested format.
void write_stream(const TimeTagStream& stream, const std::string& path,
                  StreamFormat format = StreamFormat::text);

/// Result of a window-phase calibration scan.
struct T0Scan {
  std::uint64_t t0_ps = 0;
  double in_window_fraction = 0.0;
};

/// Scans window phases against the pulse period and returns the t0 that
/// maximizes the fraction of events falling inside the window (smallest t0
/// on ties).  Use when the header t0 is unknown or untrusted.
T0Scan calibrate_t0(const TimeTagStream& stream, const WindowingPolicy& policy);

}  // namespace treestat::timetags
