#include "treestat/timetags.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace treestat::timetags {

namespace {

constexpr std::string_view kMagic = "treestat-timetags";
constexpr int kFormatVersion = 1;

void append_double(std::string& out, double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, result.ptr);
}

void append_u64(std::string& out, std::uint64_t value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, result.ptr);
}

double parse_double(std::string_view text, std::size_t line) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw ParseError(line, "malformed floating-point value '" + std::string(text) + "'");
  }
  return value;
}

std::uint64_t parse_u64(std::string_view text, std::size_t line) {
  std::uint64_t value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw ParseError(line, "malformed unsigned integer '" + std::string(text) + "'");
  }
  return value;
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  return text;
}

// Consumes one line (without the newline); returns false at end of input.
bool next_line(std::string_view& data, std::string_view& line) {
  if (data.empty()) return false;
  const std::size_t pos = data.find('\n');
  if (pos == std::string_view::npos) {
    line = data;
    data = {};
  } else {
    line = data.substr(0, pos);
    data.remove_prefix(pos + 1);
  }
  return true;
}

std::uint64_t load_le_u64(const unsigned char* bytes) {
  std::uint64_t value = 0;
  for (int i = 7; i >= 0; --i) value = (value << 8) | bytes[i];
  return value;
}

void store_le_u64(std::string& out, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(value & 0xff));
    value >>= 8;
  }
}

void append_event_checked(TimeTagStream& stream, std::uint32_t channel, std::uint64_t time_ps,
                          std::size_t line) {
  if (stream.header.channels != 0 && channel >= stream.header.channels) {
    throw ParseError(line, "channel " + std::to_string(channel) + " out of range");
  }
  if (!stream.events.empty() && time_ps < stream.events.back().time_ps) {
    throw ParseError(line, "timestamps must be nondecreasing");
  }
  stream.events.push_back({channel, time_ps});
}

}  // namespace

void TimeTagStream::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (header.channels != 0 && events[i].channel >= header.channels) {
      throw std::invalid_argument("event channel out of range");
    }
    if (i > 0 && events[i].time_ps < events[i - 1].time_ps) {
      throw std::invalid_argument("events must be sorted by timestamp");
    }
  }
}

WindowingPolicy WindowingPolicy::from_header(const StreamHeader& header) {
  WindowingPolicy policy;
  policy.period_ps = static_cast<std::uint64_t>(std::llround(1e12 / header.rep_rate_hz));
  policy.window_start_ps = 0;
  policy.window_ps = static_cast<std::uint64_t>(std::llround(header.window_ns * 1e3));
  return policy;
}

void WindowingPolicy::validate() const {
  if (period_ps == 0) throw std::invalid_argument("pulse period must be nonzero");
  if (window_ps == 0) throw std::invalid_argument("acceptance window must be nonzero");
  if (window_start_ps + window_ps > period_ps) {
    throw std::invalid_argument("acceptance window must fit inside the pulse period");
  }
}

IngestResult ingest(const TimeTagStream& stream, const WindowingPolicy& policy) {
  policy.validate();

  std::uint32_t channels = stream.header.channels;
  if (channels == 0) {
    for (const TimeTagEvent& event : stream.events) {
      channels = std::max(channels, event.channel + 1);
    }
  }
  if (channels > kMaxChannels) throw std::invalid_argument("channel count exceeds kMaxChannels");

  const std::uint64_t t0 = stream.header.t0_ps;
  std::uint64_t n_trials = stream.header.pulses;
  if (n_trials == 0 && !stream.events.empty()) {
    if (stream.events.back().time_ps < t0) {
      throw std::invalid_argument("event before acquisition start t0");
    }
    n_trials = (stream.events.back().time_ps - t0) / policy.period_ps + 1;
  }

  IngestResult result;
  result.counts.init(channels, n_trials);

  std::uint64_t previous_time = 0;
  std::uint64_t current_pulse = 0;
  ChannelMask pattern = 0;
  bool open = false;

  auto flush = [&]() {
    if (open) result.counts.record_pattern(pattern);
    pattern = 0;
    open = false;
  };

  for (const TimeTagEvent& event : stream.events) {
    ++result.stats.events_total;
    if (event.time_ps < t0) throw std::invalid_argument("event before acquisition start t0");
    if (event.time_ps < previous_time) throw std::invalid_argument("unsorted time-tag stream");
    previous_time = event.time_ps;
    if (event.channel >= channels) throw std::invalid_argument("event channel out of range");

    const std::uint64_t pulse = (event.time_ps - t0) / policy.period_ps;
    const std::uint64_t offset = (event.time_ps - t0) % policy.period_ps;
    if (pulse >= n_trials) {
      ++result.stats.events_beyond_acquisition;
      continue;
    }
    if (offset < policy.window_start_ps || offset >= policy.window_start_ps + policy.window_ps) {
      ++result.stats.events_outside_window;
      continue;
    }
    ++result.stats.events_in_window;

    if (!open || pulse != current_pulse) {
      flush();
      current_pulse = pulse;
      open = true;
    }
    const ChannelMask bit = ChannelMask{1} << event.channel;
    if (pattern & bit) {
      ++result.stats.duplicate_clicks;
    } else {
      pattern |= bit;
    }
  }
  flush();
  return result;
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

TimeTagStream parse_stream(std::string_view data) {
  TimeTagStream stream;
  std::string_view line;
  std::size_t line_no = 0;

  bool saw_magic = false;
  bool binary = false;
  bool channels_declared = false;

  // Header: leading '# key value' lines; a '# format ...' line closes it.
  while (!data.empty() && data.front() == '#') {
    next_line(data, line);
    ++line_no;
    std::string_view body = trim(line.substr(1));
    const std::size_t space = body.find(' ');
    const std::string_view key = body.substr(0, space);
    const std::string_view value =
        space == std::string_view::npos ? std::string_view{} : trim(body.substr(space + 1));

    if (key == kMagic) {
      if (parse_u64(value, line_no) != static_cast<std::uint64_t>(kFormatVersion)) {
        throw ParseError(line_no, "unsupported format version '" + std::string(value) + "'");
      }
      saw_magic = true;
    } else if (key == "rep_rate_hz") {
      stream.header.rep_rate_hz = parse_double(value, line_no);
      if (!(stream.header.rep_rate_hz > 0.0)) {
        throw ParseError(line_no, "repetition rate must be > 0");
      }
    } else if (key == "t0_ps") {
      stream.header.t0_ps = parse_u64(value, line_no);
    } else if (key == "window_ns") {
      stream.header.window_ns = parse_double(value, line_no);
      if (!(stream.header.window_ns > 0.0)) {
        throw ParseError(line_no, "window length must be > 0");
      }
    } else if (key == "channels") {
      const std::uint64_t channels = parse_u64(value, line_no);
      if (channels > kMaxChannels) throw ParseError(line_no, "channel count exceeds kMaxChannels");
      stream.header.channels = static_cast<std::uint32_t>(channels);
      channels_declared = true;
    } else if (key == "pulses") {
      stream.header.pulses = parse_u64(value, line_no);
    } else if (key == "source") {
      stream.header.source = std::string(value);
    } else if (key == "format") {
      if (value == "binary") {
        binary = true;
      } else if (value != "text") {
        throw ParseError(line_no, "unknown format '" + std::string(value) + "'");
      }
      break;
    }
    // Unknown keys are ignored for forward compatibility.
  }
  if (!saw_magic) throw ParseError(1, "missing 'treestat-timetags' header");

  if (binary) {
    constexpr std::size_t kRecord = 9;  // u8 channel + u64 little-endian time
    if (data.size() % kRecord != 0) {
      throw ParseError(line_no, "binary payload is not a whole number of records");
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    const std::size_t n_records = data.size() / kRecord;
    stream.events.reserve(n_records);
    for (std::size_t r = 0; r < n_records; ++r) {
      const unsigned char* record = bytes + r * kRecord;
      append_event_checked(stream, record[0], load_le_u64(record + 1), line_no + 1 + r);
    }
  } else {
    while (next_line(data, line)) {
      ++line_no;
      const std::string_view body = trim(line);
      if (body.empty()) continue;
      if (body.front() == '#') throw ParseError(line_no, "unexpected header line after records");
      const std::size_t tab = body.find_first_of(" \t");
      if (tab == std::string_view::npos) {
        throw ParseError(line_no, "record needs 'channel<TAB>time_ps'");
      }
      const std::uint64_t channel = parse_u64(trim(body.substr(0, tab)), line_no);
      if (channel >= kMaxChannels) throw ParseError(line_no, "channel out of range");
      const std::uint64_t time_ps = parse_u64(trim(body.substr(tab + 1)), line_no);
      append_event_checked(stream, static_cast<std::uint32_t>(channel), time_ps, line_no);
    }
  }

  if (!channels_declared) {
    std::uint32_t channels = 0;
    for (const TimeTagEvent& event : stream.events) {
      channels = std::max(channels, event.channel + 1);
    }
    stream.header.channels = channels;
  }
  return stream;
}

TimeTagStream read_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_stream(buffer.str());
}

std::string format_stream(const TimeTagStream& stream, StreamFormat format) {
  stream.validate();
  std::string out;
  out += "# ";
  out += kMagic;
  out += " ";
  append_u64(out, kFormatVersion);
  out += "\n# rep_rate_hz ";
  append_double(out, stream.header.rep_rate_hz);
  out += "\n# t0_ps ";
  append_u64(out, stream.header.t0_ps);
  out += "\n# window_ns ";
  append_double(out, stream.header.window_ns);
  out += "\n# channels ";
  append_u64(out, stream.header.channels);
  out += "\n# pulses ";
  append_u64(out, stream.header.pulses);
  out += "\n";
  if (!stream.header.source.empty()) {
    out += "# source " + stream.header.source + "\n";
  }
  if (format == StreamFormat::binary) {
    out += "# format binary\n";
    for (const TimeTagEvent& event : stream.events) {
      out.push_back(static_cast<char>(event.channel & 0xff));
      store_le_u64(out, event.time_ps);
    }
  } else {
    out += "# format text\n";
    for (const TimeTagEvent& event : stream.events) {
      append_u64(out, event.channel);
      out += "\t";
      append_u64(out, event.time_ps);
      out += "\n";
    }
  }
  return out;
}

void write_stream(const TimeTagStream& stream, const std::string& path, StreamFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::string data = format_stream(stream, format);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed to write '" + path + "'");
}

T0Scan calibrate_t0(const TimeTagStream& stream, const WindowingPolicy& policy) {
  policy.validate();
  if (stream.events.empty()) return T0Scan{stream.header.t0_ps, 0.0};

  const std::uint64_t period = policy.period_ps;
  std::vector<std::uint64_t> phases;
  phases.reserve(stream.events.size());
  for (const TimeTagEvent& event : stream.events) phases.push_back(event.time_ps % period);
  std::sort(phases.begin(), phases.end());

  // Doubled phase list so windows wrapping past the period stay contiguous.
  std::vector<std::uint64_t> doubled(phases);
  doubled.reserve(phases.size() * 2);
  for (std::uint64_t phase : phases) doubled.push_back(phase + period);

  // A window position is only optimal when its start sits on an event phase,
  // so scanning event phases finds the global maximum.
  std::size_t best_count = 0;
  std::uint64_t best_t0 = 0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::uint64_t start = phases[i];
    const auto end = std::lower_bound(doubled.begin() + static_cast<std::ptrdiff_t>(i),
                                      doubled.end(), start + policy.window_ps);
    const std::size_t count = static_cast<std::size_t>(end - (doubled.begin() + static_cast<std::ptrdiff_t>(i)));
    const std::uint64_t t0 =
        (start + period - policy.window_start_ps % period) % period;
    if (count > best_count || (count == best_count && t0 < best_t0)) {
      best_count = count;
      best_t0 = t0;
    }
  }
  return T0Scan{best_t0, static_cast<double>(best_count) / static_cast<double>(phases.size())};
}

}  // namespace treestat::timetags
