#include "treestat/io.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace treestat::io {

namespace {

using nlohmann::json;

constexpr int kCountsVersion = 1;
constexpr int kReportVersion = 1;

std::string mask_key(ChannelMask mask) {
  std::string key;
  for (std::size_t channel : channels_of(mask)) {
    if (!key.empty()) key += ",";
    key += std::to_string(channel);
  }
  return key;
}

ChannelMask key_mask(const std::string& key) {
  ChannelMask mask = 0;
  std::istringstream in(key);
  std::string part;
  while (std::getline(in, part, ',')) {
    std::size_t consumed = 0;
    const unsigned long channel = std::stoul(part, &consumed);
    if (consumed != part.size() || channel >= kMaxChannels) {
      throw std::runtime_error("invalid channel list '" + key + "'");
    }
    mask |= ChannelMask{1} << channel;
  }
  if (mask == 0) throw std::runtime_error("invalid channel list '" + key + "'");
  return mask;
}

json estimate_to_json(const estimator::Estimate& estimate) {
  json out;
  out["value"] = estimate.value;
  out["sigma"] = estimate.sigma;
  out["defined"] = estimate.defined;
  if (!estimate.note.empty()) out["note"] = estimate.note;
  return out;
}

json aggregate_to_json(const estimator::Aggregate& aggregate) {
  json out;
  out["mean"] = aggregate.mean;
  out["sem"] = aggregate.sem;
  out["used"] = aggregate.used;
  out["defined"] = aggregate.defined;
  return out;
}

std::string format_value(const estimator::Estimate& estimate) {
  if (!estimate.defined) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f +- %.6f", estimate.value, estimate.sigma);
  return buf;
}

std::string format_aggregate(const estimator::Aggregate& aggregate) {
  if (!aggregate.defined) return "undefined";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6f +- %.6f (from %d combinations)", aggregate.mean,
                aggregate.sem, aggregate.used);
  return buf;
}

}  // namespace

InputKind sniff(std::string_view head) {
  std::size_t i = 0;
  while (i < head.size() && std::isspace(static_cast<unsigned char>(head[i]))) ++i;
  const std::string_view body = head.substr(i);
  if (body.rfind("# treestat-timetags", 0) == 0) return InputKind::stream;
  if (!body.empty() && body.front() == '{') {
    if (body.find("treestat-counts") != std::string_view::npos) return InputKind::counts;
    if (body.find("treestat-estimates") != std::string_view::npos) return InputKind::estimates;
  }
  return InputKind::unknown;
}

std::string counts_to_json(const CountSummary& counts) {
  counts.validate();
  json out;
  out["format"] = "treestat-counts";
  out["version"] = kCountsVersion;
  out["channels"] = counts.channel_count;
  out["n_trials"] = counts.n_trials;
  json table = json::object();
  for (std::size_t m = 1; m < counts.counts.size(); ++m) {
    table[mask_key(static_cast<ChannelMask>(m))] = counts.counts[m];
  }
  out["counts"] = std::move(table);
  return out.dump(2) + "\n";
}

CountSummary counts_from_json(std::string_view text) {
  try {
    const json in = json::parse(text);
    if (in.at("format").get<std::string>() != "treestat-counts") {
      throw std::runtime_error("not a counts file");
    }
    if (in.at("version").get<int>() != kCountsVersion) {
      throw std::runtime_error("unsupported counts version");
    }
    CountSummary counts;
    counts.init(in.at("channels").get<std::size_t>(), in.at("n_trials").get<std::uint64_t>());
    for (const auto& [key, value] : in.at("counts").items()) {
      const ChannelMask mask = key_mask(key);
      if (mask >= counts.counts.size()) {
        throw std::runtime_error("channel list '" + key + "' exceeds the channel count");
      }
      counts.counts[mask] = value.get<std::uint64_t>();
    }
    counts.validate();
    return counts;
  } catch (const json::exception& error) {
    throw std::runtime_error(std::string("invalid counts file: ") + error.what());
  } catch (const std::invalid_argument& error) {
    // CountSummary::validate() reports inconsistent tallies this way; a file
    // that fails it is malformed input, not a programming error.
    throw std::runtime_error(std::string("invalid counts file: ") + error.what());
  }
}

void write_counts(const CountSummary& counts, const std::string& path) {
  write_file(path, counts_to_json(counts));
}

CountSummary read_counts(const std::string& path) { return counts_from_json(read_file(path)); }

std::string report_to_json(const estimator::EstimateReport& report) {
  json out;
  out["format"] = "treestat-report";
  out["version"] = kReportVersion;
  out["n_trials"] = report.n_trials;
  out["channels"] = report.channel_count;
  out["k_sigma"] = report.k_sigma;
  out["classification"] = estimator::to_string(report.classification);
  out["single_emitter_candidate"] = report.single_emitter_candidate;
  json orders = json::array();
  for (const estimator::OrderReport& order : report.orders) {
    json entry;
    entry["order"] = order.order;
    entry["verdict"] = estimator::to_string(order.verdict);
    entry["theta"] = aggregate_to_json(order.theta_aggregate);
    entry["g"] = aggregate_to_json(order.g_aggregate);
    json combos = json::array();
    for (const estimator::Combination& combo : order.combinations) {
      json c;
      c["channels"] = channels_of(combo.channels);
      c["theta"] = estimate_to_json(combo.theta);
      c["g"] = estimate_to_json(combo.g);
      combos.push_back(std::move(c));
    }
    entry["combinations"] = std::move(combos);
    orders.push_back(std::move(entry));
  }
  out["orders"] = std::move(orders);
  return out.dump(2) + "\n";
}

std::string report_to_text(const estimator::EstimateReport& report) {
  std::ostringstream out;
  out << "trials " << report.n_trials << ", channels " << report.channel_count << ", k_sigma "
      << report.k_sigma << "\n";
  for (const estimator::OrderReport& order : report.orders) {
    out << "order " << order.order << ":\n";
    for (const estimator::Combination& combo : order.combinations) {
      out << "  channels " << mask_key(combo.channels) << ": theta " << format_value(combo.theta)
          << ", g " << format_value(combo.g) << "\n";
    }
    out << "  aggregate theta " << format_aggregate(order.theta_aggregate) << "\n";
    out << "  aggregate g     " << format_aggregate(order.g_aggregate) << "\n";
    out << "  verdict " << estimator::to_string(order.verdict) << "\n";
  }
  out << "classification: " << estimator::to_string(report.classification) << "\n";
  if (report.single_emitter_candidate) out << "single-emitter candidate\n";
  return out.str();
}

std::vector<estimator::OrderEstimates> estimates_from_json(std::string_view text) {
  try {
    const json in = json::parse(text);
    if (in.at("format").get<std::string>() != "treestat-estimates") {
      throw std::runtime_error("not an estimates file");
    }
    std::map<std::size_t, estimator::OrderEstimates> by_order;
    for (const json& item : in.at("estimates")) {
      const std::string kind = item.at("kind").get<std::string>();
      if (kind != "theta" && kind != "g") {
        throw std::runtime_error("estimate kind must be 'theta' or 'g'");
      }
      const auto order = item.at("order").get<std::size_t>();
      if (order < 1 || order > kMaxChannels) throw std::runtime_error("order out of range");
      ChannelMask mask = full_mask(order);
      if (item.contains("channels")) {
        mask = mask_of(item.at("channels").get<std::vector<std::size_t>>());
      }
      if (static_cast<std::size_t>(channels_of(mask).size()) != order) {
        throw std::runtime_error("channel list does not match the order");
      }
      estimator::Estimate estimate;
      estimate.value = item.at("value").get<double>();
      estimate.sigma = item.at("sigma").get<double>();
      if (estimate.sigma < 0.0) throw std::runtime_error("sigma must be >= 0");
      estimate.defined = true;

      estimator::OrderEstimates& entry = by_order[order];
      entry.order = order;
      estimator::Combination* combo = nullptr;
      for (estimator::Combination& existing : entry.combinations) {
        if (existing.channels == mask) combo = &existing;
      }
      if (combo == nullptr) {
        entry.combinations.push_back({});
        combo = &entry.combinations.back();
        combo->channels = mask;
        combo->theta.note = "not provided";
        combo->g.note = "not provided";
      }
      if (kind == "theta") {
        combo->theta = estimate;
      } else {
        combo->g = estimate;
      }
    }
    std::vector<estimator::OrderEstimates> out;
    out.reserve(by_order.size());
    for (auto& [order, entry] : by_order) out.push_back(std::move(entry));
    return out;
  } catch (const json::exception& error) {
    throw std::runtime_error(std::string("invalid estimates file: ") + error.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view data) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + temp + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("failed to write '" + temp + "'");
  }
  std::filesystem::rename(temp, path);
}

}  // namespace treestat::io
