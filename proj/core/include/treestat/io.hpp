#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "treestat/estimate.hpp"
#include "treestat/types.hpp"

namespace treestat::io {

/// What a file looks like, judged from its leading bytes.
enum class InputKind { counts, stream, estimates, unknown };

InputKind sniff(std::string_view head);

/// Serializes counts as canonical JSON (sorted keys, round-trip floats);
/// output is byte-stable for identical inputs.
std::string counts_to_json(const CountSummary& counts);
CountSummary counts_from_json(std::string_view text);

void write_counts(const CountSummary& counts, const std::string& path);
CountSummary read_counts(const std::string& path);

std::string report_to_json(const estimator::EstimateReport& report);
std::string report_to_text(const estimator::EstimateReport& report);

/// Parses a file of pre-computed estimates for aggregate_and_classify.
std::vector<estimator::OrderEstimates> estimates_from_json(std::string_view text);

/// Reads a whole file into memory; throws std::runtime_error on failure.
std::string read_file(const std::string& path);

/// Writes a whole file atomically enough for our purposes (temp + rename).
void write_file(const std::string& path, std::string_view data);

}  // namespace treestat::io
