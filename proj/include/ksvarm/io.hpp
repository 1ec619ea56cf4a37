#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include <ksvarm/core_model.hpp>
#include <ksvarm/graph_metrics.hpp>
#include <ksvarm/mkl.hpp>
#include <ksvarm/network.hpp>
#include <ksvarm/synth.hpp>

namespace ksvarm {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/**
 * Panel CSV: a header row of node labels followed by one row of values per
 * sample. The sampling rate comes from `rate_hz` when given, otherwise from
 * the sidecar `<path>.json` ({"sample_rate_hz": ...}).
 */
TimeSeriesPanel read_panel_csv(const std::filesystem::path& path, std::optional<double> rate_hz = std::nullopt);
/// Writes the CSV and its sidecar.
void write_panel_csv(const std::filesystem::path& path, const TimeSeriesPanel& panel);

/**
 * Edge list: {schema_version, nodes, lags, threshold, edges, subthreshold}.
 * `edges` holds the active (src, dst, lag, weight) entries; nonzero weights
 * below the threshold go to `subthreshold` so a reload is exact.
 */
Json network_to_json(const EffectiveNetwork& net);
EffectiveNetwork network_from_json(const Json& j);

Json truth_to_json(const SynthTruth& truth, const std::vector<std::string>& labels);
SynthTruth truth_from_json(const Json& j);

Json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const Json& j);
/// One row per node plus a final global row; unused cells are empty.
std::string metrics_to_csv(const MetricsReport& report);

std::string attribution_to_csv(const std::vector<KernelAttribution>& rows, const std::vector<std::string>& labels);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; creates parent directories.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace ksvarm
