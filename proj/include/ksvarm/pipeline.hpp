#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <ksvarm/graph_metrics.hpp>
#include <ksvarm/io.hpp>
#include <ksvarm/selection.hpp>
#include <ksvarm/solver.hpp>

namespace ksvarm {

inline constexpr const char* kToolVersion = "0.1.0";

enum class AggregateMode { None, Union, Majority };

struct PipelineConfig {
    std::filesystem::path input;
    std::optional<double> sample_rate_hz;
    SegmentationConfig segmentation{};
    bool standardize = true;

    std::optional<int> lag = 1;
    std::vector<int> lag_candidates;

    std::optional<std::string> kernel = std::string("poly:d=2,c=1");
    std::vector<std::string> dictionary;
    GramOptions gram{};

    SolverConfig solver{};
    /// Fixed lambda; leave empty when a CV grid is given.
    std::optional<double> lambda = 0.1;
    std::vector<double> lambda_grid;
    int folds = 5;

    std::filesystem::path output_dir = "ksvarm_out";
    AggregateMode aggregate = AggregateMode::None;
    /// Minimum number of segments an edge must appear in (majority mode).
    int majority_k = 0;
    int segment_threads = 1;
    std::uint64_t seed = 0;
};

/// Throws ConfigError on contradictory or missing settings.
void validate(const PipelineConfig& cfg);

Json pipeline_config_to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults. Setting "lambda_grid" clears the default
/// fixed lambda and setting "dictionary" clears the default kernel, unless the
/// same document also sets them explicitly (which then fails validation).
PipelineConfig pipeline_config_from_json(const Json& j);

struct SegmentResult {
    std::size_t index = 0;
    Index start_sample = 0;
    Index samples = 0;
    int lag = 0;
    double lambda = 0.0;
    FitDiagnostics diagnostics;
    EffectiveNetwork network;
    MetricsReport metrics;
};

struct PipelineResult {
    std::vector<SegmentResult> segments;
    std::optional<EffectiveNetwork> aggregate;
};

/**
 * Per segment: standardize, pick L and lambda, fit, threshold, compute
 * metrics, and write segments/seg_NNN/{edges.json, metrics.json,
 * metrics.csv, diagnostics.ndjson, selection.json[, attribution.csv]}.
 * Afterwards writes the optional aggregate network and manifest.json, the
 * only file carrying a timestamp. On failure error.json is written, the
 * manifest is marked "failed" and the error is rethrown.
 */
PipelineResult run_pipeline(const PipelineConfig& cfg);
/// Same, on an already loaded panel (cfg.input is only echoed).
PipelineResult run_pipeline(const PipelineConfig& cfg, const TimeSeriesPanel& panel);

/// Edge (i, j, l) kept iff it is active in at least `min_count` networks.
EffectiveNetwork aggregate_networks(const std::vector<EffectiveNetwork>& nets, int min_count);

struct NodeAverage {
    double in_degree = 0.0;
    double out_degree = 0.0;
    double total_degree = 0.0;
    double betweenness = 0.0;
    double closeness = 0.0;
    double clustering = 0.0;
};

/// Metrics averaged over the segments of one run.
struct MetricsAverage {
    std::vector<std::string> labels;
    std::size_t count = 0;
    std::vector<NodeAverage> nodes;
    std::vector<std::pair<std::string, double>> global;
};

MetricsAverage average_metrics(const std::vector<MetricsReport>& reports);

struct NodeDelta {
    std::string label;
    NodeAverage a;
    NodeAverage b;
    NodeAverage delta;
};

struct GlobalRow {
    std::string metric;
    double a = 0.0;
    double b = 0.0;
    double delta = 0.0;
};

struct ComparisonReport {
    std::vector<std::string> labels;
    std::size_t segments_a = 0;
    std::size_t segments_b = 0;
    /// Averages over segments, deltas are a - b.
    std::vector<NodeDelta> nodes;
    std::vector<GlobalRow> global;
};

/// Segment-averaged metrics of a run directory (manifest.json) or of a
/// directory holding a single metrics.json.
MetricsAverage load_run_metrics(const std::filesystem::path& dir);

ComparisonReport compare_metrics(const MetricsAverage& a, const MetricsAverage& b);
/// Throws LabelMismatch when the runs disagree on node labels.
ComparisonReport compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);

Json comparison_to_json(const ComparisonReport& r);
/// Table-shaped global comparison: metric,a,b,delta.
std::string comparison_global_csv(const ComparisonReport& r);
std::string comparison_nodes_csv(const ComparisonReport& r);

} // namespace ksvarm
