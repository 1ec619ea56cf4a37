#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <ksvarm/error.hpp>

namespace ksvarm {

using Index = Eigen::Index;

/**
 * Multivariate observations: rows are time samples, columns are nodes.
 *
 * Construction validates the invariants (at least two samples and two nodes,
 * finite values, unique labels, positive sampling rate); instances are
 * immutable afterwards.
 */
class TimeSeriesPanel {
public:
    TimeSeriesPanel(Eigen::MatrixXd values,
                    std::vector<std::string> node_labels,
                    double sample_rate_hz);

    /// Labels default to "n0", "n1", ...
    static TimeSeriesPanel with_default_labels(Eigen::MatrixXd values, double sample_rate_hz);

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    double sample_rate_hz() const noexcept { return rate_; }

    Index samples() const noexcept { return values_.rows(); }
    Index nodes() const noexcept { return values_.cols(); }
    double duration_s() const noexcept { return static_cast<double>(samples()) / rate_; }

    /// Rows [first, first + count) as a new panel with the same labels and rate.
    TimeSeriesPanel slice(Index first, Index count) const;

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> labels_;
    double rate_;
};

struct LagOrder {
    int value = 1;
};

struct SegmentationConfig {
    double window_len_s = 0.5;
    double overlap_s = 0.0;
};

enum class NoiseDistribution { Gaussian };

struct NoiseModel {
    double variance = 0.01;
    NoiseDistribution distribution = NoiseDistribution::Gaussian;
};

/// Column-wise z-scoring (population variance). Throws ConstantColumn.
TimeSeriesPanel standardize(const TimeSeriesPanel& panel);

/// Number of windows segment() would produce, without copying data.
std::size_t segment_count(const TimeSeriesPanel& panel, const SegmentationConfig& cfg);

/// Window start offsets in samples.
std::vector<Index> segment_starts(const TimeSeriesPanel& panel, const SegmentationConfig& cfg);

/// Fixed-length windows starting every (window - overlap) seconds; the
/// trailing partial window is dropped. Throws WindowTooLong.
std::vector<TimeSeriesPanel> segment(const TimeSeriesPanel& panel, const SegmentationConfig& cfg);

/**
 * Lag-aligned view of a panel for a lag order L >= 1.
 *
 * Target rows are t = L, ..., T-1 (0-based), so T' = T - L. The lag-l slice
 * holds y_{t-l} for every target row t; the first L samples only ever appear
 * as regressors.
 */
class LagAlignedView {
public:
    LagAlignedView(const TimeSeriesPanel& panel, int max_lag);

    int max_lag() const noexcept { return max_lag_; }
    Index effective_samples() const noexcept { return values_.rows() - max_lag_; }
    Index nodes() const noexcept { return values_.cols(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    /// T' x N matrix of targets.
    Eigen::Block<const Eigen::MatrixXd> target() const;
    /// T' x N matrix of y_{t-lag}, aligned with target().
    Eigen::Block<const Eigen::MatrixXd> lagged(int lag) const;
    /// Column `node` of lagged(lag).
    Eigen::VectorXd regressor(Index node, int lag) const;
    /// Full (unaligned) series of one node.
    Eigen::VectorXd series(Index node) const { return values_.col(node); }

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> labels_;
    int max_lag_;
};

/// Throws InvalidLag when L < 1 and InsufficientSamples when T <= L.
LagAlignedView lag_view(const TimeSeriesPanel& panel, LagOrder lag);

} // namespace ksvarm
