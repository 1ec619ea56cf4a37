#include <ksvarm/core_model.hpp>

#include <cmath>
#include <set>

namespace ksvarm {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidLag: return "InvalidLag";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

TimeSeriesPanel::TimeSeriesPanel(Eigen::MatrixXd values,
                                 std::vector<std::string> node_labels,
                                 double sample_rate_hz)
    : values_(std::move(values)), labels_(std::move(node_labels)), rate_(sample_rate_hz) {
    if (values_.rows() < 2)
        throw Error(ErrorCode::InsufficientSamples, "panel needs at least 2 samples");
    if (values_.cols() < 2)
        throw Error(ErrorCode::InvalidArgument, "panel needs at least 2 nodes");
    if (!(rate_ > 0.0) || !std::isfinite(rate_))
        throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    if (!values_.allFinite())
        throw Error(ErrorCode::NonFinite, "panel contains non-finite values");
    if (static_cast<Index>(labels_.size()) != values_.cols())
        throw Error(ErrorCode::ShapeMismatch, "one label per node required");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size())
        throw Error(ErrorCode::InvalidArgument, "node labels must be unique");
}

TimeSeriesPanel TimeSeriesPanel::with_default_labels(Eigen::MatrixXd values, double sample_rate_hz) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(values.cols()));
    for (Index i = 0; i < values.cols(); ++i) labels.push_back("n" + std::to_string(i));
    return TimeSeriesPanel(std::move(values), std::move(labels), sample_rate_hz);
}

TimeSeriesPanel TimeSeriesPanel::slice(Index first, Index count) const {
    if (first < 0 || count < 0 || first + count > samples())
        throw Error(ErrorCode::InvalidArgument, "slice out of range");
    return TimeSeriesPanel(values_.middleRows(first, count), labels_, rate_);
}

TimeSeriesPanel standardize(const TimeSeriesPanel& panel) {
    const auto& y = panel.values();
    Eigen::MatrixXd out(y.rows(), y.cols());
    const double n = static_cast<double>(y.rows());
    for (Index j = 0; j < y.cols(); ++j) {
        const double mean = y.col(j).mean();
        Eigen::VectorXd centered = y.col(j).array() - mean;
        const double var = centered.squaredNorm() / n;
        const double scale = std::max(std::abs(mean), y.col(j).cwiseAbs().maxCoeff());
        if (!(var > 1e-24 * std::max(1.0, scale * scale)))
            throw Error(ErrorCode::ConstantColumn, "constant column: " + panel.labels()[static_cast<std::size_t>(j)]);
        out.col(j) = centered / std::sqrt(var);
    }
    return TimeSeriesPanel(std::move(out), panel.labels(), panel.sample_rate_hz());
}

namespace {

struct WindowGeometry {
    Index length;
    Index step;
};

WindowGeometry window_geometry(const TimeSeriesPanel& panel, const SegmentationConfig& cfg) {
    if (!(cfg.window_len_s > 0.0) || !(cfg.overlap_s >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "window must be positive and overlap nonnegative");
    if (!(cfg.overlap_s < cfg.window_len_s))
        throw Error(ErrorCode::InvalidArgument, "overlap must be shorter than the window");
    const double fs = panel.sample_rate_hz();
    const auto length = static_cast<Index>(std::llround(cfg.window_len_s * fs));
    const auto step = static_cast<Index>(std::llround((cfg.window_len_s - cfg.overlap_s) * fs));
    if (length < 2)
        throw Error(ErrorCode::InvalidArgument, "window shorter than 2 samples");
    if (step < 1)
        throw Error(ErrorCode::InvalidArgument, "window step shorter than 1 sample");
    if (length > panel.samples())
        throw Error(ErrorCode::WindowTooLong, "window exceeds panel duration");
    return {length, step};
}

} // namespace

std::vector<Index> segment_starts(const TimeSeriesPanel& panel, const SegmentationConfig& cfg) {
    const auto geo = window_geometry(panel, cfg);
    std::vector<Index> starts;
    for (Index s = 0; s + geo.length <= panel.samples(); s += geo.step) starts.push_back(s);
    return starts;
}

std::size_t segment_count(const TimeSeriesPanel& panel, const SegmentationConfig& cfg) {
    return segment_starts(panel, cfg).size();
}

std::vector<TimeSeriesPanel> segment(const TimeSeriesPanel& panel, const SegmentationConfig& cfg) {
    const auto geo = window_geometry(panel, cfg);
    std::vector<TimeSeriesPanel> out;
    for (Index s : segment_starts(panel, cfg)) out.push_back(panel.slice(s, geo.length));
    return out;
}

LagAlignedView::LagAlignedView(const TimeSeriesPanel& panel, int max_lag)
    : values_(panel.values()), labels_(panel.labels()), max_lag_(max_lag) {
    if (max_lag < 1) throw Error(ErrorCode::InvalidLag, "lag order L >= 1 required");
    if (panel.samples() <= max_lag)
        throw Error(ErrorCode::InsufficientSamples, "need T > L samples");
}

Eigen::Block<const Eigen::MatrixXd> LagAlignedView::target() const {
    return values_.middleRows(max_lag_, effective_samples());
}

Eigen::Block<const Eigen::MatrixXd> LagAlignedView::lagged(int lag) const {
    if (lag < 0 || lag > max_lag_) throw Error(ErrorCode::InvalidLag, "lag outside 0..L");
    return values_.middleRows(max_lag_ - lag, effective_samples());
}

Eigen::VectorXd LagAlignedView::regressor(Index node, int lag) const {
    return lagged(lag).col(node);
}

LagAlignedView lag_view(const TimeSeriesPanel& panel, LagOrder lag) {
    if (panel.samples() <= lag.value)
        throw Error(ErrorCode::InsufficientSamples, "need T > L samples");
    return LagAlignedView(panel, lag.value);
}

} // namespace ksvarm
