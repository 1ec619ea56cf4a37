#include <ksvarm/network.hpp>

namespace ksvarm {

EffectiveNetwork::EffectiveNetwork(std::vector<Eigen::MatrixXd> weights, double threshold,
                                   std::vector<std::string> labels)
    : nodes_(weights.empty() ? 0 : weights.front().rows()),
      weights_(std::move(weights)),
      threshold_(threshold),
      labels_(std::move(labels)) {
    if (weights_.empty()) throw Error(ErrorCode::ShapeMismatch, "network needs at least one lag");
    if (!(threshold_ >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be nonnegative");
    for (const auto& w : weights_) {
        if (w.rows() != nodes_ || w.cols() != nodes_)
            throw Error(ErrorCode::ShapeMismatch, "weight matrices must be N x N");
        if (!w.allFinite() || (w.array() < 0.0).any())
            throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
    }
    for (Index i = 0; i < nodes_; ++i) weights_[0](i, i) = 0.0;
    if (labels_.empty())
        for (Index i = 0; i < nodes_; ++i) labels_.push_back("n" + std::to_string(i));
    if (static_cast<Index>(labels_.size()) != nodes_)
        throw Error(ErrorCode::ShapeMismatch, "one label per node required");
    for (const auto& w : weights_)
        support_.push_back((w.array() > 0.0 && w.array() >= threshold_).matrix());
}

BoolMatrix EffectiveNetwork::aggregate() const {
    BoolMatrix agg = BoolMatrix::Constant(nodes_, nodes_, false);
    for (const auto& s : support_) agg = (agg.array() || s.array()).matrix();
    return agg;
}

Eigen::MatrixXd EffectiveNetwork::aggregate_weights() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nodes_, nodes_);
    for (const auto& w : weights_) out = out.cwiseMax(w);
    return out;
}

Index EffectiveNetwork::edge_count() const {
    Index n = 0;
    for (const auto& s : support_) n += s.count();
    return n;
}

bool EffectiveNetwork::operator==(const EffectiveNetwork& other) const {
    if (nodes_ != other.nodes_ || weights_.size() != other.weights_.size() || threshold_ != other.threshold_ ||
        labels_ != other.labels_)
        return false;
    for (std::size_t l = 0; l < weights_.size(); ++l)
        if (weights_[l] != other.weights_[l]) return false;
    return true;
}

EffectiveNetwork network_from_support(const std::vector<BoolMatrix>& support, std::vector<std::string> labels) {
    std::vector<Eigen::MatrixXd> weights;
    for (const auto& s : support) weights.push_back(s.cast<double>());
    return EffectiveNetwork(std::move(weights), 0.0, std::move(labels));
}

} // namespace ksvarm
