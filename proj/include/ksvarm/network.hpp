#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include <ksvarm/core_model.hpp>

namespace ksvarm {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * Thresholded directed network.
 *
 * Entry (i, j) of lag l refers to the influence of source node i on target
 * node j. Weights are coefficient block norms; an entry is in the support iff
 * its weight is nonzero and at least the threshold.
 */
class EffectiveNetwork {
public:
    EffectiveNetwork(std::vector<Eigen::MatrixXd> weights, double threshold,
                     std::vector<std::string> labels = {});

    Index nodes() const noexcept { return nodes_; }
    int max_lag() const noexcept { return static_cast<int>(weights_.size()) - 1; }
    double threshold() const noexcept { return threshold_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    const Eigen::MatrixXd& weights(int lag) const { return weights_.at(static_cast<std::size_t>(lag)); }
    const BoolMatrix& support(int lag) const { return support_.at(static_cast<std::size_t>(lag)); }
    bool edge(Index source, Index target, int lag) const { return support(lag)(source, target); }

    /// Edge i -> j iff active at some lag.
    BoolMatrix aggregate() const;
    /// max over lags of the weight; the ranking score used for ROC sweeps.
    Eigen::MatrixXd aggregate_weights() const;
    Index edge_count() const;

    bool operator==(const EffectiveNetwork& other) const;

private:
    Index nodes_;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<BoolMatrix> support_;
    double threshold_;
    std::vector<std::string> labels_;
};

/// Network from an explicit support; weights are 1 on the support.
EffectiveNetwork network_from_support(const std::vector<BoolMatrix>& support, std::vector<std::string> labels = {});

} // namespace ksvarm
