#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include <ksvarm/core_model.hpp>
#include <ksvarm/network.hpp>

namespace ksvarm {

enum class Coupling { Linear, Quadratic, Sigmoid };

Coupling parse_coupling(const std::string& text);
std::string to_string(Coupling c);

/// Link function f applied to a source value: y, y^2 or tanh(y).
double apply_coupling(Coupling c, double y);

struct SynthConfig {
    Index nodes = 8;
    Index samples = 500;
    int lag = 1;
    double edge_density = 0.15;
    Coupling coupling = Coupling::Linear;
    double coefficient_scale = 1.0;
    NoiseModel noise{};
    std::uint64_t seed = 0;
    int burn_in = 200;
    double sample_rate_hz = 1.0;
    double max_spectral_radius = 0.9;
};

void validate(const SynthConfig& cfg);

/**
 * Ground-truth coefficients. Entry (i, j) of coefficients[l] is the weight of
 * source i on target j at lag l. Instantaneous edges only point from earlier
 * to later nodes of `order`, so the contemporaneous system is triangular.
 */
struct SynthTruth {
    std::vector<Eigen::MatrixXd> coefficients;
    std::vector<Index> order;
    Coupling coupling = Coupling::Linear;

    Index nodes() const { return coefficients.front().rows(); }
    int max_lag() const { return static_cast<int>(coefficients.size()) - 1; }
    std::vector<BoolMatrix> support() const;
    BoolMatrix aggregate_support() const;
    EffectiveNetwork network(std::vector<std::string> labels = {}) const;
};

/**
 * Spectral radius of the companion matrix of the lagged recursion after the
 * instantaneous part is solved out. For nonlinear couplings entries are
 * replaced by |a| times the largest slope of f on [-1, 1].
 */
double companion_spectral_radius(const SynthTruth& truth);

SynthTruth generate_truth(const SynthConfig& cfg);

/// Simulates cfg.samples rows after discarding cfg.burn_in. The first L rows
/// are noise draws (standard normal when the noise variance is zero).
TimeSeriesPanel simulate(const SynthTruth& truth, const SynthConfig& cfg);

struct RecoveryScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    Index true_positives = 0;
    Index false_positives = 0;
    Index false_negatives = 0;
};

/**
 * Compares aggregate supports (edge i -> j if active at any lag). Precision
 * is 1 when nothing is predicted; recall is 1 when the truth is empty. The
 * AUC ranks every candidate pair by its largest weight across lags, which is
 * the area under the ROC curve traced by sweeping the threshold; it is 0.5
 * when one class is empty.
 */
RecoveryScore score_recovery(const EffectiveNetwork& estimate, const SynthTruth& truth);
RecoveryScore score_recovery(const EffectiveNetwork& estimate, const BoolMatrix& truth_aggregate);

/// Mann-Whitney form of the ROC area, ties counted as one half.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

} // namespace ksvarm
