#include <ksvarm/synth.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace ksvarm {

Coupling parse_coupling(const std::string& text) {
    if (text == "linear") return Coupling::Linear;
    if (text == "quadratic") return Coupling::Quadratic;
    if (text == "sigmoid") return Coupling::Sigmoid;
    throw Error(ErrorCode::ParseError, "unknown coupling: " + text);
}

std::string to_string(Coupling c) {
    switch (c) {
    case Coupling::Linear: return "linear";
    case Coupling::Quadratic: return "quadratic";
    case Coupling::Sigmoid: return "sigmoid";
    }
    return "linear";
}

double apply_coupling(Coupling c, double y) {
    switch (c) {
    case Coupling::Linear: return y;
    case Coupling::Quadratic: return y * y;
    case Coupling::Sigmoid: return std::tanh(y);
    }
    return y;
}

namespace {

double coupling_gain(Coupling c) { return c == Coupling::Quadratic ? 2.0 : 1.0; }

Index round_count(double x) { return static_cast<Index>(std::llround(x)); }

} // namespace

void validate(const SynthConfig& cfg) {
    if (cfg.nodes < 2) throw Error(ErrorCode::InvalidArgument, "synth needs at least 2 nodes");
    if (cfg.lag < 1) throw Error(ErrorCode::InvalidLag, "synth lag must be >= 1");
    if (!(cfg.edge_density > 0.0 && cfg.edge_density <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "edge density must lie in (0, 1]");
    if (cfg.edge_density * static_cast<double>(cfg.nodes * (cfg.nodes - 1)) < 1.0)
        throw Error(ErrorCode::InvalidArgument, "edge density too small for this many nodes");
    if (cfg.samples <= 10 * cfg.lag) throw Error(ErrorCode::InsufficientSamples, "synth needs T > 10 L");
    if (!(cfg.coefficient_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "coefficient scale must be positive");
    if (!(cfg.noise.variance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise variance must be nonnegative");
    if (cfg.burn_in < 0) throw Error(ErrorCode::InvalidArgument, "burn-in must be nonnegative");
    if (!(cfg.sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    if (!(cfg.max_spectral_radius > 0.0 && cfg.max_spectral_radius < 1.0))
        throw Error(ErrorCode::InvalidArgument, "spectral radius bound must lie in (0, 1)");
}

std::vector<BoolMatrix> SynthTruth::support() const {
    std::vector<BoolMatrix> out;
    for (const auto& a : coefficients) out.push_back((a.array() != 0.0).matrix());
    return out;
}

BoolMatrix SynthTruth::aggregate_support() const {
    BoolMatrix agg = BoolMatrix::Constant(nodes(), nodes(), false);
    for (const auto& s : support()) agg = (agg.array() || s.array()).matrix();
    return agg;
}

EffectiveNetwork SynthTruth::network(std::vector<std::string> labels) const {
    std::vector<Eigen::MatrixXd> w;
    for (const auto& a : coefficients) w.push_back(a.cwiseAbs());
    return EffectiveNetwork(std::move(w), 0.0, std::move(labels));
}

double companion_spectral_radius(const SynthTruth& truth) {
    const Index n = truth.nodes();
    const int lags = truth.max_lag();
    const bool linear = truth.coupling == Coupling::Linear;
    const double g = coupling_gain(truth.coupling);
    auto effective = [&](const Eigen::MatrixXd& a) -> Eigen::MatrixXd {
        return linear ? Eigen::MatrixXd(a.transpose()) : Eigen::MatrixXd(g * a.cwiseAbs().transpose());
    };
    // y_t = A0^T f(y_t) + sum_l Al^T f(y_{t-l}); A0 is nilpotent so I - A0^T is invertible.
    const Eigen::MatrixXd inst = Eigen::MatrixXd::Identity(n, n) - effective(truth.coefficients[0]);
    const auto lu = inst.partialPivLu();
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n * lags, n * lags);
    for (int l = 1; l <= lags; ++l) comp.block(0, (l - 1) * n, n, n) = lu.solve(effective(truth.coefficients[l]));
    if (lags > 1) comp.block(n, 0, n * (lags - 1), n * (lags - 1)).setIdentity();
    return comp.eigenvalues().cwiseAbs().maxCoeff();
}

SynthTruth generate_truth(const SynthConfig& cfg) {
    validate(cfg);
    const Index n = cfg.nodes;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> magnitude(0.5, 1.0);
    std::bernoulli_distribution sign(0.5);
    auto draw = [&] { return (sign(rng) ? 1.0 : -1.0) * magnitude(rng) * cfg.coefficient_scale; };

    SynthTruth truth;
    truth.coupling = cfg.coupling;
    truth.order.resize(static_cast<std::size_t>(n));
    std::iota(truth.order.begin(), truth.order.end(), Index{0});
    std::shuffle(truth.order.begin(), truth.order.end(), rng);

    // Instantaneous edges: source earlier than target in `order`.
    std::vector<std::pair<Index, Index>> pairs;
    for (Index a = 0; a < n; ++a)
        for (Index b = a + 1; b < n; ++b)
            pairs.emplace_back(truth.order[static_cast<std::size_t>(a)], truth.order[static_cast<std::size_t>(b)]);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto inst_edges = static_cast<std::size_t>(
        std::clamp<Index>(round_count(cfg.edge_density * static_cast<double>(pairs.size())), 0,
                          static_cast<Index>(pairs.size())));
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t e = 0; e < inst_edges; ++e) a0(pairs[e].first, pairs[e].second) = draw();
    truth.coefficients.push_back(a0);

    std::vector<std::pair<Index, Index>> all;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) all.emplace_back(i, j);
    const auto lag_edges = static_cast<std::size_t>(
        std::clamp<Index>(round_count(cfg.edge_density * static_cast<double>(n * n)), 1, n * n));
    for (int l = 1; l <= cfg.lag; ++l) {
        std::shuffle(all.begin(), all.end(), rng);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t e = 0; e < lag_edges; ++e) a(all[e].first, all[e].second) = draw();
        truth.coefficients.push_back(a);
    }

    // Scaling lag l by c^l scales every companion eigenvalue by c.
    const double radius = companion_spectral_radius(truth);
    if (radius > cfg.max_spectral_radius) {
        const double c = cfg.max_spectral_radius / radius;
        for (int l = 1; l <= cfg.lag; ++l) truth.coefficients[static_cast<std::size_t>(l)] *= std::pow(c, l);
    }
    return truth;
}

TimeSeriesPanel simulate(const SynthTruth& truth, const SynthConfig& cfg) {
    validate(cfg);
    const Index n = truth.nodes();
    const int lags = truth.max_lag();
    if (n != cfg.nodes || lags != cfg.lag) throw Error(ErrorCode::ShapeMismatch, "truth does not match config");

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const double sd = std::sqrt(cfg.noise.variance);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Index total = cfg.burn_in + cfg.samples;
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(total, n);
    const double init_sd = sd > 0.0 ? sd : 1.0;
    for (Index t = 0; t < std::min<Index>(lags, total); ++t)
        for (Index j = 0; j < n; ++j) y(t, j) = init_sd * normal(rng);

    Eigen::VectorXd f(n);
    for (Index t = lags; t < total; ++t) {
        Eigen::RowVectorXd row(n);
        for (Index j = 0; j < n; ++j) row(j) = sd * normal(rng);
        for (int l = 1; l <= lags; ++l) {
            for (Index i = 0; i < n; ++i) f(i) = apply_coupling(truth.coupling, y(t - l, i));
            row.noalias() += f.transpose() * truth.coefficients[static_cast<std::size_t>(l)];
        }
        for (Index j : truth.order) {
            double v = row(j);
            for (Index i = 0; i < n; ++i) {
                const double a = truth.coefficients[0](i, j);
                if (a != 0.0) v += a * apply_coupling(truth.coupling, row(i));
            }
            row(j) = v;
        }
        if (!row.allFinite() || row.cwiseAbs().maxCoeff() > 1e100)
            throw Error(ErrorCode::NonFinite, "simulated trajectory diverged at step " + std::to_string(t));
        y.row(t) = row;
    }
    return TimeSeriesPanel::with_default_labels(y.bottomRows(cfg.samples), cfg.sample_rate_hz);
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos = 0.0;
    double neg = 0.0;
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t e = k;
        while (e < idx.size() && scores[idx[e]] == scores[idx[k]]) ++e;
        const double mid = 0.5 * static_cast<double>(k + 1 + e);  // average 1-based rank
        for (std::size_t m = k; m < e; ++m) {
            if (labels[idx[m]]) {
                rank_sum += mid;
                pos += 1.0;
            } else {
                neg += 1.0;
            }
        }
        k = e;
    }
    if (pos == 0.0 || neg == 0.0) return 0.5;
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

RecoveryScore score_recovery(const EffectiveNetwork& estimate, const BoolMatrix& truth) {
    const Index n = estimate.nodes();
    if (truth.rows() != n || truth.cols() != n) throw Error(ErrorCode::ShapeMismatch, "node counts differ");
    const BoolMatrix est = estimate.aggregate();
    const Eigen::MatrixXd w = estimate.aggregate_weights();

    RecoveryScore s;
    std::vector<double> scores;
    std::vector<bool> labels;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            // A self-pair can only carry a lagged edge.
            if (i == j && estimate.max_lag() == 0) continue;
            const bool t = truth(i, j);
            const bool e = est(i, j);
            s.true_positives += (t && e);
            s.false_positives += (!t && e);
            s.false_negatives += (t && !e);
            scores.push_back(w(i, j));
            labels.push_back(t);
        }
    const double tp = static_cast<double>(s.true_positives);
    const Index predicted = s.true_positives + s.false_positives;
    const Index actual = s.true_positives + s.false_negatives;
    s.precision = predicted == 0 ? 1.0 : tp / static_cast<double>(predicted);
    s.recall = actual == 0 ? 1.0 : tp / static_cast<double>(actual);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.auc = roc_auc(scores, labels);
    return s;
}

RecoveryScore score_recovery(const EffectiveNetwork& estimate, const SynthTruth& truth) {
    return score_recovery(estimate, truth.aggregate_support());
}

} // namespace ksvarm
