#include <ksvarm/selection.hpp>

#include <algorithm>
#include <cmath>

namespace ksvarm {

std::vector<std::vector<Index>> contiguous_folds(Index count, int folds) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    if (count < folds) throw Error(ErrorCode::InsufficientSamples, "fewer rows than folds");
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
    const Index base = count / folds;
    const Index extra = count % folds;
    Index start = 0;
    for (int f = 0; f < folds; ++f) {
        const Index len = base + (f < extra ? 1 : 0);
        for (Index t = start; t < start + len; ++t) out[static_cast<std::size_t>(f)].push_back(t);
        start += len;
    }
    return out;
}

namespace {

struct FoldData {
    std::vector<Index> train;
    std::vector<Index> test;
    KernelMatrixSet kms;
    Eigen::MatrixXd train_targets;
    Eigen::MatrixXd test_targets;
    std::vector<Eigen::MatrixXd> cross;  // per block: test x train
};

Eigen::VectorXd gather(const Eigen::Block<const Eigen::MatrixXd>& m, Index col, const std::vector<Index>& rows) {
    Eigen::VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) out(static_cast<Index>(t)) = m(rows[t], col);
    return out;
}

Eigen::MatrixXd gather_rows(const Eigen::Block<const Eigen::MatrixXd>& m, const std::vector<Index>& rows) {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t t = 0; t < rows.size(); ++t) out.row(static_cast<Index>(t)) = m.row(rows[t]);
    return out;
}

FoldData make_fold(const LagAlignedView& view, std::span<const KernelSpec> kernels, const GramOptions& opts,
                   std::vector<Index> test) {
    std::vector<Index> train;
    for (Index t = 0; t < view.effective_samples(); ++t)
        if (!std::binary_search(test.begin(), test.end(), t)) train.push_back(t);
    if (train.empty()) throw Error(ErrorCode::InsufficientSamples, "fold leaves no training rows");

    KernelMatrixSet kms = build_kernel_set(view, kernels, opts, train);
    std::vector<Eigen::MatrixXd> cross;
    cross.reserve(static_cast<std::size_t>(kms.block_count()));
    for (Index b = 0; b < kms.block_count(); ++b) {
        const auto& blk = kms.block(b);
        const auto lagged = view.lagged(blk.lag);
        cross.push_back(block_cross_gram(blk, gather(lagged, blk.node, test), gather(lagged, blk.node, train)));
    }
    Eigen::MatrixXd train_targets = gather_rows(view.target(), train);
    Eigen::MatrixXd test_targets = gather_rows(view.target(), test);
    return FoldData{std::move(train), std::move(test), std::move(kms), std::move(train_targets),
                    std::move(test_targets), std::move(cross)};
}

double held_out_error(const FoldData& fold, const CoefficientTensor& w) {
    const auto& kms = fold.kms;
    Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(fold.test_targets.rows(), kms.nodes());
    for (Index j = 0; j < kms.nodes(); ++j)
        for (Index b = 0; b < kms.block_count(); ++b) {
            const auto& a = w.block(j, b);
            if (!a.isZero(0.0)) pred.col(j).noalias() += fold.cross[static_cast<std::size_t>(b)] * a;
        }
    return (fold.test_targets - pred).squaredNorm() / static_cast<double>(pred.size());
}

} // namespace

CvResult cross_validate_lambda(const LagAlignedView& view, std::span<const KernelSpec> kernels,
                               const GramOptions& gram_options, const SolverConfig& base,
                               std::span<const double> grid, int folds) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "lambda grid must be non-empty");
    for (double l : grid)
        if (!(l >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda grid values must be nonnegative");

    std::vector<FoldData> data;
    for (auto& test : contiguous_folds(view.effective_samples(), folds))
        data.push_back(make_fold(view, kernels, gram_options, std::move(test)));

    CvResult result;
    bool first = true;
    double best_score = 0.0;
    for (double lambda : grid) {
        SolverConfig cfg = base;
        cfg.lambda = lambda;
        CvRow row;
        row.lambda = lambda;
        for (const auto& fold : data) {
            const CoefficientTensor w = fit_coefficients(fold.train_targets, fold.kms, cfg);
            row.fold_errors.push_back(held_out_error(fold, w));
        }
        double sum = 0.0;
        for (double e : row.fold_errors) sum += e;
        row.mean_error = sum / static_cast<double>(row.fold_errors.size());
        if (first || row.mean_error < best_score || (row.mean_error == best_score && lambda > result.best_lambda)) {
            best_score = row.mean_error;
            result.best_lambda = lambda;
            first = false;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

BicResult select_lag_bic(const TimeSeriesPanel& panel, std::span<const KernelSpec> kernels,
                         const GramOptions& gram_options, const SolverConfig& cfg, std::span<const int> candidates) {
    if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "lag candidates must be non-empty");
    const int max_lag = *std::max_element(candidates.begin(), candidates.end());
    for (int l : candidates) {
        if (l < 1) throw Error(ErrorCode::InvalidLag, "lag candidates must be >= 1");
        if (l >= panel.samples()) throw Error(ErrorCode::InsufficientSamples, "lag candidate must be < T");
    }

    SolverConfig ridge = cfg;
    ridge.regularizer = Regularizer::Squared;

    BicResult result;
    result.common_samples = panel.samples() - max_lag;
    bool first = true;
    double best_bic = 0.0;
    for (int lag : candidates) {
        const LagAlignedView view(panel, lag);
        std::vector<Index> rows;
        for (Index t = max_lag - lag; t < view.effective_samples(); ++t) rows.push_back(t);
        const KernelMatrixSet kms = build_kernel_set(view, kernels, gram_options, rows);
        const Eigen::MatrixXd targets = gather_rows(view.target(), rows);
        const CoefficientTensor w = ridge_fit(targets, kms, ridge);

        BicRow row;
        row.lag = lag;
        row.rss = (targets - predict(w, kms)).squaredNorm();
        row.dof = ridge_effective_dof(kms, ridge.lambda);
        const double n = static_cast<double>(targets.size());
        row.bic = n * std::log(std::max(row.rss, 1e-300) / n) + row.dof * std::log(n);
        if (first || row.bic < best_bic || (row.bic == best_bic && lag < result.best_lag)) {
            best_bic = row.bic;
            result.best_lag = lag;
        }
        result.rows.push_back(row);
        first = false;
    }
    return result;
}

} // namespace ksvarm
