#pragma once

#include <span>
#include <vector>

#include <ksvarm/kernels.hpp>
#include <ksvarm/solver.hpp>

namespace ksvarm {

struct CvRow {
    double lambda = 0.0;
    std::vector<double> fold_errors;
    double mean_error = 0.0;
};

struct CvResult {
    double best_lambda = 0.0;
    std::vector<CvRow> rows;
};

/// Contiguous, unshuffled partition of `count` rows into `folds` blocks whose
/// sizes differ by at most one.
std::vector<std::vector<Index>> contiguous_folds(Index count, int folds);

/**
 * Chooses lambda by K-fold cross-validation over contiguous blocks of target
 * rows. Each fold refits on the remaining rows and scores the mean squared
 * one-step prediction error on the held-out block. Ties go to the larger
 * lambda.
 */
CvResult cross_validate_lambda(const LagAlignedView& view, std::span<const KernelSpec> kernels,
                               const GramOptions& gram_options, const SolverConfig& base,
                               std::span<const double> grid, int folds);

struct BicRow {
    int lag = 0;
    double rss = 0.0;
    double dof = 0.0;
    double bic = 0.0;
};

struct BicResult {
    int best_lag = 0;
    Index common_samples = 0;
    std::vector<BicRow> rows;
};

/**
 * Lag-order selection with a ridge fit per candidate, all scored on the same
 * target rows (t >= max candidate). BIC = n log(RSS / n) + dof log(n) with
 * n = T' N and dof the trace of the ridge hat matrix. Ties go to the smaller
 * lag.
 */
BicResult select_lag_bic(const TimeSeriesPanel& panel, std::span<const KernelSpec> kernels,
                         const GramOptions& gram_options, const SolverConfig& cfg, std::span<const int> candidates);

} // namespace ksvarm
