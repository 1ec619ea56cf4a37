#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include <ksvarm/core_model.hpp>

namespace ksvarm {

enum class KernelKind { Linear, Polynomial, Gaussian };

/**
 * Scalar reproducing kernel.
 *
 *   linear      k(y, psi) = y * psi
 *   polynomial  k(y, psi) = (y * psi + offset)^degree
 *   gaussian    k(y, psi) = exp(-(y - psi)^2 / (2 sigma^2))
 *
 * A gaussian spec without sigma means "median heuristic"; it must be resolved
 * against a series (resolve_bandwidth) before evaluation.
 */
struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    int degree = 2;
    double offset = 1.0;
    std::optional<double> sigma;

    static KernelSpec linear() { return {}; }
    static KernelSpec polynomial(int degree, double offset = 1.0) {
        return {KernelKind::Polynomial, degree, offset, std::nullopt};
    }
    static KernelSpec gaussian(double sigma) { return {KernelKind::Gaussian, 2, 1.0, sigma}; }
    static KernelSpec gaussian_median() { return {KernelKind::Gaussian, 2, 1.0, std::nullopt}; }

    bool operator==(const KernelSpec& other) const;
};

/// Accepts `linear`, `poly:d=2,c=1`, `gaussian:sigma=0.7`, `gaussian:sigma=median`.
KernelSpec parse_kernel_spec(std::string_view text);
std::string to_string(const KernelSpec& spec);
void validate(const KernelSpec& spec);

double eval_kernel(const KernelSpec& spec, double y, double psi);

/// Explicit finite feature map (linear and polynomial kernels): k(y, psi) = phi(y) . phi(psi).
bool has_feature_map(const KernelSpec& spec);
Eigen::MatrixXd feature_map(const KernelSpec& spec, const Eigen::VectorXd& x);

/// K(t, tau) = k(x_t, x_tau).
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::VectorXd& x);
/// K(t, tau) = k(rows_t, cols_tau).
Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::VectorXd& rows, const Eigen::VectorXd& cols);

/// Gram of node `node` at lag `lag` over the view's target rows:
/// K(t, tau) = k(y_{node, t-lag}, y_{node, tau-lag}).
Eigen::MatrixXd build_gram(const KernelSpec& spec, const LagAlignedView& view, Index node, int lag);

/// Symmetric square root after clamping eigenvalues below eps up to eps.
/// Throws NotSymmetric when |K - K^T| exceeds 1e-10 (relative to max |K|, floor 1).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& k, double eps);

/// Median pairwise absolute difference over at most 1000 pairs (sampled with
/// `seed` when the series is longer). Falls back to the median of nonzero
/// differences when ties make the plain median zero. Throws DegenerateSeries.
double median_bandwidth(const Eigen::VectorXd& series, std::uint64_t seed = 0);

/// Fills in a median-heuristic sigma; other specs pass through.
KernelSpec resolve_bandwidth(const KernelSpec& spec, const Eigen::VectorXd& series, std::uint64_t seed = 0);

/// Candidate kernels plus optional simplex weights (reporting only).
class KernelDictionary {
public:
    explicit KernelDictionary(std::vector<KernelSpec> kernels,
                              std::optional<std::vector<double>> weights = std::nullopt);

    const std::vector<KernelSpec>& kernels() const noexcept { return kernels_; }
    const std::optional<std::vector<double>>& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return kernels_.size(); }

private:
    std::vector<KernelSpec> kernels_;
    std::optional<std::vector<double>> weights_;
};

/**
 * One Gram block K_i^l (for kernel p) together with its thin eigenbasis.
 *
 * Eigenvalues at or below the floor jitter * trace(K) / T' are treated as zero
 * and dropped, so `gram == basis * diag(eigenvalues) * basis^T` holds by
 * construction. Coefficient vectors are kept in range(basis) (minimum-norm).
 */
struct GramFactor {
    int lag = 0;
    Index node = 0;
    int kernel = 0;
    KernelSpec spec;          // resolved; used for cross-grams
    double scale = 1.0;       // multiplier applied to raw kernel values
    Eigen::MatrixXd gram;     // repaired, scaled
    Eigen::MatrixXd basis;    // T' x r
    Eigen::VectorXd eigenvalues;

    Index rank() const noexcept { return eigenvalues.size(); }
    Eigen::MatrixXd sqrt() const;
};

/// Repairs and factors a raw symmetric Gram matrix.
GramFactor factor_gram(const Eigen::MatrixXd& k, double jitter);
/// Same, from an explicit feature matrix Phi with K = Phi Phi^T.
GramFactor factor_features(const Eigen::MatrixXd& phi, double jitter);

struct GramOptions {
    double jitter = 1e-10;
    /// Rescale each block to unit mean diagonal so kernels of different
    /// families are comparable under one penalty weight.
    bool normalize = true;
    std::uint64_t bandwidth_seed = 0;
};

/**
 * All Gram blocks for an (L+1) x N x P problem.
 *
 * Blocks are ordered (lag, node, kernel) with kernel fastest:
 *   b = (lag * N + node) * P + kernel.
 * Column j of the coefficient matrix never uses blocks with lag 0 and node j;
 * those are the structurally deleted index set I_j.
 */
class KernelMatrixSet {
public:
    KernelMatrixSet(Index nodes, int max_lag, int kernels, Index samples, std::vector<GramFactor> blocks);

    Index nodes() const noexcept { return nodes_; }
    int max_lag() const noexcept { return max_lag_; }
    int kernels() const noexcept { return kernels_; }
    Index samples() const noexcept { return samples_; }
    Index block_count() const noexcept { return static_cast<Index>(blocks_.size()); }

    Index block_index(int lag, Index node, int kernel = 0) const noexcept {
        return (static_cast<Index>(lag) * nodes_ + node) * kernels_ + kernel;
    }
    const GramFactor& block(Index b) const { return blocks_[static_cast<std::size_t>(b)]; }
    const GramFactor& block(int lag, Index node, int kernel = 0) const { return block(block_index(lag, node, kernel)); }

    bool is_deleted(Index column, Index b) const noexcept {
        return block(b).lag == 0 && block(b).node == column;
    }
    std::vector<Index> active_blocks(Index column) const;

    // Dense layouts, for inspection and tests on small problems.
    Eigen::MatrixXd kbar() const;                     // T' x (L+1)NP T'
    Eigen::MatrixXd kbar_lag(int lag) const;          // T' x NP T'
    Eigen::MatrixXd block_diag() const;               // D
    Eigen::MatrixXd block_diag_sqrt() const;          // D^{1/2}
    std::vector<Index> deleted_columns(Index column) const;
    Eigen::MatrixXd kbar_deleted(Index column) const; // K̄ without I_j columns
    Eigen::MatrixXd block_diag_deleted(Index column) const;

private:
    Index nodes_;
    int max_lag_;
    int kernels_;
    Index samples_;
    std::vector<GramFactor> blocks_;
};

/// Assembles raw Gram matrices given in block order (lag, node, kernel).
/// Throws ShapeMismatch on a wrong count or non-square / mismatched blocks.
KernelMatrixSet assemble(const std::vector<Eigen::MatrixXd>& grams, Index nodes, int max_lag,
                         int kernels = 1, double jitter = 1e-10);

/**
 * Builds every block for a view and a list of kernels.
 *
 * When `rows` is non-empty only those target rows (indices into 0..T'-1) are
 * used, which is how cross-validation and common-sample BIC restrict the fit.
 * Median-heuristic bandwidths are resolved per node on the full series.
 */
KernelMatrixSet build_kernel_set(const LagAlignedView& view, std::span<const KernelSpec> kernels,
                                 const GramOptions& options = {}, std::span<const Index> rows = {});

/// Kernel between new regressor values and the training regressors of one block,
/// with the block's scaling applied.
Eigen::MatrixXd block_cross_gram(const GramFactor& block, const Eigen::VectorXd& new_values,
                                 const Eigen::VectorXd& train_values);

} // namespace ksvarm
