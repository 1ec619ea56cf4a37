#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include <ksvarm/kernels.hpp>
#include <ksvarm/network.hpp>

namespace ksvarm {

enum class Regularizer { GroupL1, Squared };

struct SolverConfig {
    double lambda = 0.1;
    double rho = 0.01;
    double tau = 0.01;
    int max_iter = 5000;
    double tol_primal = 1e-5;
    double tol_dual = 1e-5;
    /// Relative eigenvalue floor for Gram factors (eps = jitter * trace / T').
    double jitter = 1e-10;
    Regularizer regularizer = Regularizer::GroupL1;
    /// Worker threads for column updates; 0 picks hardware concurrency.
    int threads = 1;
};

void validate(const SolverConfig& cfg);

/**
 * Coefficient blocks alpha_ij^{l,p}, one length-T' vector per (target column
 * j, kernel block b). Blocks use the KernelMatrixSet ordering, so the source
 * node, lag, and kernel of block b are those of kms.block(b).
 */
class CoefficientTensor {
public:
    CoefficientTensor(Index nodes, int max_lag, int kernels, Index samples);
    explicit CoefficientTensor(const KernelMatrixSet& layout)
        : CoefficientTensor(layout.nodes(), layout.max_lag(), layout.kernels(), layout.samples()) {}

    Index nodes() const noexcept { return nodes_; }
    int max_lag() const noexcept { return max_lag_; }
    int kernels() const noexcept { return kernels_; }
    Index samples() const noexcept { return samples_; }
    Index block_count() const noexcept { return blocks_per_column_; }

    Index block_index(int lag, Index source, int kernel = 0) const noexcept {
        return (static_cast<Index>(lag) * nodes_ + source) * kernels_ + kernel;
    }
    Eigen::VectorXd& block(Index column, Index b) { return data_[slot(column, b)]; }
    const Eigen::VectorXd& block(Index column, Index b) const { return data_[slot(column, b)]; }
    const Eigen::VectorXd& block(Index source, Index target, int lag, int kernel = 0) const {
        return block(target, block_index(lag, source, kernel));
    }

    double block_norm(Index source, Index target, int lag, int kernel = 0) const {
        return block(source, target, lag, kernel).norm();
    }

    /// Stacked W_alpha: (B * T') x N, block b of column j at rows [b T', (b+1) T').
    Eigen::MatrixXd w_alpha() const;
    Eigen::MatrixXd w_alpha_lag(int lag) const;
    bool all_finite() const;

private:
    std::size_t slot(Index column, Index b) const noexcept {
        return static_cast<std::size_t>(column * blocks_per_column_ + b);
    }

    Index nodes_;
    int max_lag_;
    int kernels_;
    Index samples_;
    Index blocks_per_column_;
    std::vector<Eigen::VectorXd> data_;
};

/// Split variable Gamma (~ D^{1/2} W_alpha) and multipliers Xi, laid out like w_alpha().
struct DualState {
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd xi;
};

struct IterationRecord {
    int iteration = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

struct FitDiagnostics {
    int iterations = 0;
    bool converged = false;
    std::vector<double> primal_residuals;
    std::vector<double> dual_residuals;
    double primal_tolerance = 0.0;
    double dual_tolerance = 0.0;
    double fidelity = 0.0;
    double penalty = 0.0;
    double objective = 0.0;
};

struct AdmmResult {
    CoefficientTensor coefficients;
    DualState dual;
    FitDiagnostics diagnostics;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Prox of threshold * ||.||_2: (z / ||z||) max(||z|| - threshold, 0).
Eigen::VectorXd block_shrinkage(const Eigen::VectorXd& z, double threshold);

/// Xi + rho (D^{1/2} W_alpha - Gamma).
Eigen::MatrixXd dual_update(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& d_sqrt_w,
                            const Eigen::MatrixXd& gamma, double rho);

/**
 * Factorized per-column system (K̄_j^T K̄_j + c D_j) restricted to the ranges
 * of the Gram blocks.
 *
 * In the reduced (eigen) coordinates beta_b = U_b^T alpha_b the system reads
 * (F^T F + c Lambda) beta = q with F = [U_b Lambda_b]. It is solved either by a
 * Cholesky factor of that R x R matrix or, when R is large compared to T', by
 * the matrix inversion lemma with a cached Cholesky factor of
 * I + (1/c) sum_b K_b (T' x T').
 */
class ColumnSolver {
public:
    enum class Method { Auto, Direct, Woodbury };

    ColumnSolver(std::vector<const GramFactor*> blocks, double curvature, Method method = Method::Auto);

    Index samples() const noexcept { return basis_.rows(); }
    Index reduced_size() const noexcept { return basis_.cols(); }
    Method method() const noexcept { return method_; }
    const std::vector<Index>& offsets() const noexcept { return offsets_; }
    const std::vector<Index>& ranks() const noexcept { return ranks_; }
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

    Eigen::VectorXd solve_reduced(const Eigen::VectorXd& q) const;
    /// Coefficient-space solve; q is expected in the range of D_j.
    Eigen::VectorXd solve(const Eigen::VectorXd& q) const;

    Eigen::VectorXd to_reduced(const Eigen::VectorXd& stacked) const;
    Eigen::VectorXd to_stacked(const Eigen::VectorXd& reduced) const;
    /// F beta = sum_b K_b alpha_b.
    Eigen::VectorXd fitted(const Eigen::VectorXd& reduced) const;

private:
    Eigen::MatrixXd basis_;
    Eigen::VectorXd eigenvalues_;
    std::vector<Index> offsets_;
    std::vector<Index> ranks_;
    double curvature_;
    Method method_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Reduced-coordinate ADMM state of one column.
struct ColumnState {
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
    Eigen::VectorXd xi;
};

/// alpha-update of one column: solves the column quadratic for
/// q = rho D^{1/2} gamma + K̄^T y - D^{1/2} xi, all in reduced coordinates.
Eigen::VectorXd admm_column_update(const ColumnSolver& solver, const ColumnState& state,
                                   const Eigen::VectorXd& kbar_t_y, double rho);

/**
 * Group-sparse estimator: minimizes
 *   1/2 ||Y - K̄ W||_F^2 + lambda sum_{i,j,l} ||K_i^l^{1/2} alpha_ij^l||_2
 * with alpha_jj^0 = 0, by ADMM. Blocks whose split variable is shrunk to zero
 * at the returned iterate are reported as exact zeros.
 *
 * `targets` is the T' x N matrix of target rows.
 */
AdmmResult admm_fit(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const SolverConfig& cfg,
                    const IterationObserver& observer = {});

/// Closed-form minimizer of 1/2 ||Y - K̄ W||_F^2 + lambda tr(W^T D W), minimum-norm.
CoefficientTensor ridge_fit(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const SolverConfig& cfg);

/// Trace of the ridge hat matrix, summed over columns.
double ridge_effective_dof(const KernelMatrixSet& kms, double lambda);

/// Y_hat = K̄ W_alpha.
Eigen::MatrixXd predict(const CoefficientTensor& w, const KernelMatrixSet& kms);

struct ObjectiveValue {
    double fidelity = 0.0;
    double penalty = 0.0;
    double total() const noexcept { return fidelity + penalty; }
};

ObjectiveValue objective(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const CoefficientTensor& w,
                         double lambda, Regularizer regularizer = Regularizer::GroupL1);

/// Support iff block norm >= tau (and nonzero); with several kernels the
/// weight of (i, j, l) is the largest per-kernel block norm.
EffectiveNetwork threshold_edges(const CoefficientTensor& w, double tau, std::vector<std::string> labels = {});

/// Dispatches on cfg.regularizer.
CoefficientTensor fit_coefficients(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms,
                                   const SolverConfig& cfg, FitDiagnostics* diagnostics = nullptr);

} // namespace ksvarm
