#include <ksvarm/solver.hpp>

#include <atomic>
#include <barrier>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace ksvarm {

void validate(const SolverConfig& cfg) {
    if (!(cfg.lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");
    if (!(cfg.rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be positive");
    if (!(cfg.tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be nonnegative");
    if (cfg.max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be positive");
    if (!(cfg.tol_primal > 0.0) || !(cfg.tol_dual > 0.0))
        throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
    if (!(cfg.jitter >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter must be nonnegative");
    if (cfg.threads < 0) throw Error(ErrorCode::InvalidArgument, "threads must be nonnegative");
}

CoefficientTensor::CoefficientTensor(Index nodes, int max_lag, int kernels, Index samples)
    : nodes_(nodes),
      max_lag_(max_lag),
      kernels_(kernels),
      samples_(samples),
      blocks_per_column_(static_cast<Index>(max_lag + 1) * nodes * kernels),
      data_(static_cast<std::size_t>(nodes * blocks_per_column_), Eigen::VectorXd::Zero(samples)) {}

Eigen::MatrixXd CoefficientTensor::w_alpha() const {
    Eigen::MatrixXd w(blocks_per_column_ * samples_, nodes_);
    for (Index j = 0; j < nodes_; ++j)
        for (Index b = 0; b < blocks_per_column_; ++b) w.block(b * samples_, j, samples_, 1) = block(j, b);
    return w;
}

Eigen::MatrixXd CoefficientTensor::w_alpha_lag(int lag) const {
    const Index per_lag = nodes_ * kernels_ * samples_;
    return w_alpha().middleRows(static_cast<Index>(lag) * per_lag, per_lag);
}

bool CoefficientTensor::all_finite() const {
    for (const auto& v : data_)
        if (!v.allFinite()) return false;
    return true;
}

Eigen::VectorXd block_shrinkage(const Eigen::VectorXd& z, double threshold) {
    const double norm = z.norm();
    if (norm <= threshold || norm == 0.0) return Eigen::VectorXd::Zero(z.size());
    if (threshold == 0.0) return z;
    return (z / norm) * (norm - threshold);
}

Eigen::MatrixXd dual_update(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& d_sqrt_w,
                            const Eigen::MatrixXd& gamma, double rho) {
    if (xi.rows() != gamma.rows() || xi.cols() != gamma.cols() || d_sqrt_w.rows() != gamma.rows() ||
        d_sqrt_w.cols() != gamma.cols())
        throw Error(ErrorCode::ShapeMismatch, "dual update operands differ in shape");
    return xi + rho * (d_sqrt_w - gamma);
}

ColumnSolver::ColumnSolver(std::vector<const GramFactor*> blocks, double curvature, Method method)
    : curvature_(curvature), method_(method) {
    if (!(curvature > 0.0)) throw Error(ErrorCode::InvalidArgument, "column system curvature must be positive");
    if (blocks.empty()) throw Error(ErrorCode::ShapeMismatch, "column system needs at least one block");
    const Index samples = blocks.front()->basis.rows();
    Index total = 0;
    for (const auto* b : blocks) {
        if (b->basis.rows() != samples) throw Error(ErrorCode::ShapeMismatch, "blocks differ in sample count");
        offsets_.push_back(total);
        ranks_.push_back(b->rank());
        total += b->rank();
    }
    basis_.resize(samples, total);
    eigenvalues_.resize(total);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        basis_.middleCols(offsets_[k], ranks_[k]) = blocks[k]->basis;
        eigenvalues_.segment(offsets_[k], ranks_[k]) = blocks[k]->eigenvalues;
    }

    if (method_ == Method::Auto) {
        const double r = static_cast<double>(total);
        const double t = static_cast<double>(samples);
        method_ = r * r <= t * t + 2.0 * r * t ? Method::Direct : Method::Woodbury;
    }
    if (total == 0) return;

    if (method_ == Method::Direct) {
        const Eigen::MatrixXd f = basis_ * eigenvalues_.asDiagonal();
        Eigen::MatrixXd a = f.transpose() * f;
        a.diagonal() += curvature_ * eigenvalues_;
        llt_.compute(a);
    } else {
        Eigen::MatrixXd s = (basis_ * (eigenvalues_ / curvature_).asDiagonal()) * basis_.transpose();
        s.diagonal().array() += 1.0;
        llt_.compute(s);
    }
    if (llt_.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "column system factorization failed");
}

Eigen::VectorXd ColumnSolver::solve_reduced(const Eigen::VectorXd& q) const {
    if (q.size() != reduced_size()) throw Error(ErrorCode::ShapeMismatch, "rhs has wrong reduced size");
    if (reduced_size() == 0) return Eigen::VectorXd(0);
    if (method_ == Method::Direct) return llt_.solve(q);
    const Eigen::VectorXd w = llt_.solve(basis_ * q / curvature_);
    return (q.cwiseQuotient(eigenvalues_) - basis_.transpose() * w) / curvature_;
}

Eigen::VectorXd ColumnSolver::to_reduced(const Eigen::VectorXd& stacked) const {
    const Index t = samples();
    if (stacked.size() != t * static_cast<Index>(ranks_.size()))
        throw Error(ErrorCode::ShapeMismatch, "stacked vector has wrong size");
    Eigen::VectorXd out(reduced_size());
    for (std::size_t k = 0; k < ranks_.size(); ++k)
        out.segment(offsets_[k], ranks_[k]) =
            basis_.middleCols(offsets_[k], ranks_[k]).transpose() * stacked.segment(static_cast<Index>(k) * t, t);
    return out;
}

Eigen::VectorXd ColumnSolver::to_stacked(const Eigen::VectorXd& reduced) const {
    const Index t = samples();
    Eigen::VectorXd out(t * static_cast<Index>(ranks_.size()));
    for (std::size_t k = 0; k < ranks_.size(); ++k)
        out.segment(static_cast<Index>(k) * t, t) =
            basis_.middleCols(offsets_[k], ranks_[k]) * reduced.segment(offsets_[k], ranks_[k]);
    return out;
}

Eigen::VectorXd ColumnSolver::solve(const Eigen::VectorXd& q) const {
    return to_stacked(solve_reduced(to_reduced(q)));
}

Eigen::VectorXd ColumnSolver::fitted(const Eigen::VectorXd& reduced) const {
    return basis_ * eigenvalues_.cwiseProduct(reduced);
}

Eigen::VectorXd admm_column_update(const ColumnSolver& solver, const ColumnState& state,
                                   const Eigen::VectorXd& kbar_t_y, double rho) {
    const Eigen::VectorXd root = solver.eigenvalues().cwiseSqrt();
    const Eigen::VectorXd q = rho * root.cwiseProduct(state.gamma) + kbar_t_y - root.cwiseProduct(state.xi);
    return solver.solve_reduced(q);
}

namespace {

std::vector<const GramFactor*> column_blocks(const KernelMatrixSet& kms, const std::vector<Index>& active) {
    std::vector<const GramFactor*> out;
    out.reserve(active.size());
    for (Index b : active) out.push_back(&kms.block(b));
    return out;
}

void check_targets(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms) {
    if (targets.rows() != kms.samples() || targets.cols() != kms.nodes())
        throw Error(ErrorCode::ShapeMismatch, "targets must be T' x N matching the kernel set");
    if (!targets.allFinite()) throw Error(ErrorCode::NonFinite, "targets contain non-finite values");
}

// Gamma-update and multiplier step for one block in reduced coordinates.
// Adds the squared primal and (unscaled) dual residual contributions.
template <class Beta, class Gamma, class Xi, class Root>
void split_step(const Beta& beta, Gamma&& gamma, Xi&& xi, const Root& root, double lambda, double rho,
                Eigen::VectorXd& scratch, double& primal, double& dual) {
    scratch = root.cwiseProduct(beta) + xi / rho;
    const double norm = scratch.norm();
    const double threshold = lambda / rho;
    if (norm <= threshold) {
        dual += gamma.squaredNorm();
        gamma.setZero();
    } else {
        if (threshold != 0.0) scratch = (scratch / norm) * (norm - threshold);
        dual += (scratch - gamma).squaredNorm();
        gamma = scratch;
    }
    scratch = root.cwiseProduct(beta) - gamma;
    xi += rho * scratch;
    primal += scratch.squaredNorm();
}

// One ColumnSolver per column; used when the reduced systems are small.
class PerColumnEngine {
public:
    PerColumnEngine(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, double rho) {
        for (Index j = 0; j < kms.nodes(); ++j) {
            auto active = kms.active_blocks(j);
            ColumnSolver solver(column_blocks(kms, active), rho);
            const Index r = solver.reduced_size();
            Eigen::VectorXd fy = solver.eigenvalues().cwiseProduct(solver.basis().transpose() * targets.col(j));
            Eigen::VectorXd root = solver.eigenvalues().cwiseSqrt();
            ColumnState state{Eigen::VectorXd::Zero(r), Eigen::VectorXd::Zero(r), Eigen::VectorXd::Zero(r)};
            columns_.push_back(Column{std::move(active), std::move(solver), std::move(fy), std::move(root),
                                      std::move(state), 0.0, 0.0});
        }
    }

    void step(Index first, Index last, double lambda, double rho) {
        for (Index j = first; j < last; ++j) {
            auto& c = columns_[static_cast<std::size_t>(j)];
            c.state.beta = admm_column_update(c.solver, c.state, c.fy, rho);
            if (!c.state.beta.allFinite()) throw Error(ErrorCode::NonFinite, "ADMM iterate became non-finite");
            double primal = 0.0;
            double dual = 0.0;
            Eigen::VectorXd scratch;
            const auto& offsets = c.solver.offsets();
            const auto& ranks = c.solver.ranks();
            for (std::size_t k = 0; k < offsets.size(); ++k) {
                const Index o = offsets[k];
                const Index r = ranks[k];
                if (r == 0) continue;
                split_step(c.state.beta.segment(o, r), c.state.gamma.segment(o, r), c.state.xi.segment(o, r),
                           c.root.segment(o, r), lambda, rho, scratch, primal, dual);
            }
            c.primal_sq = primal;
            c.dual_sq = rho * rho * dual;
        }
    }

    double primal_sq(Index j) const { return columns_[static_cast<std::size_t>(j)].primal_sq; }
    double dual_sq(Index j) const { return columns_[static_cast<std::size_t>(j)].dual_sq; }

    template <class Sink>
    void export_column(Index j, Sink&& sink) const {
        const auto& c = columns_[static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < c.active.size(); ++k) {
            const Index o = c.solver.offsets()[k];
            const Index r = c.solver.ranks()[k];
            sink(c.active[k], c.state.beta.segment(o, r), c.state.gamma.segment(o, r), c.state.xi.segment(o, r),
                 c.root.segment(o, r));
        }
    }

private:
    struct Column {
        std::vector<Index> active;
        ColumnSolver solver;
        Eigen::VectorXd fy;
        Eigen::VectorXd root;
        ColumnState state;
        double primal_sq;
        double dual_sq;
    };
    std::vector<Column> columns_;
};

// All columns share the eigenbases of every block except their own deleted
// lag-0 block, so the Woodbury products of a group of columns are computed as
// matrix-matrix products over the full basis with the deleted coordinates
// held at zero. Each column keeps its own T' x T' Cholesky factor.
class BatchedEngine {
public:
    BatchedEngine(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, double rho) : kms_(kms), rho_(rho) {
        const Index t = kms.samples();
        const Index n = kms.nodes();
        Index total = 0;
        for (Index b = 0; b < kms.block_count(); ++b) {
            offsets_.push_back(total);
            ranks_.push_back(kms.block(b).rank());
            total += kms.block(b).rank();
        }
        basis_.resize(t, total);
        eig_.resize(total);
        for (Index b = 0; b < kms.block_count(); ++b) {
            basis_.middleCols(offsets_[b], ranks_[b]) = kms.block(b).basis;
            eig_.segment(offsets_[b], ranks_[b]) = kms.block(b).eigenvalues;
        }
        root_ = eig_.cwiseSqrt();
        inv_eig_ = eig_.cwiseInverse();

        Eigen::MatrixXd s_all = (basis_ * (eig_ / rho).asDiagonal()) * basis_.transpose();
        s_all.diagonal().array() += 1.0;
        fy_ = eig_.asDiagonal() * (basis_.transpose() * targets);
        active_.resize(static_cast<std::size_t>(n));
        for (Index j = 0; j < n; ++j) {
            Eigen::MatrixXd s = s_all;
            for (Index b = 0; b < kms.block_count(); ++b) {
                if (kms.is_deleted(j, b)) {
                    const auto& f = kms.block(b);
                    s.noalias() -= (f.basis * (f.eigenvalues / rho).asDiagonal()) * f.basis.transpose();
                    fy_.col(j).segment(offsets_[b], ranks_[b]).setZero();
                } else {
                    active_[static_cast<std::size_t>(j)].push_back(b);
                }
            }
            llt_.emplace_back(s);
            if (llt_.back().info() != Eigen::Success)
                throw Error(ErrorCode::SingularSystem, "column system factorization failed");
        }
        beta_ = Eigen::MatrixXd::Zero(total, n);
        gamma_ = Eigen::MatrixXd::Zero(total, n);
        xi_ = Eigen::MatrixXd::Zero(total, n);
        primal_.assign(static_cast<std::size_t>(n), 0.0);
        dual_.assign(static_cast<std::size_t>(n), 0.0);
    }

    void step(Index first, Index last, double lambda, double rho) {
        const Index m = last - first;
        if (m <= 0) return;
        const Eigen::MatrixXd q = rho * (root_.asDiagonal() * gamma_.middleCols(first, m)) + fy_.middleCols(first, m) -
                                  root_.asDiagonal() * xi_.middleCols(first, m);
        Eigen::MatrixXd w = basis_ * q / rho_;
        for (Index c = 0; c < m; ++c) llt_[static_cast<std::size_t>(first + c)].solveInPlace(w.col(c));
        beta_.middleCols(first, m) = (inv_eig_.asDiagonal() * q - basis_.transpose() * w) / rho_;
        for (Index j = first; j < last; ++j) {
            auto col = beta_.col(j);
            for (int p = 0; p < kms_.kernels(); ++p) {
                const Index b = kms_.block_index(0, j, p);
                col.segment(offsets_[b], ranks_[b]).setZero();
            }
            if (!col.allFinite()) throw Error(ErrorCode::NonFinite, "ADMM iterate became non-finite");
            const auto& act = active_[static_cast<std::size_t>(j)];
            double primal = 0.0;
            double dual = 0.0;
            Eigen::VectorXd scratch;
            for (Index b : act) {
                const Index o = offsets_[b];
                const Index r = ranks_[b];
                if (r == 0) continue;
                split_step(col.segment(o, r), gamma_.col(j).segment(o, r), xi_.col(j).segment(o, r),
                           root_.segment(o, r), lambda, rho, scratch, primal, dual);
            }
            primal_[static_cast<std::size_t>(j)] = primal;
            dual_[static_cast<std::size_t>(j)] = rho * rho * dual;
        }
    }

    double primal_sq(Index j) const { return primal_[static_cast<std::size_t>(j)]; }
    double dual_sq(Index j) const { return dual_[static_cast<std::size_t>(j)]; }

    template <class Sink>
    void export_column(Index j, Sink&& sink) const {
        for (Index b : active_[static_cast<std::size_t>(j)]) {
            const Index o = offsets_[b];
            const Index r = ranks_[b];
            sink(b, beta_.col(j).segment(o, r), gamma_.col(j).segment(o, r), xi_.col(j).segment(o, r),
                 root_.segment(o, r));
        }
    }

private:
    const KernelMatrixSet& kms_;
    double rho_;
    std::vector<Index> offsets_;
    std::vector<Index> ranks_;
    Eigen::MatrixXd basis_;
    Eigen::VectorXd eig_;
    Eigen::VectorXd root_;
    Eigen::VectorXd inv_eig_;
    Eigen::MatrixXd fy_;
    std::vector<std::vector<Index>> active_;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
    Eigen::MatrixXd beta_;
    Eigen::MatrixXd gamma_;
    Eigen::MatrixXd xi_;
    std::vector<double> primal_;
    std::vector<double> dual_;
};

// Mirrors ColumnSolver's Auto rule on the largest column system.
bool prefer_batched(const KernelMatrixSet& kms) {
    double total = 0.0;
    for (Index b = 0; b < kms.block_count(); ++b) total += static_cast<double>(kms.block(b).rank());
    const double t = static_cast<double>(kms.samples());
    return total * total > t * t + 2.0 * total * t;
}

template <class Engine>
AdmmResult run_admm(Engine& engine, const Eigen::MatrixXd& targets, const KernelMatrixSet& kms,
                    const SolverConfig& cfg, const IterationObserver& observer) {
    const Index n = kms.nodes();
    const double dim = static_cast<double>(n * kms.block_count() * kms.samples());
    FitDiagnostics diag;
    diag.primal_tolerance = cfg.tol_primal * std::sqrt(dim);
    diag.dual_tolerance = cfg.tol_dual * std::sqrt(dim);

    // Returns true when converged.
    auto finish_iteration = [&](int k) {
        double p = 0.0;
        double d = 0.0;
        for (Index j = 0; j < n; ++j) {
            p += engine.primal_sq(j);
            d += engine.dual_sq(j);
        }
        p = std::sqrt(p);
        d = std::sqrt(d);
        diag.iterations = k;
        diag.primal_residuals.push_back(p);
        diag.dual_residuals.push_back(d);
        if (observer) observer(IterationRecord{k, p, d});
        return p <= diag.primal_tolerance && d <= diag.dual_tolerance;
    };

    int threads = cfg.threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : cfg.threads;
    threads = static_cast<int>(std::min<Index>(threads, n));

    if (threads <= 1) {
        for (int k = 1; k <= cfg.max_iter; ++k) {
            engine.step(0, n, cfg.lambda, cfg.rho);
            if (finish_iteration(k)) {
                diag.converged = true;
                break;
            }
        }
    } else {
        std::atomic<bool> stop{false};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        int k = 0;
        auto on_phase = [&]() noexcept {
            ++k;
            if (failure) {
                stop = true;
                return;
            }
            try {
                if (finish_iteration(k)) {
                    diag.converged = true;
                    stop = true;
                } else if (k >= cfg.max_iter) {
                    stop = true;
                }
            } catch (...) {
                failure = std::current_exception();
                stop = true;
            }
        };
        std::barrier sync(threads, on_phase);
        auto worker = [&](int w) {
            const Index first = n * w / threads;
            const Index last = n * (w + 1) / threads;
            while (!stop.load()) {
                try {
                    engine.step(first, last, cfg.lambda, cfg.rho);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
                sync.arrive_and_wait();
            }
        };
        std::vector<std::jthread> pool;
        for (int w = 1; w < threads; ++w) pool.emplace_back(worker, w);
        worker(0);
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }

    AdmmResult result{CoefficientTensor(kms), DualState{}, std::move(diag)};
    const Index t = kms.samples();
    result.dual.gamma = Eigen::MatrixXd::Zero(kms.block_count() * t, n);
    result.dual.xi = Eigen::MatrixXd::Zero(kms.block_count() * t, n);

    double fidelity = 0.0;
    double penalty = 0.0;
    for (Index j = 0; j < n; ++j) {
        Eigen::VectorXd fitted = Eigen::VectorXd::Zero(t);
        engine.export_column(j, [&](Index b, const auto& beta_in, const auto& gamma, const auto& xi, const auto& root) {
            const auto& block = kms.block(b);
            Eigen::VectorXd beta = beta_in;
            // Blocks whose split variable was shrunk to zero are exact zeros.
            if (gamma.isZero(0.0)) beta.setZero();
            result.coefficients.block(j, b) = block.basis * beta;
            result.dual.gamma.block(b * t, j, t, 1) = block.basis * gamma;
            result.dual.xi.block(b * t, j, t, 1) = block.basis * xi;
            penalty += root.cwiseProduct(beta).norm();
            fitted.noalias() += block.basis * block.eigenvalues.cwiseProduct(beta);
        });
        fidelity += (targets.col(j) - fitted).squaredNorm();
    }
    result.diagnostics.fidelity = 0.5 * fidelity;
    result.diagnostics.penalty = cfg.lambda * penalty;
    result.diagnostics.objective = result.diagnostics.fidelity + result.diagnostics.penalty;
    if (!result.coefficients.all_finite()) throw Error(ErrorCode::NonFinite, "ADMM produced non-finite coefficients");
    return result;
}

} // namespace

AdmmResult admm_fit(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const SolverConfig& cfg,
                    const IterationObserver& observer) {
    validate(cfg);
    if (cfg.regularizer != Regularizer::GroupL1)
        throw Error(ErrorCode::InvalidArgument, "admm_fit requires the group_l1 regularizer; use ridge_fit");
    check_targets(targets, kms);
    if (prefer_batched(kms)) {
        BatchedEngine engine(targets, kms, cfg.rho);
        return run_admm(engine, targets, kms, cfg, observer);
    }
    PerColumnEngine engine(targets, kms, cfg.rho);
    return run_admm(engine, targets, kms, cfg, observer);
}

CoefficientTensor ridge_fit(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const SolverConfig& cfg) {
    validate(cfg);
    if (!(cfg.lambda > 0.0)) throw Error(ErrorCode::SingularSystem, "ridge fit needs lambda > 0");
    check_targets(targets, kms);
    CoefficientTensor w(kms);
    for (Index j = 0; j < kms.nodes(); ++j) {
        const auto active = kms.active_blocks(j);
        const ColumnSolver solver(column_blocks(kms, active), 2.0 * cfg.lambda);
        const Eigen::VectorXd fy = solver.eigenvalues().cwiseProduct(solver.basis().transpose() * targets.col(j));
        const Eigen::VectorXd beta = solver.solve_reduced(fy);
        if (!beta.allFinite()) throw Error(ErrorCode::NonFinite, "ridge solution is non-finite");
        for (std::size_t k = 0; k < active.size(); ++k)
            w.block(j, active[k]) =
                kms.block(active[k]).basis * beta.segment(solver.offsets()[k], solver.ranks()[k]);
    }
    return w;
}

double ridge_effective_dof(const KernelMatrixSet& kms, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
    const Index t = kms.samples();
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(t, t);
    for (Index b = 0; b < kms.block_count(); ++b) total += kms.block(b).gram;
    double dof = 0.0;
    for (Index j = 0; j < kms.nodes(); ++j) {
        Eigen::MatrixXd s = total;
        for (Index b = 0; b < kms.block_count(); ++b)
            if (kms.is_deleted(j, b)) s -= kms.block(b).gram;
        // H = K (K + 2 lambda I)^{-1}; tr H = sum mu / (mu + 2 lambda)
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
        for (Index k = 0; k < t; ++k) {
            const double mu = std::max(0.0, es.eigenvalues()(k));
            dof += mu / (mu + 2.0 * lambda);
        }
    }
    return dof;
}

Eigen::MatrixXd predict(const CoefficientTensor& w, const KernelMatrixSet& kms) {
    if (w.nodes() != kms.nodes() || w.block_count() != kms.block_count() || w.samples() != kms.samples())
        throw Error(ErrorCode::ShapeMismatch, "coefficients do not match the kernel set");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(kms.samples(), kms.nodes());
    for (Index j = 0; j < kms.nodes(); ++j)
        for (Index b = 0; b < kms.block_count(); ++b) {
            const auto& a = w.block(j, b);
            if (!a.isZero(0.0)) out.col(j).noalias() += kms.block(b).gram * a;
        }
    return out;
}

ObjectiveValue objective(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const CoefficientTensor& w,
                         double lambda, Regularizer regularizer) {
    check_targets(targets, kms);
    ObjectiveValue v;
    v.fidelity = 0.5 * (targets - predict(w, kms)).squaredNorm();
    double pen = 0.0;
    for (Index j = 0; j < kms.nodes(); ++j)
        for (Index b = 0; b < kms.block_count(); ++b) {
            const auto& a = w.block(j, b);
            const double quad = std::max(0.0, a.dot(kms.block(b).gram * a));
            pen += regularizer == Regularizer::GroupL1 ? std::sqrt(quad) : quad;
        }
    v.penalty = lambda * pen;
    return v;
}

EffectiveNetwork threshold_edges(const CoefficientTensor& w, double tau, std::vector<std::string> labels) {
    const Index n = w.nodes();
    std::vector<Eigen::MatrixXd> weights(static_cast<std::size_t>(w.max_lag() + 1), Eigen::MatrixXd::Zero(n, n));
    for (int lag = 0; lag <= w.max_lag(); ++lag)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                if (lag == 0 && i == j) continue;
                double best = 0.0;
                for (int p = 0; p < w.kernels(); ++p) best = std::max(best, w.block_norm(i, j, lag, p));
                weights[static_cast<std::size_t>(lag)](i, j) = best;
            }
    return EffectiveNetwork(std::move(weights), tau, std::move(labels));
}

CoefficientTensor fit_coefficients(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms,
                                   const SolverConfig& cfg, FitDiagnostics* diagnostics) {
    if (cfg.regularizer == Regularizer::Squared) {
        auto w = ridge_fit(targets, kms, cfg);
        if (diagnostics) {
            *diagnostics = FitDiagnostics{};
            diagnostics->converged = true;
            const auto obj = objective(targets, kms, w, cfg.lambda, Regularizer::Squared);
            diagnostics->fidelity = obj.fidelity;
            diagnostics->penalty = obj.penalty;
            diagnostics->objective = obj.total();
        }
        return w;
    }
    auto res = admm_fit(targets, kms, cfg);
    if (diagnostics) *diagnostics = std::move(res.diagnostics);
    return std::move(res.coefficients);
}

} // namespace ksvarm
