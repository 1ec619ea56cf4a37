// Acceptance suite: one pass/fail line per criterion, exit status 0 iff all pass.
// Run with a criterion number (e.g. `ksvarm_acceptance 5`) to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <ksvarm/graph_metrics.hpp>
#include <ksvarm/mkl.hpp>
#include <ksvarm/pipeline.hpp>
#include <ksvarm/selection.hpp>
#include <ksvarm/solver.hpp>
#include <ksvarm/synth.hpp>

#include "graph_oracle.hpp"
#include "oracles.hpp"

using namespace ksvarm;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Every fit made by this suite goes through here so the structural zero is
// checked on all of them.
struct ZeroAudit {
    long fits = 0;
    long violations = 0;
    void check(const CoefficientTensor& w) {
        ++fits;
        for (Index j = 0; j < w.nodes(); ++j)
            for (int p = 0; p < w.kernels(); ++p)
                if (!(w.block(j, j, 0, p).array() == 0.0).all()) ++violations;
    }
} audit;

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Index r, Index c) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (Index a = 0; a < r; ++a)
        for (Index b = 0; b < c; ++b) m(a, b) = g(rng);
    return m;
}

KernelSpec random_kernel(std::mt19937_64& rng) {
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: return KernelSpec::linear();
    case 1: return KernelSpec::polynomial(2, 1.0);
    case 2: return KernelSpec::polynomial(3, 0.5);
    default: return KernelSpec::gaussian(std::uniform_real_distribution<double>(0.5, 2.0)(rng));
    }
}

KernelSpec finite_rank_kernel(std::mt19937_64& rng) {
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return KernelSpec::linear();
    case 1: return KernelSpec::polynomial(2, 1.0);
    default: return KernelSpec::polynomial(3, 0.5);
    }
}

double lambda_max(const Eigen::MatrixXd& y, const KernelMatrixSet& kms) {
    double m = 0.0;
    for (Index j = 0; j < kms.nodes(); ++j)
        for (Index b = 0; b < kms.block_count(); ++b)
            if (!kms.is_deleted(j, b)) m = std::max(m, (oracle::sqrtm(kms.block(b).gram) * y.col(j)).norm());
    return m;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> dim(1, 12);
    std::uniform_real_distribution<double> thr(0.0, 3.0);
    long bad = 0;
    for (int k = 0; k < 10000; ++k) {
        const Index d = dim(rng);
        const Eigen::VectorXd z = random_matrix(rng, d, 1);
        const Eigen::VectorXd z2 = random_matrix(rng, d, 1);
        const double t = thr(rng);
        const Eigen::VectorXd p = block_shrinkage(z, t);
        const bool zero = (p.array() == 0.0).all();
        if (zero != (z.norm() <= t)) ++bad;
        if ((p - oracle::shrink(z, t)).norm() > 1e-14 * (1.0 + z.norm())) ++bad;
        if ((p - block_shrinkage(z2, t)).norm() > (z - z2).norm() * (1.0 + 1e-14)) ++bad;
    }
    Eigen::VectorXd z(2);
    z << 3.0, 4.0;
    const Eigen::VectorXd p = block_shrinkage(z, 1.0);
    if (p(0) != 2.4 || std::abs(p(1) - 3.2) > 0.0) ++bad;
    if (block_shrinkage(z, 0.0) != z) ++bad;
    if (!(block_shrinkage(Eigen::VectorXd::Zero(3), 1.0).array() == 0.0).all()) ++bad;
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "violations=" << bad << " time=" << secs << "s";
    return {bad == 0 && secs < 1.0, os.str()};
}

Outcome criterion_2() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2);
    double worst = 0.0;
    int failures = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const Index n = std::uniform_int_distribution<Index>(2, 4)(rng);
        const int lags = std::uniform_int_distribution<int>(1, 2)(rng);
        const Index tp = std::uniform_int_distribution<Index>(6, 12)(rng);
        const TimeSeriesPanel panel = TimeSeriesPanel::with_default_labels(random_matrix(rng, tp + lags, n), 1.0);
        const LagAlignedView view(panel, lags);
        std::vector<KernelSpec> kernels{random_kernel(rng)};
        if (trial % 3 == 0) {
            KernelSpec extra = random_kernel(rng);
            if (!(extra == kernels[0])) kernels.push_back(extra);
        }
        GramOptions gopt;
        gopt.normalize = trial % 2 == 0;
        const KernelMatrixSet kms = build_kernel_set(view, kernels, gopt);
        const Eigen::MatrixXd y = view.target();

        SolverConfig cfg;
        cfg.lambda = std::uniform_real_distribution<double>(0.05, 0.8)(rng) * lambda_max(y, kms);
        cfg.rho = 1.0;
        cfg.tol_primal = cfg.tol_dual = 1e-11;
        cfg.max_iter = 1000000;
        const AdmmResult res = admm_fit(y, kms, cfg);
        audit.check(res.coefficients);
        const double ref = oracle::group_lasso_objective(y, kms, cfg.lambda);
        const double got = objective(y, kms, res.coefficients, cfg.lambda).total();
        const double rel = std::abs(got - ref) / std::max(1.0, std::abs(ref));
        worst = std::max(worst, rel);
        if (!res.diagnostics.converged || rel > 1e-6) ++failures;
    }
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "instances=25 failures=" << failures << " worst_rel=" << worst << " time=" << secs << "s";
    return {failures == 0 && secs < 60.0, os.str()};
}

double ridge_objective(const Eigen::MatrixXd& y, const KernelMatrixSet& kms, const Eigen::MatrixXd& w_stacked,
                       double lambda) {
    const Eigen::MatrixXd kbar = kms.kbar();
    const Eigen::MatrixXd d = kms.block_diag();
    return 0.5 * (y - kbar * w_stacked).squaredNorm() + lambda * (w_stacked.transpose() * d * w_stacked).trace();
}

Outcome criterion_3() {
    std::mt19937_64 rng(3);
    double worst_grad = 0.0;
    double worst_oracle = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        const Index n = std::uniform_int_distribution<Index>(2, 3)(rng);
        const int lags = std::uniform_int_distribution<int>(1, 2)(rng);
        const Index tp = std::uniform_int_distribution<Index>(4, 8)(rng);
        const TimeSeriesPanel panel = TimeSeriesPanel::with_default_labels(random_matrix(rng, tp + lags, n), 1.0);
        const LagAlignedView view(panel, lags);
        // Finite-rank kernels only: with Gaussian Grams the coefficient vector
        // itself is conditioned at ~1e10 and no double-precision oracle can
        // pin it to 1e-8 (see the ridge unit tests for the residual check).
        const std::vector<KernelSpec> kernels{finite_rank_kernel(rng)};
        const KernelMatrixSet kms = build_kernel_set(view, kernels);
        const Eigen::MatrixXd y = view.target();
        SolverConfig cfg;
        cfg.regularizer = Regularizer::Squared;
        cfg.lambda = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
        const CoefficientTensor w = ridge_fit(y, kms, cfg);
        audit.check(w);

        // Central differences over the free coefficients (deleted blocks stay 0).
        Eigen::MatrixXd ws = w.w_alpha();
        const double h = 1e-5;
        double grad_sq = 0.0;
        for (Index j = 0; j < n; ++j)
            for (Index b = 0; b < kms.block_count(); ++b) {
                if (kms.is_deleted(j, b)) continue;
                for (Index t = 0; t < tp; ++t) {
                    const Index r = b * tp + t;
                    const double keep = ws(r, j);
                    ws(r, j) = keep + h;
                    const double up = ridge_objective(y, kms, ws, cfg.lambda);
                    ws(r, j) = keep - h;
                    const double down = ridge_objective(y, kms, ws, cfg.lambda);
                    ws(r, j) = keep;
                    grad_sq += std::pow((up - down) / (2.0 * h), 2);
                }
            }
        worst_grad = std::max(worst_grad, std::sqrt(grad_sq));

        for (Index j = 0; j < n; ++j) {
            const Eigen::VectorXd ref =
                oracle::ridge_column(kms.kbar_deleted(j), kms.block_diag_deleted(j), y.col(j), cfg.lambda);
            Eigen::VectorXd got(ref.size());
            Index at = 0;
            for (Index b = 0; b < kms.block_count(); ++b)
                if (!kms.is_deleted(j, b)) {
                    got.segment(at, tp) = w.block(j, b);
                    at += tp;
                }
            worst_oracle = std::max(worst_oracle, (got - ref).norm() / std::max(1.0, ref.norm()));
        }
    }
    std::ostringstream os;
    os << "max_fd_grad=" << worst_grad << " max_oracle_diff=" << worst_oracle;
    return {worst_grad <= 1e-7 && worst_oracle <= 1e-8, os.str()};
}

Outcome criterion_4() {
    // Fuzzed configurations on top of every fit already audited by the suite.
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const Index n = std::uniform_int_distribution<Index>(2, 5)(rng);
        const int lags = std::uniform_int_distribution<int>(1, 3)(rng);
        const Index tp = std::uniform_int_distribution<Index>(5, 20)(rng);
        const TimeSeriesPanel panel = TimeSeriesPanel::with_default_labels(random_matrix(rng, tp + lags, n), 1.0);
        const LagAlignedView view(panel, lags);
        std::vector<KernelSpec> kernels{random_kernel(rng)};
        if (trial % 2) {
            KernelSpec extra = random_kernel(rng);
            if (!(extra == kernels[0])) kernels.push_back(extra);
        }
        const KernelMatrixSet kms = build_kernel_set(view, kernels);
        SolverConfig cfg;
        cfg.lambda = std::exp(std::uniform_real_distribution<double>(-6.0, 2.0)(rng));
        cfg.rho = std::exp(std::uniform_real_distribution<double>(-4.0, 2.0)(rng));
        cfg.max_iter = std::uniform_int_distribution<int>(1, 300)(rng);
        cfg.regularizer = trial % 5 == 0 ? Regularizer::Squared : Regularizer::GroupL1;
        audit.check(fit_coefficients(view.target(), kms, cfg));
        // All-zero and constant targets as well.
        audit.check(fit_coefficients(Eigen::MatrixXd::Zero(tp, n), kms, cfg));
    }
    std::ostringstream os;
    os << "fits_audited=" << audit.fits << " violations=" << audit.violations;
    return {audit.violations == 0 && audit.fits > 0, os.str()};
}

struct SynthRun {
    SynthTruth truth;
    TimeSeriesPanel panel;
};

SynthRun make_synth(const SynthConfig& cfg) {
    SynthTruth truth = generate_truth(cfg);
    TimeSeriesPanel panel = standardize(simulate(truth, cfg));
    return {std::move(truth), std::move(panel)};
}

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> g;
    for (int k = 0; k < count; ++k)
        g.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (count - 1)));
    return g;
}

struct FitSummary {
    RecoveryScore score;
    double lambda = 0.0;
    bool converged = false;
    std::vector<double> share;
};

FitSummary fit_and_score(const SynthRun& run, const std::vector<KernelSpec>& kernels, const SolverConfig& base,
                         const std::vector<double>& grid, int folds) {
    const LagAlignedView view(run.panel, run.truth.max_lag());
    SolverConfig cfg = base;
    cfg.lambda = grid.size() == 1 ? grid[0] : cross_validate_lambda(view, kernels, {}, base, grid, folds).best_lambda;
    const KernelMatrixSet kms = build_kernel_set(view, kernels);
    const AdmmResult res = admm_fit(view.target(), kms, cfg);
    audit.check(res.coefficients);
    const EffectiveNetwork net = threshold_edges(res.coefficients, cfg.tau);
    return {score_recovery(net, run.truth), cfg.lambda, res.diagnostics.converged,
            kernel_mass_share(res.coefficients)};
}

SolverConfig recovery_solver() {
    SolverConfig cfg;
    cfg.rho = 1.0;
    cfg.tau = 0.01;
    cfg.tol_primal = cfg.tol_dual = 1e-6;
    cfg.max_iter = 20000;
    return cfg;
}

SynthConfig recovery_synth(std::uint64_t seed) {
    SynthConfig s;
    s.nodes = 8;
    s.samples = 500;
    s.lag = 1;
    s.edge_density = 0.15;
    s.noise.variance = 0.01;
    s.seed = seed;
    return s;
}

Outcome criterion_5() {
    const auto t0 = Clock::now();
    std::vector<double> f1;
    std::ostringstream per;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SynthRun run = make_synth(recovery_synth(seed));
        const auto r = fit_and_score(run, {KernelSpec::linear()}, recovery_solver(), log_grid(1e-3, 10.0, 9), 5);
        f1.push_back(r.score.f1);
        per << ' ' << r.score.f1;
    }
    const double secs = seconds_since(t0);
    const double med = median(f1);
    std::ostringstream os;
    os << "median_F1=" << med << " time=" << secs << "s per_seed:" << per.str();
    return {med >= 0.9 && secs < 300.0, os.str()};
}

Outcome criterion_6() {
    std::vector<double> auc_lin;
    std::vector<double> auc_poly;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthConfig s = recovery_synth(100 + seed);
        s.coupling = Coupling::Quadratic;
        const SynthRun run = make_synth(s);
        const auto grid = log_grid(1e-3, 10.0, 9);
        auc_lin.push_back(fit_and_score(run, {KernelSpec::linear()}, recovery_solver(), grid, 5).score.auc);
        auc_poly.push_back(fit_and_score(run, {KernelSpec::polynomial(2, 1.0)}, recovery_solver(), grid, 5).score.auc);
    }
    const double ml = median(auc_lin);
    const double mp = median(auc_poly);
    std::ostringstream os;
    os << "median_AUC poly2=" << mp << " linear=" << ml;
    return {mp > ml, os.str()};
}

Outcome criterion_7() {
    // P = 1 dictionary against the plain solver.
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 3;
        const TimeSeriesPanel panel = TimeSeriesPanel::with_default_labels(random_matrix(rng, 12, n), 1.0);
        const LagAlignedView view(panel, 1);
        const KernelSpec k = random_kernel(rng);
        const KernelDictionary dict({k});
        const KernelMatrixSet expanded = expand_dictionary(dict, view);
        const std::vector<KernelSpec> single{k};
        const KernelMatrixSet plain = build_kernel_set(view, single);
        SolverConfig cfg;
        cfg.lambda = 0.2;
        cfg.rho = 1.0;
        cfg.tol_primal = cfg.tol_dual = 1e-10;
        cfg.max_iter = 100000;
        const MklResult m = mkl_fit(view.target(), expanded, cfg);
        const AdmmResult a = admm_fit(view.target(), plain, cfg);
        audit.check(m.fit.coefficients);
        audit.check(a.coefficients);
        worst = std::max(worst, std::abs(m.fit.diagnostics.objective - a.diagnostics.objective));
    }
    std::vector<double> share;
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SynthRun run = make_synth(recovery_synth(200 + seed));
        const auto r = fit_and_score(run, {KernelSpec::linear(), KernelSpec::polynomial(2, 1.0)}, recovery_solver(),
                                     log_grid(1e-3, 10.0, 9), 5);
        if (!r.converged) continue;
        ++converged;
        share.push_back(r.share[0]);
    }
    const double med = share.empty() ? 0.0 : median(share);
    std::ostringstream os;
    os << "P1_max_objective_diff=" << worst << " linear_share_median=" << med << " converged_runs=" << converged;
    return {worst <= 1e-8 && med >= 0.9, os.str()};
}

Outcome criterion_8() {
    std::mt19937_64 rng(8);
    long mismatches = 0;
    long graphs = 0;
    auto check = [&](const BoolMatrix& adj) {
        ++graphs;
        if (!graph_oracle::agrees(adj)) ++mismatches;
    };
    for (const auto& g : graph_oracle::fixtures()) check(g);
    std::uniform_int_distribution<Index> size(1, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const Index n = size(rng);
        const double p = u(rng);
        BoolMatrix adj(n, n);
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b) adj(a, b) = u(rng) < p;
        check(adj);
    }
    std::ostringstream os;
    os << "graphs=" << graphs << " mismatches=" << mismatches;
    return {mismatches == 0, os.str()};
}

// Time of one column update (alpha solve, shrinkage, dual step) after the
// column factor is cached; columns are independent, so this is the wall time
// of one iteration when columns run in parallel.
double column_update_seconds(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Index tp = 50;
    const TimeSeriesPanel panel = TimeSeriesPanel::with_default_labels(random_matrix(rng, tp + 1, n), 1.0);
    const LagAlignedView view(panel, 1);
    const std::vector<KernelSpec> kernels{KernelSpec::polynomial(2, 1.0)};
    const KernelMatrixSet kms = build_kernel_set(view, kernels);
    std::vector<const GramFactor*> blocks;
    for (Index b : kms.active_blocks(0)) blocks.push_back(&kms.block(b));
    const ColumnSolver solver(blocks, 0.01);
    const Index r = solver.reduced_size();
    const Eigen::VectorXd fy = solver.eigenvalues().cwiseProduct(solver.basis().transpose() * view.target().col(0));
    ColumnState state{Eigen::VectorXd::Zero(r), Eigen::VectorXd::Random(r), Eigen::VectorXd::Random(r)};
    const Eigen::VectorXd root = solver.eigenvalues().cwiseSqrt();
    double best = 1e300;
    for (int rep = 0; rep < 7; ++rep) {
        const int iters = 400;
        const auto t0 = Clock::now();
        for (int k = 0; k < iters; ++k) {
            state.beta = admm_column_update(solver, state, fy, 0.01);
            const Eigen::VectorXd kb = root.cwiseProduct(state.beta);
            for (std::size_t b = 0; b < solver.offsets().size(); ++b) {
                const Index o = solver.offsets()[b];
                const Index len = solver.ranks()[b];
                state.gamma.segment(o, len) = block_shrinkage(kb.segment(o, len) + state.xi.segment(o, len) / 0.01, 10.0);
            }
            state.xi += 0.01 * (kb - state.gamma);
        }
        best = std::min(best, seconds_since(t0) / iters);
    }
    return best;
}

Outcome criterion_9() {
    const double t20 = column_update_seconds(20, 9);
    const double t40 = column_update_seconds(40, 9);
    const double ratio = t40 / t20;
    std::ostringstream os;
    os << "per_iteration_s N=20:" << t20 << " N=40:" << t40 << " ratio=" << ratio;
    return {ratio >= 1.5 && ratio <= 3.0, os.str()};
}

Outcome criterion_10() {
    namespace fs = std::filesystem;
    const auto t0 = Clock::now();
    const fs::path root = fs::temp_directory_path() / "ksvarm_acceptance_10";
    fs::remove_all(root);

    SynthConfig s;
    s.nodes = 76;
    s.sample_rate_hz = 100.0;
    s.samples = 1000;  // 10 s
    s.lag = 1;
    s.edge_density = 0.03;
    s.noise.variance = 0.01;

    std::size_t networks = 0;
    std::vector<fs::path> runs;
    for (int phase = 0; phase < 2; ++phase) {
        s.seed = 1000 + static_cast<std::uint64_t>(phase);
        const SynthRun run{generate_truth(s), simulate(generate_truth(s), s)};
        const fs::path csv = root / ("phase" + std::to_string(phase)) / "panel.csv";
        write_panel_csv(csv, run.panel);
        PipelineConfig cfg;
        cfg.input = csv;
        cfg.segmentation.window_len_s = 0.5;
        cfg.lag = 1;
        cfg.kernel = "poly:d=2,c=1";
        cfg.lambda = 1.0;
        cfg.solver.rho = 0.01;
        cfg.solver.tau = 0.01;
        cfg.solver.max_iter = 3000;
        cfg.solver.tol_primal = cfg.solver.tol_dual = 1e-4;
        cfg.output_dir = root / ("run" + std::to_string(phase));
        const PipelineResult res = run_pipeline(cfg);
        if (phase == 0) networks = res.segments.size();
        runs.push_back(cfg.output_dir);
    }
    const ComparisonReport cmp = compare_runs(runs[0], runs[1]);
    write_json(root / "compare" / "compare.json", comparison_to_json(cmp));
    write_text(root / "compare" / "global.csv", comparison_global_csv(cmp));
    const std::set<std::string> table_rows{"density", "global_clustering", "diameter", "avg_neighbors",
                                           "self_loop_count", "connected_component_count"};
    std::size_t present = 0;
    for (const auto& g : cmp.global) present += table_rows.count(g.metric);
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "networks=" << networks << " table_rows=" << present << "/" << table_rows.size() << " time=" << secs << "s";
    return {networks == 20 && present == table_rows.size() && fs::exists(root / "compare" / "global.csv") &&
                secs < 600.0,
            os.str()};
}

Outcome criterion_11() {
    int correct = 0;
    std::vector<int> picks;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SynthConfig s = recovery_synth(300 + seed);
        const SynthRun run = make_synth(s);
        SolverConfig cfg;
        cfg.lambda = 0.1;
        const std::vector<KernelSpec> kernels{KernelSpec::linear()};
        const std::vector<int> candidates{1, 2, 3};
        const BicResult bic = select_lag_bic(run.panel, kernels, {}, cfg, candidates);
        correct += bic.best_lag == 1;
        picks.push_back(bic.best_lag);
    }
    std::ostringstream os;
    os << "correct=" << correct << "/50";
    return {correct >= 40, os.str()};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, criterion_1}, {2, criterion_2}, {3, criterion_3},  {5, criterion_5},  {6, criterion_6}, {7, criterion_7},
        {8, criterion_8}, {9, criterion_9}, {10, criterion_10}, {11, criterion_11}, {4, criterion_4}};
    std::set<int> wanted;
    for (int a = 1; a < argc; ++a) wanted.insert(std::stoi(argv[a]));
    bool all = true;
    for (const auto& [id, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
