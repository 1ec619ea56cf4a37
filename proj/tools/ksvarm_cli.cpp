#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <ksvarm/io.hpp>
#include <ksvarm/pipeline.hpp>
#include <ksvarm/selection.hpp>
#include <ksvarm/synth.hpp>

using namespace ksvarm;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigError, "bad number in list: " + item);
        }
    }
    return out;
}

struct InferFlags {
    std::string config;
    std::string input;
    double rate = 0.0;
    double window = 0.0;
    double overlap = -1.0;
    int lag = 0;
    std::string bic_lags;
    std::string kernel;
    std::vector<std::string> dictionary;
    double lambda = -1.0;
    std::string grid;
    int folds = 0;
    double rho = 0.0;
    double tau = -1.0;
    int max_iter = 0;
    double tol = 0.0;
    std::string regularizer;
    std::string out;
    std::string aggregate;
    int threads = 0;
    int segment_threads = 0;
    bool no_standardize = false;
    long long seed = -1;
};

void add_common_flags(CLI::App* cmd, InferFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags override its fields");
    cmd->add_option("--input,-i", f.input, "panel CSV (header row of node labels)");
    cmd->add_option("--rate", f.rate, "sampling rate in Hz (else read from <input>.json)");
    cmd->add_option("--lag,-L", f.lag, "lag order");
    cmd->add_option("--bic-lags", f.bic_lags, "comma-separated lag candidates scored by BIC");
    cmd->add_option("--kernel,-k", f.kernel, "kernel: linear | poly:d=2,c=1 | gaussian:sigma=1|median");
    cmd->add_option("--dictionary", f.dictionary, "kernel dictionary (repeat for each kernel)");
    cmd->add_option("--lambda", f.lambda, "fixed sparsity weight");
    cmd->add_option("--lambda-grid", f.grid, "comma-separated lambda grid for cross-validation");
    cmd->add_option("--folds", f.folds, "cross-validation folds");
    cmd->add_option("--rho", f.rho, "ADMM penalty");
    cmd->add_option("--tau", f.tau, "edge threshold on block norms");
    cmd->add_option("--max-iter", f.max_iter, "ADMM iteration cap");
    cmd->add_option("--tol", f.tol, "primal and dual tolerance");
    cmd->add_option("--regularizer", f.regularizer, "group_l1 | squared");
    cmd->add_option("--threads", f.threads, "solver worker threads (0 = all cores)");
    cmd->add_flag("--no-standardize", f.no_standardize, "skip per-segment z-scoring");
    cmd->add_option("--seed", f.seed, "seed for bandwidth sampling");
}

PipelineConfig build_config(const InferFlags& f) {
    if (f.lambda >= 0.0 && !f.grid.empty())
        throw Error(ErrorCode::ConfigError, "--lambda and --lambda-grid are mutually exclusive");
    if (!f.kernel.empty() && !f.dictionary.empty())
        throw Error(ErrorCode::ConfigError, "--kernel and --dictionary are mutually exclusive");
    if (f.lag > 0 && !f.bic_lags.empty())
        throw Error(ErrorCode::ConfigError, "--lag and --bic-lags are mutually exclusive");
    PipelineConfig c = f.config.empty() ? PipelineConfig{} : pipeline_config_from_json(read_json(f.config));
    if (!f.input.empty()) c.input = f.input;
    if (f.rate > 0.0) c.sample_rate_hz = f.rate;
    if (f.window > 0.0) c.segmentation.window_len_s = f.window;
    if (f.overlap >= 0.0) c.segmentation.overlap_s = f.overlap;
    if (f.lag > 0) {
        c.lag = f.lag;
        c.lag_candidates.clear();
    }
    if (!f.bic_lags.empty()) {
        c.lag.reset();
        c.lag_candidates.clear();
        for (double v : parse_list(f.bic_lags)) c.lag_candidates.push_back(static_cast<int>(v));
    }
    if (!f.kernel.empty()) {
        c.kernel = f.kernel;
        c.dictionary.clear();
    }
    if (!f.dictionary.empty()) {
        c.kernel.reset();
        c.dictionary = f.dictionary;
    }
    if (f.lambda >= 0.0) {
        c.lambda = f.lambda;
        c.lambda_grid.clear();
    }
    if (!f.grid.empty()) {
        c.lambda.reset();
        c.lambda_grid = parse_list(f.grid);
    }
    if (f.folds > 0) c.folds = f.folds;
    if (f.rho > 0.0) c.solver.rho = f.rho;
    if (f.tau >= 0.0) c.solver.tau = f.tau;
    if (f.max_iter > 0) c.solver.max_iter = f.max_iter;
    if (f.tol > 0.0) c.solver.tol_primal = c.solver.tol_dual = f.tol;
    if (!f.regularizer.empty())
        c.solver.regularizer = f.regularizer == "squared" ? Regularizer::Squared : Regularizer::GroupL1;
    if (!f.out.empty()) c.output_dir = f.out;
    if (!f.aggregate.empty()) {
        if (f.aggregate == "union") {
            c.aggregate = AggregateMode::Union;
        } else if (f.aggregate.rfind("majority:", 0) == 0) {
            c.aggregate = AggregateMode::Majority;
            c.majority_k = std::stoi(f.aggregate.substr(9));
        } else if (f.aggregate == "none") {
            c.aggregate = AggregateMode::None;
        } else {
            throw Error(ErrorCode::ConfigError, "aggregate must be none, union or majority:<k>");
        }
    }
    if (f.threads > 0) c.solver.threads = f.threads;
    if (f.segment_threads > 0) c.segment_threads = f.segment_threads;
    if (f.no_standardize) c.standardize = false;
    if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
    return c;
}

int report(const Error& e) {
    Json err{{"code", to_string(e.code())}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel-based structural VAR network inference"};
    app.require_subcommand(1);

    InferFlags infer;
    auto* cmd_infer = app.add_subcommand("infer", "infer one network per segment and write reports");
    add_common_flags(cmd_infer, infer);
    cmd_infer->add_option("--window", infer.window, "segment length in seconds");
    cmd_infer->add_option("--overlap", infer.overlap, "segment overlap in seconds");
    cmd_infer->add_option("--out,-o", infer.out, "output directory");
    cmd_infer->add_option("--aggregate", infer.aggregate, "none | union | majority:<k>");
    cmd_infer->add_option("--segment-threads", infer.segment_threads, "segments fitted concurrently");
    bool print_config = false;
    cmd_infer->add_flag("--print-config", print_config, "print the resolved config and exit");

    SynthConfig synth;
    std::string synth_out = "synth_out";
    std::string coupling = "linear";
    double noise_var = synth.noise.variance;
    std::uint64_t synth_seed = 0;
    auto* cmd_synth = app.add_subcommand("synth", "generate a ground-truth network and a simulated panel");
    cmd_synth->add_option("--nodes,-n", synth.nodes, "number of nodes");
    cmd_synth->add_option("--samples,-T", synth.samples, "number of samples kept");
    cmd_synth->add_option("--lag,-L", synth.lag, "lag order");
    cmd_synth->add_option("--density", synth.edge_density, "edge density");
    cmd_synth->add_option("--coupling", coupling, "linear | quadratic | sigmoid");
    cmd_synth->add_option("--scale", synth.coefficient_scale, "coefficient scale");
    cmd_synth->add_option("--noise-var", noise_var, "innovation variance");
    cmd_synth->add_option("--burn-in", synth.burn_in, "discarded warm-up samples");
    cmd_synth->add_option("--rate", synth.sample_rate_hz, "sampling rate in Hz written to the sidecar");
    cmd_synth->add_option("--seed", synth_seed, "random seed");
    cmd_synth->add_option("--out,-o", synth_out, "output directory");

    std::string edges_path;
    std::string metrics_out;
    std::string csv_out;
    std::string truth_path;
    auto* cmd_metrics = app.add_subcommand("metrics", "graph metrics of an edge-list JSON");
    cmd_metrics->add_option("edges", edges_path, "edge-list JSON")->required();
    cmd_metrics->add_option("--out,-o", metrics_out, "write the JSON report here instead of stdout");
    cmd_metrics->add_option("--csv", csv_out, "also write the flat CSV report");
    cmd_metrics->add_option("--truth", truth_path, "truth JSON from `synth`; adds a recovery score");

    std::string dir_a;
    std::string dir_b;
    std::string compare_out;
    auto* cmd_compare = app.add_subcommand("compare", "compare the metrics of two runs");
    cmd_compare->add_option("run_a", dir_a, "run directory or metrics.json")->required();
    cmd_compare->add_option("run_b", dir_b, "run directory or metrics.json")->required();
    cmd_compare->add_option("--out,-o", compare_out, "directory for compare.json and CSV tables");

    InferFlags cv;
    std::string cv_out;
    auto* cmd_cv = app.add_subcommand("cv", "cross-validate lambda on a whole panel");
    add_common_flags(cmd_cv, cv);
    cmd_cv->add_option("--out,-o", cv_out, "write the table here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_infer) {
            const PipelineConfig cfg = build_config(infer);
            if (print_config) {
                std::cout << pipeline_config_to_json(cfg).dump(2) << '\n';
                return 0;
            }
            const auto result = run_pipeline(cfg);
            std::cout << "segments: " << result.segments.size() << "\noutput: " << cfg.output_dir.string() << '\n';
        } else if (*cmd_synth) {
            synth.coupling = parse_coupling(coupling);
            synth.noise.variance = noise_var;
            synth.seed = synth_seed;
            const SynthTruth truth = generate_truth(synth);
            const TimeSeriesPanel panel = simulate(truth, synth);
            const fs::path dir = synth_out;
            write_panel_csv(dir / "panel.csv", panel);
            write_json(dir / "truth.json", truth_to_json(truth, panel.labels()));
            write_json(dir / "truth_edges.json", network_to_json(truth.network(panel.labels())));
            std::cout << "wrote " << (dir / "panel.csv").string() << " (" << panel.samples() << " x " << panel.nodes()
                      << ")\n";
        } else if (*cmd_metrics) {
            const EffectiveNetwork net = network_from_json(read_json(edges_path));
            const MetricsReport rep = compute_metrics(net);
            Json j = metrics_to_json(rep);
            if (!truth_path.empty()) {
                const SynthTruth truth = truth_from_json(read_json(truth_path));
                const RecoveryScore s = score_recovery(net, truth);
                j["recovery"] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"auc", s.auc}};
            }
            if (!csv_out.empty()) write_text(csv_out, metrics_to_csv(rep));
            if (metrics_out.empty())
                std::cout << j.dump(2) << '\n';
            else
                write_json(metrics_out, j);
        } else if (*cmd_compare) {
            const ComparisonReport rep = compare_runs(dir_a, dir_b);
            if (compare_out.empty()) {
                std::cout << comparison_global_csv(rep);
            } else {
                const fs::path dir = compare_out;
                write_json(dir / "compare.json", comparison_to_json(rep));
                write_text(dir / "global.csv", comparison_global_csv(rep));
                write_text(dir / "nodes.csv", comparison_nodes_csv(rep));
                std::cout << comparison_global_csv(rep);
            }
        } else if (*cmd_cv) {
            PipelineConfig cfg = build_config(cv);
            if (cfg.lambda_grid.empty()) throw Error(ErrorCode::ConfigError, "cv needs --lambda-grid");
            if (!cfg.lag) throw Error(ErrorCode::ConfigError, "cv needs a fixed --lag");
            TimeSeriesPanel panel = read_panel_csv(cfg.input, cfg.sample_rate_hz);
            if (cfg.standardize) panel = standardize(panel);
            std::vector<KernelSpec> kernels;
            if (cfg.kernel) kernels.push_back(parse_kernel_spec(*cfg.kernel));
            for (const auto& k : cfg.dictionary) kernels.push_back(parse_kernel_spec(k));
            GramOptions gram = cfg.gram;
            gram.bandwidth_seed = cfg.seed;
            const CvResult res = cross_validate_lambda(lag_view(panel, LagOrder{*cfg.lag}), kernels, gram, cfg.solver,
                                                       cfg.lambda_grid, cfg.folds);
            Json j{{"schema_version", kSchemaVersion}, {"best_lambda", res.best_lambda}, {"folds", cfg.folds}};
            Json rows = Json::array();
            for (const auto& r : res.rows)
                rows.push_back({{"lambda", r.lambda}, {"mean_error", r.mean_error}, {"fold_errors", r.fold_errors}});
            j["rows"] = std::move(rows);
            if (cv_out.empty())
                std::cout << j.dump(2) << '\n';
            else
                write_json(cv_out, j);
        }
    } catch (const Error& e) {
        return report(e);
    } catch (const std::exception& e) {
        std::cerr << Json{{"code", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 3;
    }
    return 0;
}
