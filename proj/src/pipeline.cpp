#include <ksvarm/pipeline.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <ksvarm/mkl.hpp>

namespace ksvarm {

namespace fs = std::filesystem;

void validate(const PipelineConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (cfg.lambda.has_value() == !cfg.lambda_grid.empty())
        fail("set exactly one of a fixed lambda and a lambda grid");
    if (cfg.kernel.has_value() == !cfg.dictionary.empty())
        fail("set exactly one of a single kernel and a kernel dictionary");
    if (cfg.lag.has_value() == !cfg.lag_candidates.empty())
        fail("set exactly one of a fixed lag and lag candidates");
    if (cfg.lag && *cfg.lag < 1) fail("lag must be >= 1");
    for (int l : cfg.lag_candidates)
        if (l < 1) fail("lag candidates must be >= 1");
    if (cfg.lambda && !(*cfg.lambda >= 0.0)) fail("lambda must be nonnegative");
    if (!cfg.lambda_grid.empty() && cfg.folds < 2) fail("folds must be >= 2");
    if (cfg.sample_rate_hz && !(*cfg.sample_rate_hz > 0.0)) fail("sample rate must be positive");
    if (!(cfg.segmentation.window_len_s > 0.0)) fail("window length must be positive");
    if (!(cfg.segmentation.overlap_s >= 0.0) || cfg.segmentation.overlap_s >= cfg.segmentation.window_len_s)
        fail("overlap must lie in [0, window)");
    if (cfg.aggregate == AggregateMode::Majority && cfg.majority_k < 1) fail("majority mode needs k >= 1");
    if (cfg.segment_threads < 1) fail("segment_threads must be >= 1");
    if (cfg.kernel) validate(parse_kernel_spec(*cfg.kernel));
    if (!cfg.dictionary.empty()) {
        std::vector<KernelSpec> specs;
        for (const auto& k : cfg.dictionary) specs.push_back(parse_kernel_spec(k));
        KernelDictionary dict(specs);
    }
    try {
        validate(cfg.solver);
    } catch (const Error& e) {
        fail(e.what());
    }
}

namespace {

std::string aggregate_name(AggregateMode m) {
    switch (m) {
    case AggregateMode::None: return "none";
    case AggregateMode::Union: return "union";
    case AggregateMode::Majority: return "majority";
    }
    return "none";
}

AggregateMode parse_aggregate(const std::string& s) {
    if (s == "none") return AggregateMode::None;
    if (s == "union") return AggregateMode::Union;
    if (s == "majority") return AggregateMode::Majority;
    throw Error(ErrorCode::ConfigError, "unknown aggregate mode: " + s);
}

std::string regularizer_name(Regularizer r) { return r == Regularizer::Squared ? "squared" : "group_l1"; }

Regularizer parse_regularizer(const std::string& s) {
    if (s == "group_l1") return Regularizer::GroupL1;
    if (s == "squared") return Regularizer::Squared;
    throw Error(ErrorCode::ConfigError, "unknown regularizer: " + s);
}

std::string segment_name(std::size_t k) {
    std::ostringstream ss;
    ss << "seg_" << std::setw(3) << std::setfill('0') << k;
    return ss.str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

std::vector<KernelSpec> kernel_list(const PipelineConfig& cfg) {
    std::vector<KernelSpec> out;
    if (cfg.kernel) out.push_back(parse_kernel_spec(*cfg.kernel));
    for (const auto& k : cfg.dictionary) out.push_back(parse_kernel_spec(k));
    return out;
}

struct SegmentOutput {
    std::optional<SegmentResult> result;
    Json selection;
    std::string diagnostics;
    std::optional<std::string> attribution;
};

SegmentOutput process_segment(const PipelineConfig& cfg, const TimeSeriesPanel& raw, std::size_t index,
                              Index start) {
    const TimeSeriesPanel panel = cfg.standardize ? standardize(raw) : raw;
    const auto kernels = kernel_list(cfg);
    GramOptions gram = cfg.gram;
    gram.bandwidth_seed = cfg.seed;
    Json selection;

    int lag = cfg.lag.value_or(0);
    if (!cfg.lag) {
        const BicResult bic = select_lag_bic(panel, kernels, gram, cfg.solver, cfg.lag_candidates);
        lag = bic.best_lag;
        Json rows = Json::array();
        for (const auto& r : bic.rows) rows.push_back({{"lag", r.lag}, {"rss", r.rss}, {"dof", r.dof}, {"bic", r.bic}});
        selection["bic"] = {{"common_samples", bic.common_samples}, {"rows", std::move(rows)}};
    }
    selection["lag"] = lag;

    const LagAlignedView view = lag_view(panel, LagOrder{lag});
    SolverConfig solver = cfg.solver;
    if (cfg.lambda) {
        solver.lambda = *cfg.lambda;
    } else {
        const CvResult cv = cross_validate_lambda(view, kernels, gram, cfg.solver, cfg.lambda_grid, cfg.folds);
        solver.lambda = cv.best_lambda;
        Json rows = Json::array();
        for (const auto& r : cv.rows)
            rows.push_back({{"lambda", r.lambda}, {"mean_error", r.mean_error}, {"fold_errors", r.fold_errors}});
        selection["cv"] = {{"folds", cfg.folds}, {"rows", std::move(rows)}};
    }
    selection["lambda"] = solver.lambda;

    const KernelMatrixSet kms = build_kernel_set(view, kernels, gram);
    const Eigen::MatrixXd targets = view.target();

    SegmentOutput out;
    std::string& diag = out.diagnostics;
    FitDiagnostics diagnostics;
    std::optional<CoefficientTensor> coefficients;
    if (solver.regularizer == Regularizer::Squared) {
        coefficients = ridge_fit(targets, kms, solver);
        const auto obj = objective(targets, kms, *coefficients, solver.lambda, Regularizer::Squared);
        diagnostics.converged = true;
        diagnostics.fidelity = obj.fidelity;
        diagnostics.penalty = obj.penalty;
        diagnostics.objective = obj.total();
    } else {
        auto observer = [&diag](const IterationRecord& r) {
            Json rec{{"iteration", r.iteration}, {"primal_residual", r.primal_residual},
                     {"dual_residual", r.dual_residual}};
            diag += rec.dump() + '\n';
        };
        AdmmResult fit = admm_fit(targets, kms, solver, observer);
        diagnostics = fit.diagnostics;
        coefficients = std::move(fit.coefficients);
    }
    Json summary{{"final", true},
                 {"iterations", diagnostics.iterations},
                 {"converged", diagnostics.converged},
                 {"fidelity", diagnostics.fidelity},
                 {"penalty", diagnostics.penalty},
                 {"objective", diagnostics.objective}};
    diag += summary.dump() + '\n';

    EffectiveNetwork net = threshold_edges(*coefficients, solver.tau, panel.labels());
    if (kernels.size() > 1) {
        out.attribution = attribution_to_csv(kernel_attribution(*coefficients), panel.labels());
        Json share = Json::array();
        const auto s = kernel_mass_share(*coefficients);
        for (std::size_t p = 0; p < kernels.size(); ++p)
            share.push_back({{"kernel", to_string(kernels[p])}, {"share", s[p]}});
        selection["kernel_share"] = std::move(share);
    }
    MetricsReport metrics = compute_metrics(net);
    out.selection = std::move(selection);
    out.result.emplace(SegmentResult{index, start, raw.samples(), lag, solver.lambda, diagnostics, std::move(net),
                               std::move(metrics)});
    return out;
}

void write_segment(const fs::path& dir, const SegmentOutput& out) {
    write_json(dir / "edges.json", network_to_json(out.result->network));
    write_json(dir / "metrics.json", metrics_to_json(out.result->metrics));
    write_text(dir / "metrics.csv", metrics_to_csv(out.result->metrics));
    write_text(dir / "diagnostics.ndjson", out.diagnostics);
    write_json(dir / "selection.json", out.selection);
    if (out.attribution) write_text(dir / "attribution.csv", *out.attribution);
}

Json manifest_base(const PipelineConfig& cfg) {
    Json m;
    m["schema_version"] = kSchemaVersion;
    m["tool"] = "ksvarm";
    m["version"] = kToolVersion;
    m["created_utc"] = utc_timestamp();
    m["seed"] = cfg.seed;
    m["config"] = pipeline_config_to_json(cfg);
    return m;
}

} // namespace

Json pipeline_config_to_json(const PipelineConfig& cfg) {
    Json j;
    j["input"] = cfg.input.string();
    j["sample_rate_hz"] = cfg.sample_rate_hz ? Json(*cfg.sample_rate_hz) : Json(nullptr);
    j["window_s"] = cfg.segmentation.window_len_s;
    j["overlap_s"] = cfg.segmentation.overlap_s;
    j["standardize"] = cfg.standardize;
    if (cfg.lag) j["lag"] = *cfg.lag;
    if (!cfg.lag_candidates.empty()) j["lag_candidates"] = cfg.lag_candidates;
    if (cfg.kernel) j["kernel"] = *cfg.kernel;
    if (!cfg.dictionary.empty()) j["dictionary"] = cfg.dictionary;
    j["normalize_grams"] = cfg.gram.normalize;
    j["jitter"] = cfg.solver.jitter;
    if (cfg.lambda) j["lambda"] = *cfg.lambda;
    if (!cfg.lambda_grid.empty()) {
        j["lambda_grid"] = cfg.lambda_grid;
        j["folds"] = cfg.folds;
    }
    j["rho"] = cfg.solver.rho;
    j["tau"] = cfg.solver.tau;
    j["max_iter"] = cfg.solver.max_iter;
    j["tol_primal"] = cfg.solver.tol_primal;
    j["tol_dual"] = cfg.solver.tol_dual;
    j["regularizer"] = regularizer_name(cfg.solver.regularizer);
    j["solver_threads"] = cfg.solver.threads;
    j["output_dir"] = cfg.output_dir.string();
    j["aggregate"] = aggregate_name(cfg.aggregate);
    if (cfg.aggregate == AggregateMode::Majority) j["majority_k"] = cfg.majority_k;
    j["segment_threads"] = cfg.segment_threads;
    j["seed"] = cfg.seed;
    return j;
}

PipelineConfig pipeline_config_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    PipelineConfig c;
    try {
        if (j.contains("input")) c.input = j["input"].get<std::string>();
        if (j.contains("sample_rate_hz") && !j["sample_rate_hz"].is_null())
            c.sample_rate_hz = j["sample_rate_hz"].get<double>();
        c.segmentation.window_len_s = j.value("window_s", c.segmentation.window_len_s);
        c.segmentation.overlap_s = j.value("overlap_s", c.segmentation.overlap_s);
        c.standardize = j.value("standardize", c.standardize);
        if (j.contains("lag_candidates")) {
            c.lag_candidates = j["lag_candidates"].get<std::vector<int>>();
            c.lag.reset();
        }
        if (j.contains("lag")) c.lag = j["lag"].get<int>();
        if (j.contains("dictionary")) {
            c.dictionary = j["dictionary"].get<std::vector<std::string>>();
            c.kernel.reset();
        }
        if (j.contains("kernel")) c.kernel = j["kernel"].get<std::string>();
        c.gram.normalize = j.value("normalize_grams", c.gram.normalize);
        c.solver.jitter = j.value("jitter", c.solver.jitter);
        c.gram.jitter = c.solver.jitter;
        if (j.contains("lambda_grid")) {
            c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
            c.lambda.reset();
        }
        if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
        c.folds = j.value("folds", c.folds);
        c.solver.rho = j.value("rho", c.solver.rho);
        c.solver.tau = j.value("tau", c.solver.tau);
        c.solver.max_iter = j.value("max_iter", c.solver.max_iter);
        c.solver.tol_primal = j.value("tol_primal", c.solver.tol_primal);
        c.solver.tol_dual = j.value("tol_dual", c.solver.tol_dual);
        if (j.contains("regularizer")) c.solver.regularizer = parse_regularizer(j["regularizer"].get<std::string>());
        c.solver.threads = j.value("solver_threads", c.solver.threads);
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("aggregate")) c.aggregate = parse_aggregate(j["aggregate"].get<std::string>());
        c.majority_k = j.value("majority_k", c.majority_k);
        c.segment_threads = j.value("segment_threads", c.segment_threads);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
    return c;
}

EffectiveNetwork aggregate_networks(const std::vector<EffectiveNetwork>& nets, int min_count) {
    if (nets.empty()) throw Error(ErrorCode::InvalidArgument, "no networks to aggregate");
    if (min_count < 1) throw Error(ErrorCode::InvalidArgument, "aggregate count must be >= 1");
    const Index n = nets.front().nodes();
    int lags = 0;
    for (const auto& net : nets) {
        if (net.nodes() != n || net.labels() != nets.front().labels())
            throw Error(ErrorCode::LabelMismatch, "networks disagree on nodes");
        lags = std::max(lags, net.max_lag());
    }
    std::vector<Eigen::MatrixXd> counts(static_cast<std::size_t>(lags) + 1, Eigen::MatrixXd::Zero(n, n));
    for (const auto& net : nets)
        for (int l = 0; l <= net.max_lag(); ++l) counts[static_cast<std::size_t>(l)] += net.support(l).cast<double>();
    std::vector<BoolMatrix> support;
    for (const auto& c : counts) support.push_back((c.array() >= static_cast<double>(min_count)).matrix());
    return network_from_support(support, nets.front().labels());
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    validate(cfg);
    std::optional<TimeSeriesPanel> panel;
    try {
        panel.emplace(read_panel_csv(cfg.input, cfg.sample_rate_hz));
    } catch (const Error& e) {
        Json err{{"schema_version", kSchemaVersion}, {"stage", "ingest"}, {"code", to_string(e.code())},
                 {"message", e.what()}};
        write_json(cfg.output_dir / "error.json", err);
        throw;
    }
    return run_pipeline(cfg, *panel);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const TimeSeriesPanel& input) {
    validate(cfg);
    Json manifest = manifest_base(cfg);
    const fs::path out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    fs::remove(out_dir / "error.json");

    std::string stage = "segment";
    std::vector<std::optional<SegmentOutput>> outputs;
    try {
        const auto starts = segment_starts(input, cfg.segmentation);
        const auto parts = segment(input, cfg.segmentation);
        outputs.resize(parts.size());
        stage = "fit";

        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(parts.size());
        auto work = [&] {
            for (std::size_t k = next++; k < parts.size(); k = next++) {
                try {
                    outputs[k] = process_segment(cfg, parts[k], k, starts[k]);
                    write_segment(out_dir / "segments" / segment_name(k), *outputs[k]);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        };
        const int threads = std::min<int>(cfg.segment_threads, static_cast<int>(parts.size()));
        std::vector<std::thread> pool;
        for (int w = 1; w < threads; ++w) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();
        for (std::size_t k = 0; k < errors.size(); ++k)
            if (errors[k]) {
                stage = "fit:" + segment_name(k);
                std::rethrow_exception(errors[k]);
            }

        PipelineResult result;
        Json segs = Json::array();
        for (std::size_t k = 0; k < outputs.size(); ++k) {
            const auto& r = *outputs[k]->result;
            const std::string dir = "segments/" + segment_name(k);
            segs.push_back({{"index", k},
                            {"start_sample", r.start_sample},
                            {"samples", r.samples},
                            {"lag", r.lag},
                            {"lambda", r.lambda},
                            {"iterations", r.diagnostics.iterations},
                            {"converged", r.diagnostics.converged},
                            {"edge_count", r.network.edge_count()},
                            {"edges", dir + "/edges.json"},
                            {"metrics", dir + "/metrics.json"}});
            result.segments.push_back(r);
        }
        manifest["segments"] = std::move(segs);

        stage = "aggregate";
        if (cfg.aggregate != AggregateMode::None) {
            std::vector<EffectiveNetwork> nets;
            for (const auto& s : result.segments) nets.push_back(s.network);
            const int k = cfg.aggregate == AggregateMode::Union ? 1 : cfg.majority_k;
            result.aggregate = aggregate_networks(nets, k);
            write_json(out_dir / "aggregate" / "edges.json", network_to_json(*result.aggregate));
            const auto metrics = compute_metrics(*result.aggregate);
            write_json(out_dir / "aggregate" / "metrics.json", metrics_to_json(metrics));
            write_text(out_dir / "aggregate" / "metrics.csv", metrics_to_csv(metrics));
            manifest["aggregate"] = {{"mode", aggregate_name(cfg.aggregate)}, {"min_count", k},
                                     {"edges", "aggregate/edges.json"}, {"metrics", "aggregate/metrics.json"}};
        }
        manifest["status"] = "complete";
        write_json(out_dir / "manifest.json", manifest);
        return result;
    } catch (const Error& e) {
        Json err{{"schema_version", kSchemaVersion}, {"stage", stage}, {"code", to_string(e.code())},
                 {"message", e.what()}};
        write_json(out_dir / "error.json", err);
        Json done = Json::array();
        for (std::size_t k = 0; k < outputs.size(); ++k)
            if (outputs[k]) done.push_back("segments/" + segment_name(k));
        manifest["status"] = "failed";
        manifest["partial_outputs"] = std::move(done);
        manifest["error"] = "error.json";
        write_json(out_dir / "manifest.json", manifest);
        throw;
    }
}

MetricsAverage average_metrics(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw Error(ErrorCode::InvalidArgument, "no metrics to average");
    MetricsAverage avg;
    avg.labels = reports.front().labels;
    avg.count = reports.size();
    avg.nodes.assign(avg.labels.size(), NodeAverage{});
    const std::vector<std::string> names{"edge_count",     "density",         "global_clustering",
                                         "diameter",       "avg_neighbors",   "self_loop_count",
                                         "connected_component_count", "largest_component_size"};
    std::vector<double> global(names.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(reports.size());
    for (const auto& r : reports) {
        if (r.labels != avg.labels) throw Error(ErrorCode::LabelMismatch, "segments disagree on node labels");
        for (std::size_t v = 0; v < r.nodes.size(); ++v) {
            auto& a = avg.nodes[v];
            const auto& m = r.nodes[v];
            a.in_degree += inv * static_cast<double>(m.in_degree);
            a.out_degree += inv * static_cast<double>(m.out_degree);
            a.total_degree += inv * static_cast<double>(m.total_degree);
            a.betweenness += inv * m.betweenness;
            a.closeness += inv * m.closeness;
            a.clustering += inv * m.clustering;
        }
        const auto& g = r.global;
        const double vals[] = {static_cast<double>(g.edge_count),
                               g.density,
                               g.global_clustering,
                               static_cast<double>(g.diameter),
                               g.avg_neighbors,
                               static_cast<double>(g.self_loop_count),
                               static_cast<double>(g.connected_component_count),
                               static_cast<double>(g.largest_component_size)};
        for (std::size_t k = 0; k < names.size(); ++k) global[k] += inv * vals[k];
    }
    for (std::size_t k = 0; k < names.size(); ++k) avg.global.emplace_back(names[k], global[k]);
    return avg;
}

MetricsAverage load_run_metrics(const fs::path& dir) {
    std::vector<MetricsReport> reports;
    if (fs::exists(dir / "manifest.json")) {
        const Json m = read_json(dir / "manifest.json");
        if (m.value("status", std::string()) != "complete")
            throw Error(ErrorCode::InvalidArgument, dir.string() + ": run did not complete");
        for (const auto& s : m.at("segments")) reports.push_back(metrics_from_json(read_json(dir / s.at("metrics").get<std::string>())));
    } else if (fs::exists(dir / "metrics.json")) {
        reports.push_back(metrics_from_json(read_json(dir / "metrics.json")));
    } else if (fs::is_regular_file(dir)) {
        reports.push_back(metrics_from_json(read_json(dir)));
    } else {
        throw Error(ErrorCode::IoError, dir.string() + ": neither a run directory nor a metrics file");
    }
    return average_metrics(reports);
}

ComparisonReport compare_metrics(const MetricsAverage& a, const MetricsAverage& b) {
    if (a.labels != b.labels) throw Error(ErrorCode::LabelMismatch, "runs disagree on node labels");
    ComparisonReport r;
    r.labels = a.labels;
    r.segments_a = a.count;
    r.segments_b = b.count;
    for (std::size_t v = 0; v < a.labels.size(); ++v) {
        const auto& x = a.nodes[v];
        const auto& y = b.nodes[v];
        NodeAverage d{x.in_degree - y.in_degree,     x.out_degree - y.out_degree, x.total_degree - y.total_degree,
                      x.betweenness - y.betweenness, x.closeness - y.closeness,   x.clustering - y.clustering};
        r.nodes.push_back(NodeDelta{a.labels[v], x, y, d});
    }
    for (std::size_t k = 0; k < a.global.size(); ++k)
        r.global.push_back(GlobalRow{a.global[k].first, a.global[k].second, b.global[k].second,
                                     a.global[k].second - b.global[k].second});
    return r;
}

ComparisonReport compare_runs(const fs::path& dir_a, const fs::path& dir_b) {
    return compare_metrics(load_run_metrics(dir_a), load_run_metrics(dir_b));
}

namespace {

Json node_average_json(const NodeAverage& n) {
    return {{"in_degree", n.in_degree},     {"out_degree", n.out_degree}, {"total_degree", n.total_degree},
            {"betweenness", n.betweenness}, {"closeness", n.closeness},   {"clustering", n.clustering}};
}

std::string node_average_csv(const NodeAverage& n) {
    return format_double(n.in_degree) + ',' + format_double(n.out_degree) + ',' + format_double(n.total_degree) +
           ',' + format_double(n.betweenness) + ',' + format_double(n.closeness) + ',' + format_double(n.clustering);
}

} // namespace

Json comparison_to_json(const ComparisonReport& r) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["segments_a"] = r.segments_a;
    j["segments_b"] = r.segments_b;
    j["delta"] = "a - b";
    Json global = Json::array();
    for (const auto& g : r.global) global.push_back({{"metric", g.metric}, {"a", g.a}, {"b", g.b}, {"delta", g.delta}});
    j["global"] = std::move(global);
    Json nodes = Json::array();
    for (const auto& n : r.nodes)
        nodes.push_back({{"label", n.label}, {"a", node_average_json(n.a)}, {"b", node_average_json(n.b)},
                         {"delta", node_average_json(n.delta)}});
    j["nodes"] = std::move(nodes);
    return j;
}

std::string comparison_global_csv(const ComparisonReport& r) {
    std::string out = "metric,a,b,delta\n";
    for (const auto& g : r.global)
        out += g.metric + ',' + format_double(g.a) + ',' + format_double(g.b) + ',' + format_double(g.delta) + '\n';
    return out;
}

std::string comparison_nodes_csv(const ComparisonReport& r) {
    std::string out = "label";
    for (const char* side : {"a", "b", "delta"})
        for (const char* m : {"in_degree", "out_degree", "total_degree", "betweenness", "closeness", "clustering"})
            out += std::string(",") + side + "_" + m;
    out += '\n';
    for (const auto& n : r.nodes)
        out += n.label + ',' + node_average_csv(n.a) + ',' + node_average_csv(n.b) + ',' + node_average_csv(n.delta) +
               '\n';
    return out;
}

} // namespace ksvarm
