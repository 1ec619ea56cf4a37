#include <ksvarm/io.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace ksvarm {

namespace fs = std::filesystem;

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path sidecar(const fs::path& csv) { return fs::path(csv.string() + ".json"); }

Index label_index(const std::map<std::string, Index>& index, const std::string& label) {
    const auto it = index.find(label);
    if (it == index.end()) throw Error(ErrorCode::LabelMismatch, "unknown node label: " + label);
    return it->second;
}

} // namespace

TimeSeriesPanel read_panel_csv(const fs::path& path, std::optional<double> rate_hz) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> labels;
    while (labels.empty() && std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) labels = split_csv(line);
    }
    if (labels.empty()) throw Error(ErrorCode::ParseError, path.string() + ": missing header row");

    std::vector<double> flat;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != labels.size())
            throw Error(ErrorCode::ParseError,
                        path.string() + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                            " fields, expected " + std::to_string(labels.size()));
        for (const auto& c : cells) flat.push_back(parse_double(c, lineno));
        ++rows;
    }
    const auto cols = static_cast<Index>(labels.size());
    Eigen::MatrixXd values(rows, cols);
    for (Index t = 0; t < rows; ++t)
        for (Index i = 0; i < cols; ++i) values(t, i) = flat[static_cast<std::size_t>(t * cols + i)];

    if (!rate_hz) {
        const auto side = sidecar(path);
        if (!fs::exists(side))
            throw Error(ErrorCode::ConfigError, "no sample rate given and no sidecar " + side.string());
        const Json meta = read_json(side);
        if (!meta.contains("sample_rate_hz")) throw Error(ErrorCode::ParseError, side.string() + ": no sample_rate_hz");
        rate_hz = meta.at("sample_rate_hz").get<double>();
    }
    return TimeSeriesPanel(std::move(values), std::move(labels), *rate_hz);
}

void write_panel_csv(const fs::path& path, const TimeSeriesPanel& panel) {
    std::string out;
    for (std::size_t i = 0; i < panel.labels().size(); ++i) {
        if (i) out += ',';
        out += panel.labels()[i];
    }
    out += '\n';
    const auto& v = panel.values();
    for (Index t = 0; t < v.rows(); ++t) {
        for (Index i = 0; i < v.cols(); ++i) {
            if (i) out += ',';
            out += format_double(v(t, i));
        }
        out += '\n';
    }
    write_text(path, out);
    Json meta;
    meta["schema_version"] = kSchemaVersion;
    meta["sample_rate_hz"] = panel.sample_rate_hz();
    meta["samples"] = panel.samples();
    meta["nodes"] = panel.nodes();
    write_json(sidecar(path), meta);
}

Json network_to_json(const EffectiveNetwork& net) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["nodes"] = net.labels();
    j["lags"] = net.max_lag();
    j["threshold"] = net.threshold();
    Json edges = Json::array();
    Json below = Json::array();
    for (int l = 0; l <= net.max_lag(); ++l)
        for (Index i = 0; i < net.nodes(); ++i)
            for (Index k = 0; k < net.nodes(); ++k) {
                const double w = net.weights(l)(i, k);
                if (w == 0.0) continue;
                Json e;
                e["src"] = net.labels()[static_cast<std::size_t>(i)];
                e["dst"] = net.labels()[static_cast<std::size_t>(k)];
                e["lag"] = l;
                e["weight"] = w;
                (net.edge(i, k, l) ? edges : below).push_back(std::move(e));
            }
    j["edges"] = std::move(edges);
    j["subthreshold"] = std::move(below);
    return j;
}

EffectiveNetwork network_from_json(const Json& j) {
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion)
            throw Error(ErrorCode::ParseError, "unsupported edge-list schema version " + std::to_string(version));
        auto labels = j.at("nodes").get<std::vector<std::string>>();
        const int lags = j.at("lags").get<int>();
        const double threshold = j.value("threshold", 0.0);
        if (lags < 0) throw Error(ErrorCode::ParseError, "lags must be nonnegative");
        std::map<std::string, Index> index;
        for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<Index>(i);
        const auto n = static_cast<Index>(labels.size());
        std::vector<Eigen::MatrixXd> w(static_cast<std::size_t>(lags) + 1, Eigen::MatrixXd::Zero(n, n));
        for (const char* key : {"edges", "subthreshold"}) {
            if (!j.contains(key)) continue;
            for (const auto& e : j.at(key)) {
                const int l = e.at("lag").get<int>();
                if (l < 0 || l > lags) throw Error(ErrorCode::ParseError, "edge lag out of range");
                w[static_cast<std::size_t>(l)](label_index(index, e.at("src").get<std::string>()),
                                               label_index(index, e.at("dst").get<std::string>())) =
                    e.at("weight").get<double>();
            }
        }
        return EffectiveNetwork(std::move(w), threshold, std::move(labels));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("edge list: ") + e.what());
    }
}

Json truth_to_json(const SynthTruth& truth, const std::vector<std::string>& labels) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["nodes"] = labels;
    j["lags"] = truth.max_lag();
    j["coupling"] = to_string(truth.coupling);
    Json order = Json::array();
    for (Index i : truth.order) order.push_back(labels[static_cast<std::size_t>(i)]);
    j["order"] = std::move(order);
    Json edges = Json::array();
    for (int l = 0; l <= truth.max_lag(); ++l)
        for (Index i = 0; i < truth.nodes(); ++i)
            for (Index k = 0; k < truth.nodes(); ++k) {
                const double a = truth.coefficients[static_cast<std::size_t>(l)](i, k);
                if (a == 0.0) continue;
                edges.push_back({{"src", labels[static_cast<std::size_t>(i)]},
                                 {"dst", labels[static_cast<std::size_t>(k)]},
                                 {"lag", l},
                                 {"coefficient", a}});
            }
    j["edges"] = std::move(edges);
    return j;
}

SynthTruth truth_from_json(const Json& j) {
    try {
        const auto labels = j.at("nodes").get<std::vector<std::string>>();
        std::map<std::string, Index> index;
        for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<Index>(i);
        const auto n = static_cast<Index>(labels.size());
        const int lags = j.at("lags").get<int>();
        SynthTruth t;
        t.coupling = parse_coupling(j.value("coupling", std::string("linear")));
        t.coefficients.assign(static_cast<std::size_t>(lags) + 1, Eigen::MatrixXd::Zero(n, n));
        for (const auto& o : j.at("order")) t.order.push_back(label_index(index, o.get<std::string>()));
        for (const auto& e : j.at("edges")) {
            const int l = e.at("lag").get<int>();
            if (l < 0 || l > lags) throw Error(ErrorCode::ParseError, "truth lag out of range");
            t.coefficients[static_cast<std::size_t>(l)](label_index(index, e.at("src").get<std::string>()),
                                                        label_index(index, e.at("dst").get<std::string>())) =
                e.at("coefficient").get<double>();
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("truth file: ") + e.what());
    }
}

Json metrics_to_json(const MetricsReport& r) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["conventions"] = {
        {"support", "aggregate over lags"},
        {"self_loops", "excluded from degree and path metrics; counted in self_loop_count"},
        {"betweenness", "directed, normalized by (N-1)(N-2)"},
        {"closeness", "directed out-distances; 0 if any node is unreachable"},
        {"clustering", "symmetrized graph"},
        {"components_diameter_avg_neighbors", "symmetrized graph"},
    };
    Json nodes = Json::array();
    for (std::size_t v = 0; v < r.nodes.size(); ++v) {
        const auto& m = r.nodes[v];
        nodes.push_back({{"label", r.labels[v]},
                         {"in_degree", m.in_degree},
                         {"out_degree", m.out_degree},
                         {"total_degree", m.total_degree},
                         {"betweenness", m.betweenness},
                         {"closeness", m.closeness},
                         {"clustering", m.clustering}});
    }
    j["nodes"] = std::move(nodes);
    const auto& g = r.global;
    j["global"] = {{"nodes", g.nodes},
                   {"edge_count", g.edge_count},
                   {"density", g.density},
                   {"global_clustering", g.global_clustering},
                   {"diameter", g.diameter},
                   {"avg_neighbors", g.avg_neighbors},
                   {"self_loop_count", g.self_loop_count},
                   {"connected_component_count", g.connected_component_count},
                   {"largest_component_size", g.largest_component_size}};
    return j;
}

MetricsReport metrics_from_json(const Json& j) {
    try {
        MetricsReport r;
        for (const auto& n : j.at("nodes")) {
            r.labels.push_back(n.at("label").get<std::string>());
            r.nodes.push_back(NodeMetrics{n.at("in_degree").get<Index>(), n.at("out_degree").get<Index>(),
                                          n.at("total_degree").get<Index>(), n.at("betweenness").get<double>(),
                                          n.at("closeness").get<double>(), n.at("clustering").get<double>()});
        }
        const auto& g = j.at("global");
        r.global.nodes = g.at("nodes").get<Index>();
        r.global.edge_count = g.at("edge_count").get<Index>();
        r.global.density = g.at("density").get<double>();
        r.global.global_clustering = g.at("global_clustering").get<double>();
        r.global.diameter = g.at("diameter").get<Index>();
        r.global.avg_neighbors = g.at("avg_neighbors").get<double>();
        r.global.self_loop_count = g.at("self_loop_count").get<Index>();
        r.global.connected_component_count = g.at("connected_component_count").get<Index>();
        r.global.largest_component_size = g.at("largest_component_size").get<Index>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("metrics report: ") + e.what());
    }
}

std::string metrics_to_csv(const MetricsReport& r) {
    std::string out =
        "scope,label,in_degree,out_degree,total_degree,betweenness,closeness,clustering,"
        "edge_count,density,global_clustering,diameter,avg_neighbors,self_loop_count,"
        "connected_component_count,largest_component_size\n";
    for (std::size_t v = 0; v < r.nodes.size(); ++v) {
        const auto& m = r.nodes[v];
        out += "node," + r.labels[v] + ',' + std::to_string(m.in_degree) + ',' + std::to_string(m.out_degree) + ',' +
               std::to_string(m.total_degree) + ',' + format_double(m.betweenness) + ',' +
               format_double(m.closeness) + ',' + format_double(m.clustering) + ",,,,,,,,\n";
    }
    const auto& g = r.global;
    out += "global,,,,,,,," + std::to_string(g.edge_count) + ',' + format_double(g.density) + ',' +
           format_double(g.global_clustering) + ',' + std::to_string(g.diameter) + ',' +
           format_double(g.avg_neighbors) + ',' + std::to_string(g.self_loop_count) + ',' +
           std::to_string(g.connected_component_count) + ',' + std::to_string(g.largest_component_size) + '\n';
    return out;
}

std::string attribution_to_csv(const std::vector<KernelAttribution>& rows, const std::vector<std::string>& labels) {
    std::string out = "src,dst,lag,kernel,block_norm\n";
    for (const auto& r : rows)
        out += labels[static_cast<std::size_t>(r.source)] + ',' + labels[static_cast<std::size_t>(r.target)] + ',' +
               std::to_string(r.lag) + ',' + std::to_string(r.kernel) + ',' + format_double(r.block_norm) + '\n';
    return out;
}

Json read_json(const fs::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

} // namespace ksvarm
