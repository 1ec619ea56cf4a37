#include <ksvarm/graph_metrics.hpp>

#include <algorithm>
#include <queue>

namespace ksvarm {

namespace {

BoolMatrix without_loops(const BoolMatrix& adj) {
    BoolMatrix a = adj;
    a.diagonal().setConstant(false);
    return a;
}

void require_square(const BoolMatrix& adj) {
    if (adj.rows() != adj.cols()) throw Error(ErrorCode::ShapeMismatch, "adjacency must be square");
}

} // namespace

BoolMatrix symmetrize(const BoolMatrix& adj) {
    require_square(adj);
    BoolMatrix s = (adj.array() || adj.transpose().array()).matrix();
    s.diagonal().setConstant(false);
    return s;
}

std::vector<Index> bfs_distances(const BoolMatrix& adj, Index source) {
    const Index n = adj.rows();
    std::vector<Index> dist(static_cast<std::size_t>(n), -1);
    std::queue<Index> queue;
    dist[static_cast<std::size_t>(source)] = 0;
    queue.push(source);
    while (!queue.empty()) {
        const Index v = queue.front();
        queue.pop();
        for (Index w = 0; w < n; ++w)
            if (w != v && adj(v, w) && dist[static_cast<std::size_t>(w)] < 0) {
                dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                queue.push(w);
            }
    }
    return dist;
}

std::vector<DegreeCounts> degrees(const BoolMatrix& adj) {
    require_square(adj);
    const BoolMatrix a = without_loops(adj);
    std::vector<DegreeCounts> out(static_cast<std::size_t>(a.rows()));
    for (Index v = 0; v < a.rows(); ++v) {
        auto& d = out[static_cast<std::size_t>(v)];
        d.out = a.row(v).count();
        d.in = a.col(v).count();
        d.total = d.in + d.out;
    }
    return out;
}

// Pair dependencies sigma_sv * sigma_vt / sigma_st from per-source BFS
// counts, accumulated in (s, t) order. Path counts are held in doubles, exact
// up to 2^53.
std::vector<double> betweenness(const BoolMatrix& adj) {
    require_square(adj);
    const BoolMatrix a = without_loops(adj);
    const Index n = a.rows();
    const auto un = static_cast<std::size_t>(n);
    std::vector<double> score(un, 0.0);
    if (n < 3) return score;

    std::vector<std::vector<Index>> dist(un);
    std::vector<std::vector<double>> sigma(un);
    for (Index s = 0; s < n; ++s) {
        auto& d = dist[static_cast<std::size_t>(s)];
        auto& c = sigma[static_cast<std::size_t>(s)];
        d.assign(un, -1);
        c.assign(un, 0.0);
        std::queue<Index> queue;
        d[static_cast<std::size_t>(s)] = 0;
        c[static_cast<std::size_t>(s)] = 1.0;
        queue.push(s);
        while (!queue.empty()) {
            const auto v = static_cast<std::size_t>(queue.front());
            queue.pop();
            for (Index w = 0; w < n; ++w) {
                if (!a(static_cast<Index>(v), w)) continue;
                const auto uw = static_cast<std::size_t>(w);
                if (d[uw] < 0) {
                    d[uw] = d[v] + 1;
                    queue.push(w);
                }
                if (d[uw] == d[v] + 1) c[uw] += c[v];
            }
        }
    }
    for (std::size_t s = 0; s < un; ++s)
        for (std::size_t t = 0; t < un; ++t) {
            if (s == t || dist[s][t] < 0) continue;
            for (std::size_t v = 0; v < un; ++v) {
                if (v == s || v == t || dist[s][v] < 0 || dist[v][t] < 0) continue;
                if (dist[s][v] + dist[v][t] != dist[s][t]) continue;
                score[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
            }
        }
    const double norm = static_cast<double>((n - 1) * (n - 2));
    for (double& x : score) x /= norm;
    return score;
}

std::vector<double> closeness(const BoolMatrix& adj) {
    require_square(adj);
    const BoolMatrix a = without_loops(adj);
    const Index n = a.rows();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    if (n < 2) return out;
    for (Index v = 0; v < n; ++v) {
        const auto dist = bfs_distances(a, v);
        Index sum = 0;
        bool all = true;
        for (Index t = 0; t < n; ++t) {
            if (t == v) continue;
            if (dist[static_cast<std::size_t>(t)] < 0) {
                all = false;
                break;
            }
            sum += dist[static_cast<std::size_t>(t)];
        }
        if (all) out[static_cast<std::size_t>(v)] = static_cast<double>(n - 1) / static_cast<double>(sum);
    }
    return out;
}

ClusteringResult clustering(const BoolMatrix& adj) {
    const BoolMatrix s = symmetrize(adj);
    const Index n = s.rows();
    ClusteringResult res;
    res.local.assign(static_cast<std::size_t>(n), 0.0);
    double closed = 0.0;
    double triples = 0.0;
    for (Index v = 0; v < n; ++v) {
        std::vector<Index> nb;
        for (Index w = 0; w < n; ++w)
            if (s(v, w)) nb.push_back(w);
        const auto k = static_cast<double>(nb.size());
        Index tri = 0;
        for (std::size_t x = 0; x < nb.size(); ++x)
            for (std::size_t y = x + 1; y < nb.size(); ++y)
                if (s(nb[x], nb[y])) ++tri;
        const double pairs = k * (k - 1.0) / 2.0;
        if (nb.size() >= 2) res.local[static_cast<std::size_t>(v)] = static_cast<double>(tri) / pairs;
        // Each triangle is seen once from each of its three corners, which
        // supplies the factor of three in 3 * triangles / triples.
        closed += static_cast<double>(tri);
        triples += pairs;
    }
    res.global = triples > 0.0 ? closed / triples : 0.0;
    return res;
}

GlobalMetrics global_metrics(const BoolMatrix& adj) {
    require_square(adj);
    const Index n = adj.rows();
    GlobalMetrics g;
    g.nodes = n;
    g.self_loop_count = adj.diagonal().count();
    g.edge_count = without_loops(adj).count();
    g.density = n > 1 ? static_cast<double>(g.edge_count) / static_cast<double>(n * (n - 1)) : 0.0;
    g.global_clustering = clustering(adj).global;

    const BoolMatrix s = symmetrize(adj);
    g.avg_neighbors = n > 0 ? static_cast<double>(s.count()) / static_cast<double>(n) : 0.0;

    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Index v = 0; v < n; ++v) {
        const auto dist = bfs_distances(s, v);
        for (Index d : dist) g.diameter = std::max(g.diameter, d);
        if (seen[static_cast<std::size_t>(v)]) continue;
        ++g.connected_component_count;
        Index size = 0;
        for (Index t = 0; t < n; ++t)
            if (dist[static_cast<std::size_t>(t)] >= 0) {
                seen[static_cast<std::size_t>(t)] = true;
                ++size;
            }
        g.largest_component_size = std::max(g.largest_component_size, size);
    }
    return g;
}

MetricsReport compute_metrics(const BoolMatrix& adj, std::vector<std::string> labels) {
    require_square(adj);
    const Index n = adj.rows();
    if (labels.empty())
        for (Index i = 0; i < n; ++i) labels.push_back("n" + std::to_string(i));
    if (static_cast<Index>(labels.size()) != n) throw Error(ErrorCode::ShapeMismatch, "one label per node required");

    MetricsReport r;
    r.labels = std::move(labels);
    const auto deg = degrees(adj);
    const auto bet = betweenness(adj);
    const auto clo = closeness(adj);
    const auto clu = clustering(adj);
    r.nodes.resize(static_cast<std::size_t>(n));
    for (std::size_t v = 0; v < r.nodes.size(); ++v) {
        r.nodes[v] = NodeMetrics{deg[v].in, deg[v].out, deg[v].total, bet[v], clo[v], clu.local[v]};
    }
    r.global = global_metrics(adj);
    return r;
}

std::vector<DegreeCounts> degrees(const EffectiveNetwork& net) { return degrees(net.aggregate()); }
std::vector<double> betweenness(const EffectiveNetwork& net) { return betweenness(net.aggregate()); }
std::vector<double> closeness(const EffectiveNetwork& net) { return closeness(net.aggregate()); }
ClusteringResult clustering(const EffectiveNetwork& net) { return clustering(net.aggregate()); }
GlobalMetrics global_metrics(const EffectiveNetwork& net) { return global_metrics(net.aggregate()); }
MetricsReport compute_metrics(const EffectiveNetwork& net) { return compute_metrics(net.aggregate(), net.labels()); }

} // namespace ksvarm
