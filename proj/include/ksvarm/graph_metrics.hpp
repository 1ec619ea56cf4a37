#pragma once

#include <string>
#include <vector>

#include <ksvarm/network.hpp>

namespace ksvarm {

/**
 * Topology metrics of the aggregate support of an EffectiveNetwork (edge
 * i -> j iff active at some lag).
 *
 * Conventions: self-loops are excluded from every degree and path metric and
 * counted separately. Betweenness and closeness use directed unit-length
 * paths. Clustering, connected components, diameter and average neighbours
 * use the symmetrized simple graph.
 */

struct DegreeCounts {
    Index in = 0;
    Index out = 0;
    Index total = 0;
};

struct ClusteringResult {
    std::vector<double> local;
    double global = 0.0;
};

struct NodeMetrics {
    Index in_degree = 0;
    Index out_degree = 0;
    Index total_degree = 0;
    double betweenness = 0.0;
    double closeness = 0.0;
    double clustering = 0.0;
};

struct GlobalMetrics {
    Index nodes = 0;
    Index edge_count = 0;
    double density = 0.0;
    double global_clustering = 0.0;
    Index diameter = 0;
    double avg_neighbors = 0.0;
    Index self_loop_count = 0;
    Index connected_component_count = 0;
    Index largest_component_size = 0;
};

struct MetricsReport {
    std::vector<std::string> labels;
    std::vector<NodeMetrics> nodes;
    GlobalMetrics global;
};

// Each metric is available on a raw directed adjacency (diagonal = self-loops)
// and on a network, which uses its aggregate support.
std::vector<DegreeCounts> degrees(const BoolMatrix& adj);
std::vector<double> betweenness(const BoolMatrix& adj);
std::vector<double> closeness(const BoolMatrix& adj);
ClusteringResult clustering(const BoolMatrix& adj);
GlobalMetrics global_metrics(const BoolMatrix& adj);
MetricsReport compute_metrics(const BoolMatrix& adj, std::vector<std::string> labels = {});

std::vector<DegreeCounts> degrees(const EffectiveNetwork& net);
std::vector<double> betweenness(const EffectiveNetwork& net);
std::vector<double> closeness(const EffectiveNetwork& net);
ClusteringResult clustering(const EffectiveNetwork& net);
GlobalMetrics global_metrics(const EffectiveNetwork& net);
MetricsReport compute_metrics(const EffectiveNetwork& net);

/// Off-diagonal part of adj OR adj^T.
BoolMatrix symmetrize(const BoolMatrix& adj);

/// Unit-length directed BFS distances from `source`; -1 marks unreachable.
std::vector<Index> bfs_distances(const BoolMatrix& adj, Index source);

} // namespace ksvarm
