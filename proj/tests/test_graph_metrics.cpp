#include <doctest.h>

#include <random>

#include <ksvarm/graph_metrics.hpp>

#include "graph_oracle.hpp"

using namespace ksvarm;
using graph_oracle::from_edges;

TEST_CASE("degrees") {
    const auto empty = BoolMatrix::Constant(4, 4, false);
    for (const auto& d : degrees(empty)) CHECK(d.total == 0);

    const auto single = from_edges(3, {{0, 1}});
    const auto d = degrees(single);
    CHECK(d[0].out == 1);
    CHECK(d[1].in == 1);
    CHECK(d[0].total == 1);
    CHECK(d[1].total == 1);
    CHECK(d[2].total == 0);

    BoolMatrix complete = BoolMatrix::Constant(4, 4, true);
    complete.diagonal().setConstant(false);
    for (const auto& c : degrees(complete)) CHECK(c.total == 6);

    BoolMatrix loops = complete;
    loops(2, 2) = true;
    CHECK(degrees(loops)[2].total == 6);
    CHECK(global_metrics(loops).self_loop_count == 1);
}

TEST_CASE("betweenness") {
    BoolMatrix complete = BoolMatrix::Constant(5, 5, true);
    complete.diagonal().setConstant(false);
    for (double b : betweenness(complete)) CHECK(b == 0.0);

    const auto path = from_edges(3, {{0, 1}, {1, 2}});
    const auto bp = betweenness(path);
    CHECK(bp[1] == 0.5);
    CHECK(bp[0] == 0.0);
    CHECK(bp[2] == 0.0);

    const auto star = from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, true);
    const auto bs = betweenness(star);
    CHECK(bs[0] == 1.0);
    for (int v = 1; v < 5; ++v) CHECK(bs[v] == 0.0);
}

TEST_CASE("closeness") {
    BoolMatrix complete = BoolMatrix::Constant(4, 4, true);
    complete.diagonal().setConstant(false);
    for (double c : closeness(complete)) CHECK(c == 1.0);

    const auto path = from_edges(3, {{0, 1}, {1, 2}});
    const auto cp = closeness(path);
    CHECK(cp[0] == doctest::Approx(2.0 / 3.0));
    CHECK(cp[2] == 0.0);

    const auto isolated = from_edges(3, {{0, 1}, {1, 0}});
    CHECK(closeness(isolated)[2] == 0.0);
}

TEST_CASE("clustering") {
    const auto tri = from_edges(3, {{0, 1}, {1, 2}, {2, 0}});
    const auto ct = clustering(tri);
    for (double c : ct.local) CHECK(c == 1.0);
    CHECK(ct.global == 1.0);

    const auto star = from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, true);
    const auto cs = clustering(star);
    for (double c : cs.local) CHECK(c == 0.0);
    CHECK(cs.global == 0.0);

    const auto pendant = from_edges(4, {{0, 1}, {1, 2}, {2, 0}, {2, 3}});
    const auto cpend = clustering(pendant);
    CHECK(cpend.local[2] == doctest::Approx(1.0 / 3.0));
    CHECK(cpend.local[3] == 0.0);
    CHECK(cpend.global == doctest::Approx(3.0 / 5.0));
}

TEST_CASE("global metrics") {
    const auto empty = BoolMatrix::Constant(5, 5, false);
    const auto ge = global_metrics(empty);
    CHECK(ge.density == 0.0);
    CHECK(ge.connected_component_count == 5);
    CHECK(ge.largest_component_size == 1);
    CHECK(ge.diameter == 0);

    BoolMatrix complete = BoolMatrix::Constant(4, 4, true);
    complete.diagonal().setConstant(false);
    const auto gc = global_metrics(complete);
    CHECK(gc.density == 1.0);
    CHECK(gc.diameter == 1);
    CHECK(gc.connected_component_count == 1);
    CHECK(gc.avg_neighbors == 3.0);

    const auto two = from_edges(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}}, true);
    const auto g2 = global_metrics(two);
    CHECK(g2.connected_component_count == 2);
    CHECK(g2.largest_component_size == 3);
    CHECK(g2.density == doctest::Approx(0.4));
    CHECK(g2.edge_count == 12);
}

TEST_CASE("metrics agree with brute force on fixtures and random graphs") {
    for (const auto& g : graph_oracle::fixtures()) CHECK(graph_oracle::agrees(g));
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<Index> size(1, 7);
    std::uniform_real_distribution<double> p(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = size(rng);
        const double density = p(rng);
        BoolMatrix adj(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) adj(i, j) = p(rng) < density;
        CHECK(graph_oracle::agrees(adj));
    }
}

TEST_CASE("network metrics use the aggregate support across lags") {
    Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(3, 3), w1 = Eigen::MatrixXd::Zero(3, 3);
    w0(0, 1) = 0.5;
    w1(1, 2) = 0.5;
    w1(2, 2) = 0.5;
    w1(0, 1) = 0.002;
    const EffectiveNetwork net({w0, w1}, 0.01);
    const auto rep = compute_metrics(net);
    CHECK(rep.labels == std::vector<std::string>{"n0", "n1", "n2"});
    CHECK(rep.global.edge_count == 2);
    CHECK(rep.global.self_loop_count == 1);
    CHECK(rep.nodes[1].betweenness == 0.5);
    CHECK(rep.nodes[1].in_degree == 1);
    CHECK(rep.nodes[1].out_degree == 1);
}

TEST_CASE("symmetrize and bfs") {
    const auto path = from_edges(4, {{0, 1}, {1, 2}});
    const auto s = symmetrize(path);
    CHECK(s(1, 0));
    CHECK(s(2, 1));
    CHECK_FALSE(s(0, 0));
    CHECK(bfs_distances(path, 0) == std::vector<Index>{0, 1, 2, -1});
    CHECK(bfs_distances(path, 2) == std::vector<Index>{-1, -1, 0, -1});
}
