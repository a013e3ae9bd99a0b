#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <queue>
#include <set>
#include <vector>

#include "unlearn/graph.hpp"
#include "unlearn/rng.hpp"

using namespace unlearn;

namespace {

Matrix ones_features(std::int64_t n, std::int64_t d = 2) {
    Matrix x(n, d);
    for (double& v : x.a) v = 1.0;
    return x;
}

Graph tiny_graph(std::int64_t n, std::vector<Edge> edges, std::vector<ClassId> labels = {},
                 ClassId num_classes = 1) {
    if (labels.empty()) labels.assign(static_cast<std::size_t>(n), 0);
    return build_graph(n, std::move(edges), ones_features(n), std::move(labels), num_classes);
}

// Independent component oracle: plain BFS over an adjacency list.
std::vector<int> bfs_components(std::int64_t n, const std::vector<Edge>& edges) {
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
    for (const auto& [u, v] : edges) {
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
    }
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (NodeId s = 0; s < n; ++s) {
        if (comp[static_cast<std::size_t>(s)] != -1) continue;
        std::queue<NodeId> q;
        q.push(s);
        comp[static_cast<std::size_t>(s)] = next;
        while (!q.empty()) {
            const NodeId u = q.front();
            q.pop();
            for (const NodeId v : adj[static_cast<std::size_t>(u)]) {
                if (comp[static_cast<std::size_t>(v)] == -1) {
                    comp[static_cast<std::size_t>(v)] = next;
                    q.push(v);
                }
            }
        }
        ++next;
    }
    return comp;
}

}  // namespace

TEST_CASE("build_graph symmetrizes, deduplicates, and drops self-loops") {
    const Graph g = tiny_graph(4, {{1, 0}, {0, 1}, {1, 2}, {2, 2}, {1, 2}});
    CHECK(g.num_undirected_edges() == 2);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 0));
    CHECK(g.has_edge(1, 2));
    CHECK_FALSE(g.has_edge(2, 2));
    CHECK_FALSE(g.has_edge(0, 2));
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 2);
    CHECK(g.degree(2) == 1);
    CHECK(g.degree(3) == 0);
}

TEST_CASE("build_graph validates inputs") {
    CHECK_THROWS_AS(tiny_graph(2, {{0, 5}}), ValidationError);
    CHECK_THROWS_AS(build_graph(2, {}, ones_features(3), {0, 0}, 1), ValidationError);
    CHECK_THROWS_AS(build_graph(2, {}, ones_features(2), {0, 7}, 1), ValidationError);
}

TEST_CASE("undirected_edges returns canonical sorted pairs") {
    const Graph g = tiny_graph(4, {{3, 1}, {2, 0}, {0, 1}});
    const auto edges = undirected_edges(g);
    REQUIRE(edges.size() == 3);
    CHECK(edges[0] == Edge{0, 1});
    CHECK(edges[1] == Edge{0, 2});
    CHECK(edges[2] == Edge{1, 3});
}

TEST_CASE("add_edges and remove_edges round-trip; absent removals are ignored") {
    const Graph g = tiny_graph(5, {{0, 1}, {1, 2}});
    const Graph grown = add_edges(g, std::vector<Edge>{{3, 4}});
    CHECK(grown.num_undirected_edges() == 3);
    CHECK(grown.has_edge(3, 4));

    const Graph shrunk = remove_edges(grown, std::vector<Edge>{{3, 4}, {0, 4}});
    CHECK(shrunk.num_undirected_edges() == 2);
    CHECK_FALSE(shrunk.has_edge(3, 4));
    CHECK(shrunk.has_edge(0, 1));
}

TEST_CASE("isolate_nodes drops incident edges but keeps node slots") {
    const Graph g = tiny_graph(4, {{0, 1}, {1, 2}, {2, 3}});
    const Graph iso = isolate_nodes(g, std::vector<NodeId>{1});
    CHECK(iso.num_nodes == 4);
    CHECK(iso.degree(1) == 0);
    CHECK_FALSE(iso.has_edge(0, 1));
    CHECK_FALSE(iso.has_edge(1, 2));
    CHECK(iso.has_edge(2, 3));
    CHECK_THROWS_AS(isolate_nodes(g, std::vector<NodeId>{9}), ConfigError);
}

TEST_CASE("largest_connected_component matches a BFS oracle on random graphs") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t n = 3 + static_cast<std::int64_t>(rng.below(30));
        std::vector<Edge> edges;
        const std::int64_t m = static_cast<std::int64_t>(rng.below(40));
        for (std::int64_t i = 0; i < m; ++i) {
            const NodeId u = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
            const NodeId v = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
            if (u != v) edges.push_back({std::min(u, v), std::max(u, v)});
        }
        const Graph g = tiny_graph(n, edges);
        const auto comp = bfs_components(n, undirected_edges(g));

        std::vector<std::int64_t> sizes(static_cast<std::size_t>(n), 0);
        for (const int c : comp) ++sizes[static_cast<std::size_t>(c)];
        std::int64_t best_size = 0;
        int best_comp = 0;
        for (NodeId v = 0; v < n; ++v) {
            const int c = comp[static_cast<std::size_t>(v)];
            // First node of each component has the lowest id in it, so the
            // scan order resolves size ties toward the lower-id component.
            if (sizes[static_cast<std::size_t>(c)] > best_size) {
                best_size = sizes[static_cast<std::size_t>(c)];
                best_comp = c;
            }
        }

        const LccResult lcc_result = largest_connected_component(g);
        const Graph& lcc = lcc_result.graph;
        CHECK(lcc.num_nodes == best_size);
        std::int64_t expected_edges = 0;
        for (const auto& [u, v] : undirected_edges(g)) {
            if (comp[static_cast<std::size_t>(u)] == best_comp) ++expected_edges;
        }
        CHECK(lcc.num_undirected_edges() == expected_edges);
    }
}

TEST_CASE("largest_connected_component relabels ascending and keeps node data") {
    // Components {0,3} and {1,2,4}; the latter wins on size.
    Matrix x(5, 2);
    for (NodeId v = 0; v < 5; ++v) x.at(v, 0) = static_cast<double>(v);
    const Graph g = build_graph(5, std::vector<Edge>{{0, 3}, {1, 2}, {2, 4}}, std::move(x), {0, 1, 2, 0, 1}, 3);
    const LccResult lcc_result = largest_connected_component(g);
    const Graph& lcc = lcc_result.graph;
    REQUIRE(lcc.num_nodes == 3);
    CHECK(lcc_result.kept_ids == std::vector<NodeId>{1, 2, 4});
    // Old ids 1, 2, 4 in ascending order.
    CHECK(lcc.features.at(0, 0) == doctest::Approx(1.0));
    CHECK(lcc.features.at(1, 0) == doctest::Approx(2.0));
    CHECK(lcc.features.at(2, 0) == doctest::Approx(4.0));
    CHECK(lcc.labels == std::vector<ClassId>{1, 2, 1});
    CHECK(lcc.has_edge(0, 1));
    CHECK(lcc.has_edge(1, 2));
    CHECK_FALSE(lcc.has_edge(0, 2));
}

TEST_CASE("make_splits produces floor counts with the remainder in test") {
    SplitConfig cfg;
    cfg.seed = 4;

    const Graph small = tiny_graph(7, {});
    const Graph split_small = make_splits(small, cfg);
    std::int64_t c[3] = {0, 0, 0};
    for (const std::uint8_t r : split_small.split) ++c[r];
    CHECK(c[0] == 4);  // floor(0.6*7)
    CHECK(c[1] == 1);  // floor(0.2*7)
    CHECK(c[2] == 2);  // remainder

    const Graph big = tiny_graph(18800, {});
    const Graph split_big = make_splits(big, cfg);
    std::int64_t b[3] = {0, 0, 0};
    for (const std::uint8_t r : split_big.split) ++b[r];
    CHECK(b[0] == 11280);
    CHECK(b[1] == 3760);
    CHECK(b[2] == 3760);
}

TEST_CASE("make_splits is seed-deterministic and seed-sensitive") {
    const Graph g = tiny_graph(50, {});
    SplitConfig cfg;
    cfg.seed = 1;
    const Graph a = make_splits(g, cfg);
    const Graph b = make_splits(g, cfg);
    CHECK(a.split == b.split);
    cfg.seed = 2;
    const Graph c = make_splits(g, cfg);
    CHECK(a.split != c.split);
}

TEST_CASE("make_splits rejects fractions that exceed one") {
    const Graph g = tiny_graph(10, {});
    SplitConfig cfg;
    cfg.train_fraction = 0.9;
    cfg.val_fraction = 0.2;
    CHECK_THROWS_AS(make_splits(g, cfg), ConfigError);
}

TEST_CASE("generate_sbm: labels are block ids and noiseless features are one-hot") {
    SbmConfig cfg;
    cfg.num_blocks = 3;
    cfg.nodes_per_block = 40;
    cfg.feature_dim = 5;
    cfg.feature_noise = 0.0;
    cfg.seed = 6;
    const Graph g = generate_sbm(cfg);
    CHECK(g.num_nodes == 120);
    CHECK(g.num_classes == 3);
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        const ClassId block = v / 40;
        CHECK(g.labels[static_cast<std::size_t>(v)] == block);
        for (std::int64_t j = 0; j < 5; ++j) {
            CHECK(g.features.at(v, j) == (j == block ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("generate_sbm edge count sits within 3 sigma of its binomial mean") {
    SbmConfig cfg;
    cfg.num_blocks = 4;
    cfg.nodes_per_block = 100;
    cfg.p_in = 0.1;
    cfg.p_out = 0.01;
    cfg.feature_dim = 4;
    cfg.seed = 0;
    const Graph g = generate_sbm(cfg);
    const double pairs_in = 4.0 * (100.0 * 99.0 / 2.0);
    const double pairs_out = (400.0 * 399.0 / 2.0) - pairs_in;
    const double mean = pairs_in * 0.1 + pairs_out * 0.01;
    const double var = pairs_in * 0.1 * 0.9 + pairs_out * 0.01 * 0.99;
    const double sd = std::sqrt(var);
    CHECK(static_cast<double>(g.num_undirected_edges()) > mean - 3 * sd);
    CHECK(static_cast<double>(g.num_undirected_edges()) < mean + 3 * sd);
}

TEST_CASE("generate_sbm degenerate probabilities give block cliques") {
    SbmConfig cfg;
    cfg.num_blocks = 3;
    cfg.nodes_per_block = 5;
    cfg.p_in = 1.0;
    cfg.p_out = 0.0;
    cfg.feature_dim = 3;
    cfg.seed = 1;
    const Graph g = generate_sbm(cfg);
    CHECK(g.num_undirected_edges() == 3 * 10);  // 3 blocks x C(5,2)
    const auto comp = bfs_components(g.num_nodes, undirected_edges(g));
    std::set<int> comps(comp.begin(), comp.end());
    CHECK(comps.size() == 3);
}

TEST_CASE("generate_sbm requires feature_dim >= num_blocks") {
    SbmConfig cfg;
    cfg.num_blocks = 4;
    cfg.feature_dim = 2;
    CHECK_THROWS_AS(generate_sbm(cfg), ConfigError);
}

TEST_CASE("dataset directory save/load round-trips graph, labels, and masks") {
    SbmConfig cfg;
    cfg.num_blocks = 2;
    cfg.nodes_per_block = 20;
    cfg.feature_noise = 0.1;
    cfg.seed = 9;
    Graph g = generate_sbm(cfg);
    SplitConfig sc;
    sc.seed = 2;
    g = make_splits(g, sc);

    const auto dir = std::filesystem::temp_directory_path() / "unlearn-graph-roundtrip";
    std::filesystem::remove_all(dir);
    save_graph(g, dir);
    const Graph back = load_graph(dir);

    CHECK(back.num_nodes == g.num_nodes);
    CHECK(back.num_classes == g.num_classes);
    CHECK(back.labels == g.labels);
    CHECK(back.split == g.split);
    CHECK(undirected_edges(back) == undirected_edges(g));
    // features.bin stores float32; the generator only emits 0/1 values so the
    // round trip is exact here.
    CHECK(fingerprint(back.features) == fingerprint(g.features));
    std::filesystem::remove_all(dir);
}

TEST_CASE("load_graph rejects a missing directory") {
    CHECK_THROWS_AS(load_graph("/nonexistent/unlearn-dataset"), IoError);
}
