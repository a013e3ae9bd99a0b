#include "unlearn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

#include "unlearn/bytes.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

bool Graph::has_edge(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::uint8_t> Graph::mask_of(SplitRole role) const {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_nodes), 0);
    for (std::int64_t v = 0; v < num_nodes; ++v) {
        if (!split.empty() && split[static_cast<std::size_t>(v)] == static_cast<std::uint8_t>(role)) {
            mask[static_cast<std::size_t>(v)] = 1;
        }
    }
    return mask;
}

void Graph::validate() const {
    if (num_nodes < 0) throw ValidationError("graph: negative node count");
    if (static_cast<std::int64_t>(row_ptr.size()) != num_nodes + 1) {
        throw ValidationError("graph: row_ptr size mismatch");
    }
    if (row_ptr.front() != 0 || row_ptr.back() != static_cast<std::int64_t>(col_idx.size())) {
        throw ValidationError("graph: row_ptr endpoints inconsistent with col_idx");
    }
    for (std::int64_t v = 0; v < num_nodes; ++v) {
        if (row_ptr[v] > row_ptr[v + 1]) throw ValidationError("graph: row_ptr not monotone");
        auto nb = neighbors(v);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            NodeId u = nb[i];
            if (u < 0 || u >= num_nodes) throw ValidationError("graph: neighbor index out of range");
            if (u == v) throw ValidationError("graph: self-loop present");
            if (i > 0 && nb[i - 1] >= u) throw ValidationError("graph: duplicate or unsorted neighbor list");
            if (!has_edge(u, static_cast<NodeId>(v))) throw ValidationError("graph: adjacency not symmetric");
        }
    }
    if (features.rows != num_nodes) throw ValidationError("graph: feature row count mismatch");
    for (double x : features.a) {
        if (!std::isfinite(x)) throw ValidationError("graph: non-finite feature value");
    }
    if (static_cast<std::int64_t>(labels.size()) != num_nodes) {
        throw ValidationError("graph: label count mismatch");
    }
    for (ClassId y : labels) {
        if (y < 0 || y >= num_classes) throw ValidationError("graph: label out of class range");
    }
    if (!split.empty()) {
        if (static_cast<std::int64_t>(split.size()) != num_nodes) {
            throw ValidationError("graph: split size mismatch");
        }
        for (std::uint8_t s : split) {
            if (s > 2) throw ValidationError("graph: split role out of range");
        }
    }
}

Graph build_graph(std::int64_t num_nodes,
                  std::span<const Edge> edges,
                  Matrix features,
                  std::vector<ClassId> labels,
                  ClassId num_classes,
                  std::vector<std::uint8_t> split,
                  std::int64_t* dropped_self_loops) {
    std::vector<std::pair<NodeId, NodeId>> directed;
    directed.reserve(edges.size() * 2);
    std::int64_t self_loops = 0;
    for (const auto& [u, v] : edges) {
        if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) {
            throw ValidationError("build_graph: edge endpoint out of range");
        }
        if (u == v) {
            ++self_loops;
            continue;
        }
        directed.emplace_back(u, v);
        directed.emplace_back(v, u);
    }
    if (dropped_self_loops) *dropped_self_loops = self_loops;
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    Graph g;
    g.num_nodes = num_nodes;
    g.row_ptr.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    g.col_idx.reserve(directed.size());
    for (const auto& [u, v] : directed) {
        ++g.row_ptr[static_cast<std::size_t>(u) + 1];
        g.col_idx.push_back(v);
    }
    for (std::int64_t v = 0; v < num_nodes; ++v) g.row_ptr[v + 1] += g.row_ptr[v];
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.num_classes = num_classes;
    g.split = std::move(split);
    g.validate();
    return g;
}

std::vector<Edge> undirected_edges(const Graph& g) {
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(g.num_undirected_edges()));
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        for (NodeId u : g.neighbors(v)) {
            if (v < u) out.emplace_back(v, u);
        }
    }
    return out;
}

Graph with_labels(const Graph& g, std::vector<ClassId> labels) {
    Graph out = g;
    out.labels = std::move(labels);
    out.validate();
    return out;
}

Graph add_edges(const Graph& g, std::span<const Edge> edges) {
    auto all = undirected_edges(g);
    all.insert(all.end(), edges.begin(), edges.end());
    return build_graph(g.num_nodes, all, g.features, g.labels, g.num_classes, g.split);
}

Graph remove_edges(const Graph& g, std::span<const Edge> edges) {
    std::vector<Edge> drop(edges.begin(), edges.end());
    for (auto& e : drop) e = canonical_edge(e.first, e.second);
    std::sort(drop.begin(), drop.end());
    std::vector<Edge> kept;
    kept.reserve(static_cast<std::size_t>(g.num_undirected_edges()));
    for (const Edge& e : undirected_edges(g)) {
        if (!std::binary_search(drop.begin(), drop.end(), e)) kept.push_back(e);
    }
    return build_graph(g.num_nodes, kept, g.features, g.labels, g.num_classes, g.split);
}

Graph isolate_nodes(const Graph& g, std::span<const NodeId> nodes) {
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(g.num_nodes), 0);
    for (NodeId v : nodes) {
        if (v < 0 || v >= g.num_nodes) throw ConfigError("isolate_nodes: node id out of range");
        hit[static_cast<std::size_t>(v)] = 1;
    }
    std::vector<Edge> kept;
    kept.reserve(static_cast<std::size_t>(g.num_undirected_edges()));
    for (const Edge& e : undirected_edges(g)) {
        if (!hit[static_cast<std::size_t>(e.first)] && !hit[static_cast<std::size_t>(e.second)]) {
            kept.push_back(e);
        }
    }
    return build_graph(g.num_nodes, kept, g.features, g.labels, g.num_classes, g.split);
}

Matrix load_feature_matrix(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    try {
        return bytes::read_matrix_block(in, "features.bin payload");
    } catch (const ParseError& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

void save_feature_matrix(const Matrix& m, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    bytes::write_matrix_block(out, m);
    if (!out) throw IoError("short write to " + file.string());
}

namespace {

std::vector<long long> load_int_column(const std::filesystem::path& file, const char* what) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<long long> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        long long v;
        if (!(ss >> v)) {
            throw ParseError(file.string() + ":" + std::to_string(line_no) + ": expected one " + what +
                             " integer, got '" + line + "'");
        }
        std::string rest;
        if (ss >> rest) {
            throw ParseError(file.string() + ":" + std::to_string(line_no) + ": trailing token '" + rest + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

Graph load_graph(const std::filesystem::path& dir, IngestFormat format) {
    if (format != IngestFormat::dataset_dir) throw ConfigError("load_graph: unknown ingestion format");

    Matrix features = load_feature_matrix(dir / "features.bin");
    const std::int64_t n = features.rows;

    std::vector<Edge> edges;
    {
        const auto file = dir / "edges.txt";
        std::ifstream in(file);
        if (!in) throw IoError("cannot open " + file.string());
        std::string line;
        std::int64_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream ss(line);
            long long u, v;
            if (!(ss >> u >> v)) {
                throw ParseError(file.string() + ":" + std::to_string(line_no) +
                                 ": expected 'u v' node pair, got '" + line + "'");
            }
            std::string rest;
            if (ss >> rest) {
                throw ParseError(file.string() + ":" + std::to_string(line_no) + ": trailing token '" + rest + "'");
            }
            if (u < 0 || u >= n || v < 0 || v >= n) {
                throw ParseError(file.string() + ":" + std::to_string(line_no) + ": node index out of range [0," +
                                 std::to_string(n) + ")");
            }
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
    }

    const auto raw_labels = load_int_column(dir / "labels.txt", "label");
    if (static_cast<std::int64_t>(raw_labels.size()) != n) {
        throw ValidationError("labels.txt: have " + std::to_string(raw_labels.size()) + " labels for " +
                              std::to_string(n) + " nodes");
    }
    std::vector<ClassId> labels;
    labels.reserve(raw_labels.size());
    long long max_label = -1;
    for (long long y : raw_labels) {
        if (y < 0) throw ValidationError("labels.txt: negative label");
        max_label = std::max(max_label, y);
        labels.push_back(static_cast<ClassId>(y));
    }
    const ClassId num_classes = static_cast<ClassId>(max_label + 1);

    std::vector<std::uint8_t> split;
    if (std::filesystem::exists(dir / "masks.txt")) {
        const auto raw = load_int_column(dir / "masks.txt", "mask role");
        if (static_cast<std::int64_t>(raw.size()) != n) {
            throw ValidationError("masks.txt: have " + std::to_string(raw.size()) + " roles for " +
                                  std::to_string(n) + " nodes");
        }
        for (long long s : raw) {
            if (s < 0 || s > 2) throw ValidationError("masks.txt: role must be 0, 1 or 2");
            split.push_back(static_cast<std::uint8_t>(s));
        }
    }

    return build_graph(n, edges, std::move(features), std::move(labels), num_classes, std::move(split));
}

void save_graph(const Graph& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "edges.txt");
        if (!out) throw IoError("cannot write " + (dir / "edges.txt").string());
        for (const Edge& e : undirected_edges(g)) out << e.first << ' ' << e.second << '\n';
    }
    save_feature_matrix(g.features, dir / "features.bin");
    {
        std::ofstream out(dir / "labels.txt");
        for (ClassId y : g.labels) out << y << '\n';
    }
    if (g.has_split()) {
        std::ofstream out(dir / "masks.txt");
        for (std::uint8_t s : g.split) out << static_cast<int>(s) << '\n';
    }
}

LccResult largest_connected_component(const Graph& g) {
    std::vector<std::int32_t> component(static_cast<std::size_t>(g.num_nodes), -1);
    std::int32_t best_component = -1;
    std::int64_t best_size = 0;
    std::int32_t next = 0;
    std::deque<NodeId> queue;
    for (NodeId start = 0; start < g.num_nodes; ++start) {
        if (component[static_cast<std::size_t>(start)] >= 0) continue;
        const std::int32_t id = next++;
        std::int64_t size = 0;
        component[static_cast<std::size_t>(start)] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            NodeId v = queue.front();
            queue.pop_front();
            ++size;
            for (NodeId u : g.neighbors(v)) {
                if (component[static_cast<std::size_t>(u)] < 0) {
                    component[static_cast<std::size_t>(u)] = id;
                    queue.push_back(u);
                }
            }
        }
        if (size > best_size) {  // strict: ties keep the component found first
            best_size = size;
            best_component = id;
        }
    }

    LccResult res;
    res.kept_ids.reserve(static_cast<std::size_t>(best_size));
    std::vector<NodeId> new_id(static_cast<std::size_t>(g.num_nodes), -1);
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        if (component[static_cast<std::size_t>(v)] == best_component) {
            new_id[static_cast<std::size_t>(v)] = static_cast<NodeId>(res.kept_ids.size());
            res.kept_ids.push_back(v);
        }
    }

    const std::int64_t m = best_size;
    Matrix features(m, g.features.cols);
    std::vector<ClassId> labels(static_cast<std::size_t>(m));
    std::vector<std::uint8_t> split;
    if (g.has_split()) split.resize(static_cast<std::size_t>(m));
    std::vector<Edge> edges;
    for (std::int64_t i = 0; i < m; ++i) {
        const NodeId old = res.kept_ids[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < g.features.cols; ++j) features.at(i, j) = g.features.at(old, j);
        labels[static_cast<std::size_t>(i)] = g.labels[static_cast<std::size_t>(old)];
        if (g.has_split()) split[static_cast<std::size_t>(i)] = g.split[static_cast<std::size_t>(old)];
        for (NodeId u : g.neighbors(old)) {
            if (old < u) edges.emplace_back(static_cast<NodeId>(i), new_id[static_cast<std::size_t>(u)]);
        }
    }
    res.graph = build_graph(m, edges, std::move(features), std::move(labels), g.num_classes, std::move(split));
    return res;
}

Graph make_splits(const Graph& g, const SplitConfig& cfg) {
    if (cfg.train_fraction < 0 || cfg.val_fraction < 0 || cfg.test_fraction < 0) {
        throw ConfigError("make_splits: fractions must be non-negative");
    }
    const double total = cfg.train_fraction + cfg.val_fraction + cfg.test_fraction;
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("make_splits: fractions must sum to 1");

    std::vector<NodeId> order(static_cast<std::size_t>(g.num_nodes));
    for (NodeId v = 0; v < g.num_nodes; ++v) order[static_cast<std::size_t>(v)] = v;
    Rng rng(derive_seed(cfg.seed, "make_splits"));
    rng.shuffle(order);

    const auto n = static_cast<double>(g.num_nodes);
    const auto n_train = static_cast<std::int64_t>(std::floor(cfg.train_fraction * n));
    const auto n_val = static_cast<std::int64_t>(std::floor(cfg.val_fraction * n));

    std::vector<std::uint8_t> split(static_cast<std::size_t>(g.num_nodes), static_cast<std::uint8_t>(SplitRole::test));
    for (std::int64_t i = 0; i < n_train; ++i) {
        split[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = static_cast<std::uint8_t>(SplitRole::train);
    }
    for (std::int64_t i = n_train; i < n_train + n_val; ++i) {
        split[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = static_cast<std::uint8_t>(SplitRole::val);
    }

    Graph out = g;
    out.split = std::move(split);
    out.validate();
    return out;
}

Graph generate_sbm(const SbmConfig& cfg) {
    if (cfg.num_blocks < 1) throw ConfigError("generate_sbm: need at least one block");
    if (cfg.nodes_per_block < 1) throw ConfigError("generate_sbm: need at least one node per block");
    if (cfg.p_in < 0 || cfg.p_in > 1 || cfg.p_out < 0 || cfg.p_out > 1) {
        throw ConfigError("generate_sbm: edge probabilities must lie in [0,1]");
    }
    if (cfg.feature_dim < cfg.num_blocks) {
        throw ConfigError("generate_sbm: feature_dim must be >= num_blocks for the block indicator");
    }
    if (cfg.feature_noise < 0 || cfg.feature_noise > 1) {
        throw ConfigError("generate_sbm: feature_noise must lie in [0,1]");
    }

    const std::int64_t n = static_cast<std::int64_t>(cfg.num_blocks) * cfg.nodes_per_block;
    auto block_of = [&](std::int64_t v) { return static_cast<ClassId>(v / cfg.nodes_per_block); };

    Rng edge_rng(derive_seed(cfg.seed, "sbm-edges"));
    std::vector<Edge> edges;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i + 1; j < n; ++j) {
            const double p = block_of(i) == block_of(j) ? cfg.p_in : cfg.p_out;
            if (edge_rng.unit() < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        }
    }

    Rng feat_rng(derive_seed(cfg.seed, "sbm-features"));
    Matrix features(n, cfg.feature_dim);
    std::vector<ClassId> labels(static_cast<std::size_t>(n));
    for (std::int64_t v = 0; v < n; ++v) {
        const ClassId b = block_of(v);
        labels[static_cast<std::size_t>(v)] = b;
        for (std::int64_t d = 0; d < cfg.feature_dim; ++d) {
            double bit = (d == b) ? 1.0 : 0.0;
            if (feat_rng.unit() < cfg.feature_noise) bit = 1.0 - bit;
            features.at(v, d) = bit;
        }
    }

    return build_graph(n, edges, std::move(features), std::move(labels), cfg.num_blocks);
}

}  // namespace unlearn
