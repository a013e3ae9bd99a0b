#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "unlearn/matrix.hpp"

namespace unlearn {

using Edge = std::pair<NodeId, NodeId>;  // canonical form: first < second

inline Edge canonical_edge(NodeId u, NodeId v) { return u < v ? Edge{u, v} : Edge{v, u}; }

enum class SplitRole : std::uint8_t { train = 0, val = 1, test = 2 };

// Undirected attributed graph in CSR form. Invariants (checked by validate):
// symmetric adjacency, no self-loops, no duplicate edges, labels in
// [0, num_classes), features finite with one row per node, split either empty
// or one role per node.
struct Graph {
    std::int64_t num_nodes = 0;
    std::vector<std::int64_t> row_ptr;  // size num_nodes + 1
    std::vector<NodeId> col_idx;        // sorted within each row
    Matrix features;                    // num_nodes x feature_dim
    std::vector<ClassId> labels;        // size num_nodes
    ClassId num_classes = 0;
    std::vector<std::uint8_t> split;    // empty, or SplitRole per node

    std::int64_t degree(NodeId v) const { return row_ptr[v + 1] - row_ptr[v]; }

    std::span<const NodeId> neighbors(NodeId v) const {
        return {col_idx.data() + row_ptr[v], static_cast<std::size_t>(degree(v))};
    }

    bool has_edge(NodeId u, NodeId v) const;

    std::int64_t num_undirected_edges() const { return static_cast<std::int64_t>(col_idx.size()) / 2; }

    bool has_split() const { return !split.empty(); }

    std::vector<std::uint8_t> mask_of(SplitRole role) const;

    void validate() const;  // throws ValidationError
};

// Builds a validated graph from an undirected edge list. Self-loops are
// dropped (counted in dropped_self_loops when given), duplicates collapse.
Graph build_graph(std::int64_t num_nodes,
                  std::span<const Edge> edges,
                  Matrix features,
                  std::vector<ClassId> labels,
                  ClassId num_classes,
                  std::vector<std::uint8_t> split = {},
                  std::int64_t* dropped_self_loops = nullptr);

// Structural edits; all return freshly validated graphs.
Graph with_labels(const Graph& g, std::vector<ClassId> labels);
Graph add_edges(const Graph& g, std::span<const Edge> edges);
Graph remove_edges(const Graph& g, std::span<const Edge> edges);
Graph isolate_nodes(const Graph& g, std::span<const NodeId> nodes);
std::vector<Edge> undirected_edges(const Graph& g);

// On-disk dataset layout: edges.txt ("u v" per line, 0-indexed),
// features.bin (two little-endian u64 counts N and D, then N*D little-endian
// f32 values row-major), labels.txt (one integer per line), optional
// masks.txt (one of 0/1/2 per line).
enum class IngestFormat { dataset_dir };

Graph load_graph(const std::filesystem::path& dir, IngestFormat format = IngestFormat::dataset_dir);
void save_graph(const Graph& g, const std::filesystem::path& dir);

// The features.bin encoding, reused by checkpoints. Values round to float32.
Matrix load_feature_matrix(const std::filesystem::path& file);
void save_feature_matrix(const Matrix& m, const std::filesystem::path& file);

struct LccResult {
    Graph graph;
    std::vector<NodeId> kept_ids;  // new id -> original id, ascending
};

// Largest connected component, ties broken toward the component holding the
// lowest node id. Kept nodes are relabeled contiguously in ascending original
// order.
LccResult largest_connected_component(const Graph& g);

struct SplitConfig {
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

// Seeded random node split: floor(train_fraction*N) train, floor(val*N) val,
// remainder test.
Graph make_splits(const Graph& g, const SplitConfig& cfg);

struct SbmConfig {
    ClassId num_blocks = 2;
    std::int64_t nodes_per_block = 50;
    double p_in = 0.1;
    double p_out = 0.01;
    std::int64_t feature_dim = 2;
    double feature_noise = 0.0;
    std::uint64_t seed = 0;
};

// Stochastic block model with block-id labels and noisy one-hot block
// indicator features (each bit independently flipped with feature_noise).
Graph generate_sbm(const SbmConfig& cfg);

}  // namespace unlearn
