#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unlearn/graph.hpp"

namespace unlearn {

enum class AttackKind { label_flip, spurious_edges };

std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

// budget: for label_flip the fraction of each targeted class's train nodes
// (floor per class); for spurious_edges the absolute number of added edges.
struct AttackSpec {
    AttackKind kind = AttackKind::label_flip;
    ClassId class_a = 0;
    ClassId class_b = 1;
    double budget = 0.0;
    std::uint64_t seed = 0;
};

// A manipulation plus everything needed to undo it: the manipulated graph,
// the manipulated entity set S_m, and the clean backup (original labels of
// flipped nodes; added edges are their own absence markers).
struct AttackRecord {
    AttackKind kind = AttackKind::label_flip;
    ClassId class_a = 0;
    ClassId class_b = 1;
    Graph manipulated;
    std::vector<NodeId> flipped_nodes;      // ascending
    std::vector<ClassId> original_labels;   // parallel to flipped_nodes
    std::vector<Edge> added_edges;          // ascending canonical

    std::int64_t manipulation_size() const;
    Graph reconstruct_clean() const;
    // The manipulated graph's labels with flips restored; identical to the
    // clean labels for edge attacks.
    std::vector<ClassId> clean_label_vector() const;
};

// Interclass confusion: per targeted class, floor(budget * n_class) train
// nodes are relabeled to the other class.
AttackRecord label_flip_attack(const Graph& g, const AttackSpec& spec);

// Adds budget distinct new edges between class_a and class_b nodes by
// rejection sampling.
AttackRecord spurious_edge_attack(const Graph& g, const AttackSpec& spec);

AttackRecord apply_attack(const Graph& g, const AttackSpec& spec);

enum class EntityKind { nodes, edges };

// The deletion request handed to unlearning methods: a uniformly sampled
// subset S_f of the manipulation set, of size max(1, round(fraction*|S_m|)).
struct DeletionSet {
    EntityKind kind = EntityKind::nodes;
    std::vector<NodeId> nodes;  // ascending; node entities
    std::vector<Edge> edges;    // ascending; edge entities

    std::int64_t size() const;
    // The deletion vertex set V_f: the nodes themselves, or the union of
    // edge endpoints.
    std::vector<NodeId> vertex_set() const;
};

DeletionSet sample_deletion_subset(const AttackRecord& record, double fraction, std::uint64_t seed);

// Structured text record, reproducible against the clean graph.
void save_attack_record(const AttackRecord& record, const std::filesystem::path& file);
AttackRecord load_attack_record(const std::filesystem::path& file, const Graph& clean);

}  // namespace unlearn
