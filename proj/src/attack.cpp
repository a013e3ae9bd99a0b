#include "unlearn/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "unlearn/rng.hpp"

namespace unlearn {

std::string to_string(AttackKind k) {
    return k == AttackKind::label_flip ? "label_flip" : "spurious_edges";
}

AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "label_flip") return AttackKind::label_flip;
    if (s == "spurious_edges") return AttackKind::spurious_edges;
    throw ConfigError("unknown attack kind '" + s + "'");
}

std::int64_t AttackRecord::manipulation_size() const {
    return kind == AttackKind::label_flip ? static_cast<std::int64_t>(flipped_nodes.size())
                                          : static_cast<std::int64_t>(added_edges.size());
}

Graph AttackRecord::reconstruct_clean() const {
    if (kind == AttackKind::label_flip) {
        return with_labels(manipulated, clean_label_vector());
    }
    return remove_edges(manipulated, added_edges);
}

std::vector<ClassId> AttackRecord::clean_label_vector() const {
    std::vector<ClassId> labels = manipulated.labels;
    for (std::size_t i = 0; i < flipped_nodes.size(); ++i) {
        labels[static_cast<std::size_t>(flipped_nodes[i])] = original_labels[i];
    }
    return labels;
}

namespace {

void validate_classes(const Graph& g, const AttackSpec& spec) {
    if (spec.class_a == spec.class_b) throw ConfigError("attack: targeted classes must differ");
    if (spec.class_a < 0 || spec.class_a >= g.num_classes || spec.class_b < 0 || spec.class_b >= g.num_classes) {
        throw ConfigError("attack: targeted class out of range");
    }
}

std::vector<NodeId> class_members(const Graph& g, ClassId c, bool train_only) {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        if (g.labels[static_cast<std::size_t>(v)] != c) continue;
        if (train_only && (!g.has_split() ||
                           g.split[static_cast<std::size_t>(v)] != static_cast<std::uint8_t>(SplitRole::train))) {
            continue;
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

AttackRecord label_flip_attack(const Graph& g, const AttackSpec& spec) {
    validate_classes(g, spec);
    if (!(spec.budget > 0.0) || spec.budget > 1.0) {
        throw ConfigError("label_flip: budget must be a fraction in (0,1]");
    }
    if (!g.has_split()) throw ConfigError("label_flip: graph has no train split");

    const auto members_a = class_members(g, spec.class_a, true);
    const auto members_b = class_members(g, spec.class_b, true);
    if (members_a.size() < 2 || members_b.size() < 2) {
        throw ConfigError("label_flip: each targeted class needs at least two train nodes");
    }

    Rng rng(derive_seed(spec.seed, "label-flip"));
    auto pick = [&](const std::vector<NodeId>& members) {
        const auto count = static_cast<std::int64_t>(std::floor(spec.budget * static_cast<double>(members.size())));
        std::vector<NodeId> chosen;
        for (std::int64_t idx : rng.sample_without_replacement(static_cast<std::int64_t>(members.size()), count)) {
            chosen.push_back(members[static_cast<std::size_t>(idx)]);
        }
        return chosen;
    };
    auto chosen_a = pick(members_a);
    auto chosen_b = pick(members_b);
    if (chosen_a.empty() && chosen_b.empty()) {
        throw ConfigError("label_flip: budget selects zero nodes");
    }

    std::vector<std::pair<NodeId, ClassId>> flips;  // node -> new label
    for (NodeId v : chosen_a) flips.emplace_back(v, spec.class_b);
    for (NodeId v : chosen_b) flips.emplace_back(v, spec.class_a);
    std::sort(flips.begin(), flips.end());

    AttackRecord rec;
    rec.kind = AttackKind::label_flip;
    rec.class_a = spec.class_a;
    rec.class_b = spec.class_b;
    std::vector<ClassId> labels = g.labels;
    for (const auto& [v, y] : flips) {
        rec.flipped_nodes.push_back(v);
        rec.original_labels.push_back(g.labels[static_cast<std::size_t>(v)]);
        labels[static_cast<std::size_t>(v)] = y;
    }
    rec.manipulated = with_labels(g, std::move(labels));
    return rec;
}

AttackRecord spurious_edge_attack(const Graph& g, const AttackSpec& spec) {
    validate_classes(g, spec);
    if (!(spec.budget >= 1.0) || spec.budget != std::floor(spec.budget)) {
        throw ConfigError("spurious_edges: budget must be a positive whole edge count");
    }
    const auto budget = static_cast<std::int64_t>(spec.budget);

    const auto members_a = class_members(g, spec.class_a, false);
    const auto members_b = class_members(g, spec.class_b, false);
    if (members_a.empty() || members_b.empty()) {
        throw ConfigError("spurious_edges: a targeted class has no nodes");
    }

    std::int64_t existing_cross = 0;
    for (NodeId u : members_a) {
        for (NodeId v : g.neighbors(u)) {
            if (g.labels[static_cast<std::size_t>(v)] == spec.class_b) ++existing_cross;
        }
    }
    const std::int64_t capacity =
        static_cast<std::int64_t>(members_a.size()) * static_cast<std::int64_t>(members_b.size()) - existing_cross;
    if (budget > capacity) {
        throw ConfigError("spurious_edges: budget " + std::to_string(budget) + " exceeds the " +
                          std::to_string(capacity) + " available non-adjacent cross-class pairs");
    }

    Rng rng(derive_seed(spec.seed, "spurious-edges"));
    std::set<Edge> added;
    while (static_cast<std::int64_t>(added.size()) < budget) {
        const NodeId u = members_a[static_cast<std::size_t>(rng.below(members_a.size()))];
        const NodeId v = members_b[static_cast<std::size_t>(rng.below(members_b.size()))];
        const Edge e = canonical_edge(u, v);
        if (g.has_edge(u, v) || added.count(e)) continue;
        added.insert(e);
    }

    AttackRecord rec;
    rec.kind = AttackKind::spurious_edges;
    rec.class_a = spec.class_a;
    rec.class_b = spec.class_b;
    rec.added_edges.assign(added.begin(), added.end());
    rec.manipulated = add_edges(g, rec.added_edges);
    return rec;
}

AttackRecord apply_attack(const Graph& g, const AttackSpec& spec) {
    return spec.kind == AttackKind::label_flip ? label_flip_attack(g, spec) : spurious_edge_attack(g, spec);
}

std::int64_t DeletionSet::size() const {
    return kind == EntityKind::nodes ? static_cast<std::int64_t>(nodes.size())
                                     : static_cast<std::int64_t>(edges.size());
}

std::vector<NodeId> DeletionSet::vertex_set() const {
    if (kind == EntityKind::nodes) return nodes;
    std::vector<NodeId> out;
    out.reserve(edges.size() * 2);
    for (const Edge& e : edges) {
        out.push_back(e.first);
        out.push_back(e.second);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DeletionSet sample_deletion_subset(const AttackRecord& record, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ConfigError("sample_deletion_subset: fraction must lie in (0,1]");
    }
    const std::int64_t total = record.manipulation_size();
    if (total == 0) throw ConfigError("sample_deletion_subset: empty manipulation set");
    const std::int64_t count =
        std::max<std::int64_t>(1, std::llround(fraction * static_cast<double>(total)));

    Rng rng(derive_seed(seed, "deletion-subset"));
    auto picked = rng.sample_without_replacement(total, count);
    std::sort(picked.begin(), picked.end());

    DeletionSet del;
    if (record.kind == AttackKind::label_flip) {
        del.kind = EntityKind::nodes;
        for (std::int64_t idx : picked) del.nodes.push_back(record.flipped_nodes[static_cast<std::size_t>(idx)]);
    } else {
        del.kind = EntityKind::edges;
        for (std::int64_t idx : picked) del.edges.push_back(record.added_edges[static_cast<std::size_t>(idx)]);
    }
    return del;
}

void save_attack_record(const AttackRecord& record, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "attack-record v1\n";
    out << "kind " << to_string(record.kind) << '\n';
    out << "classes " << record.class_a << ' ' << record.class_b << '\n';
    if (record.kind == AttackKind::label_flip) {
        out << "flips " << record.flipped_nodes.size() << '\n';
        for (std::size_t i = 0; i < record.flipped_nodes.size(); ++i) {
            out << record.flipped_nodes[i] << ' ' << record.original_labels[i] << ' '
                << record.manipulated.labels[static_cast<std::size_t>(record.flipped_nodes[i])] << '\n';
        }
    } else {
        out << "added_edges " << record.added_edges.size() << '\n';
        for (const Edge& e : record.added_edges) out << e.first << ' ' << e.second << '\n';
    }
    if (!out) throw IoError("short write to " + file.string());
}

AttackRecord load_attack_record(const std::filesystem::path& file, const Graph& clean) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw ParseError(file.string() + ": missing " + what);
        return line;
    };
    if (next_line("header") != "attack-record v1") {
        throw ParseError(file.string() + ": not an attack record");
    }

    AttackRecord rec;
    {
        std::istringstream ss(next_line("kind"));
        std::string key, value;
        if (!(ss >> key >> value) || key != "kind") throw ParseError(file.string() + ": bad kind line");
        rec.kind = attack_kind_from_string(value);
    }
    {
        std::istringstream ss(next_line("classes"));
        std::string key;
        if (!(ss >> key >> rec.class_a >> rec.class_b) || key != "classes") {
            throw ParseError(file.string() + ": bad classes line");
        }
    }

    std::istringstream ss(next_line("entity count"));
    std::string key;
    std::size_t count = 0;
    if (!(ss >> key >> count)) throw ParseError(file.string() + ": bad entity count line");

    if (rec.kind == AttackKind::label_flip) {
        if (key != "flips") throw ParseError(file.string() + ": expected flips section");
        std::vector<ClassId> labels = clean.labels;
        for (std::size_t i = 0; i < count; ++i) {
            std::istringstream row(next_line("flip row"));
            long long node, orig, flipped;
            if (!(row >> node >> orig >> flipped)) throw ParseError(file.string() + ": bad flip row");
            if (node < 0 || node >= clean.num_nodes) throw ParseError(file.string() + ": flip node out of range");
            if (clean.labels[static_cast<std::size_t>(node)] != static_cast<ClassId>(orig)) {
                throw ValidationError(file.string() + ": record disagrees with the clean graph's label of node " +
                                      std::to_string(node));
            }
            rec.flipped_nodes.push_back(static_cast<NodeId>(node));
            rec.original_labels.push_back(static_cast<ClassId>(orig));
            labels[static_cast<std::size_t>(node)] = static_cast<ClassId>(flipped);
        }
        rec.manipulated = with_labels(clean, std::move(labels));
    } else {
        if (key != "added_edges") throw ParseError(file.string() + ": expected added_edges section");
        for (std::size_t i = 0; i < count; ++i) {
            std::istringstream row(next_line("edge row"));
            long long u, v;
            if (!(row >> u >> v)) throw ParseError(file.string() + ": bad edge row");
            if (u < 0 || u >= clean.num_nodes || v < 0 || v >= clean.num_nodes) {
                throw ParseError(file.string() + ": edge endpoint out of range");
            }
            if (clean.has_edge(static_cast<NodeId>(u), static_cast<NodeId>(v))) {
                throw ValidationError(file.string() + ": recorded edge already present in the clean graph");
            }
            rec.added_edges.push_back(canonical_edge(static_cast<NodeId>(u), static_cast<NodeId>(v)));
        }
        rec.manipulated = add_edges(clean, rec.added_edges);
    }
    return rec;
}

}  // namespace unlearn
