#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unlearn/attack.hpp"
#include "unlearn/gcn.hpp"

namespace unlearn {

// full: contrastive neighborhood repair plus decoupled ascent/descent.
// acdc_only: the decoupled optimizer loop without the contrastive phase.
// single_opt_one_lr: one shared optimizer and learning rate, alternating
//   steps, ascent gradients pre-scaled by ascent_lr_multiplier.
// single_opt_combined: one step per epoch on the combined loss with two
//   rate constants.
enum class CognacMode { full, acdc_only, single_opt_one_lr, single_opt_combined };

enum class EmbeddingSource { hidden, logits };
enum class AffectedSelection { topk, random_neighborhood };

std::string to_string(CognacMode m);
CognacMode cognac_mode_from_string(const std::string& s);

struct CognacConfig {
    double k_percent = 4.0;
    std::int64_t total_epochs = 15;
    std::int64_t contrast_epochs = 2;
    std::int64_t ascent_descent_epochs = 2;
    double lr_contrast = 1e-3;
    double lr_ascent = 1e-4;
    double lr_descent = 1e-2;
    CognacMode mode = CognacMode::full;
    bool unlink = true;
    double ascent_lr_multiplier = 1.0;
    EmbeddingSource embedding_source = EmbeddingSource::hidden;
    AffectedSelection selection = AffectedSelection::topk;
    bool resample_pairs = true;  // fresh positive/negative draws each outer epoch
    std::uint64_t seed = 0;
    OptimizerConfig opt_base;  // betas/epsilon; phase learning rates above
};

struct AffectedSet {
    std::vector<NodeId> nodes;    // by descending influence, ties broken by lower id
    std::vector<double> deltas;   // parallel L1 logit shifts
};

// Rows in v_f get x -> 1 - x; all other rows are untouched.
Matrix invert_features(const Matrix& features, std::span<const NodeId> v_f);

// Scores every node outside v_f by the L1 logit change when the deletion
// vertices' features are inverted (exactly two forward passes), and keeps the
// top floor(k_percent/100 * candidates).
AffectedSet identify_affected_nodes(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                    std::span<const NodeId> v_f, double k_percent);

// Control arm for the selection ablation: a uniformly random subset of the
// two-hop neighborhood of v_f (excluding v_f) of the same target size.
AffectedSet random_neighborhood_set(const Graph& g, std::span<const NodeId> v_f, std::int64_t size, Rng& rng);

struct ContrastPairs {
    std::vector<NodeId> anchors;
    std::vector<NodeId> positives;  // neighbor of the anchor, outside v_f
    std::vector<NodeId> negatives;  // member of v_f
};

// One positive/negative draw per affected anchor; anchors whose entire
// neighborhood lies in v_f are dropped.
ContrastPairs sample_contrast_pairs(const Graph& g, std::span<const NodeId> affected,
                                    std::span<const NodeId> v_f, Rng& rng);

// Sum over pairs of -log sigmoid(z_v . z_p) - log sigmoid(-z_v . z_n).
double contrastive_loss_value(const Matrix& z, const ContrastPairs& pairs);

// Loss and exact weight gradients of the pair loss through the chosen
// embedding layer, on one forward pass.
LossGrads contrastive_loss_grads(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                 const ContrastPairs& pairs, EmbeddingSource source, bool train_mode);

// One train-mode forward, exact gradients of the pair loss through the
// chosen embedding layer, one Adam step on the "contrast" instance. Returns
// the loss before the step.
double contrastive_step(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                        const ContrastPairs& pairs, const CognacConfig& cfg);

struct AcdcLosses {
    double ascent_task_loss = 0.0;   // CE over the ascent set (pushed up)
    double descent_task_loss = 0.0;  // CE over the retain set (pushed down)
    bool ascent_ran = false;
};

// One ascent step on the deletion supervision and one descent step on the
// retained train nodes, wired per CognacMode.
AcdcLosses ascent_descent_epoch(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                const std::vector<ClassId>& labels, const std::vector<std::uint8_t>& ascent_mask,
                                const std::vector<std::uint8_t>& descent_mask, const CognacConfig& cfg);

struct UnlearnTraceRow {
    std::int64_t outer_step = 0;
    double contrast_loss = 0.0;
    double ascent_loss = 0.0;
    double descent_loss = 0.0;
};

struct UnlearnReport {
    std::vector<UnlearnTraceRow> trace;
    std::int64_t best_outer = 0;
    double best_val = 0.0;
    std::uint64_t flops = 0;
    double wall_seconds = 0.0;
    bool budget_exhausted = false;
    AffectedSet affected;
};

struct UnlearnResult {
    ModelState state;
    Graph eval_graph;  // the graph the returned model is meant to serve on
    UnlearnReport report;
};

// The unlearning pipeline: identify affected nodes on the manipulated graph,
// optionally unlink the deletion entities, then alternate contrastive and
// ascent/descent phases with per-outer-epoch best-validation checkpointing.
// flop_budget 0 disables the compute budget.
UnlearnResult run_cognac(const ModelState& input, const Graph& manipulated, const DeletionSet& del,
                         const CognacConfig& cfg, const ValContext& vctx, std::uint64_t flop_budget);

void save_unlearn_trace(const UnlearnReport& report, const std::filesystem::path& file);

}  // namespace unlearn
