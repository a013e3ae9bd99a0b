#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "unlearn/cognac.hpp"

namespace unlearn {

// Closed set of methods the harness runs. cognac/acdc share one engine
// (acdc is cognac with the contrastive phase disabled).
enum class MethodId { original, oracle, retrain, utu, scrub, cognac, acdc };

std::string to_string(MethodId m);
MethodId method_from_string(const std::string& s);

// Teacher-student distillation: alternating epochs of one step away from the
// teacher on the deletion vertices and one step toward it (plus the task
// loss) on the retained train nodes.
struct ScrubConfig {
    std::int64_t epochs = 10;
    double distill_temperature = 4.0;
    double away_weight = 1.0;
    double toward_weight = 1.0;
    double task_weight = 1.0;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    OptimizerConfig opt_base;
};

// KL(p || q) of two discrete distributions.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Mean KL(softmax(student/T) || softmax(teacher/T)) over the masked rows.
// When d_logits is given, scale * d(mean KL)/d(student_logits) is accumulated
// into it. Errors on an empty mask.
double masked_kl_with_grad(const Matrix& student_logits, const Matrix& teacher_logits,
                           const std::vector<std::uint8_t>& mask, double temperature, double scale,
                           Matrix* d_logits);

// Identity pass-through: the poisoned model evaluated as-is.
UnlearnResult run_original(const ModelState& state, const Graph& manipulated);

// Drops the deletion entities (edge kind: the edges; node kind: the nodes,
// their incident edges, and their train supervision) and trains a fresh model
// from `seed`. Reported at full cost, outside any unlearning budget.
UnlearnResult run_retrain(const Graph& manipulated, const DeletionSet& del, const ModelConfig& mcfg,
                          const OptimizerConfig& ocfg, std::int64_t epochs, const ValContext* vctx,
                          std::uint64_t seed);

// Reconstructs the clean graph from the attack record and trains a fresh
// model on it: the empirical upper bound.
UnlearnResult run_oracle(const AttackRecord& record, const ModelConfig& mcfg, const OptimizerConfig& ocfg,
                         std::int64_t epochs, const ValContext* vctx, std::uint64_t seed);

// Unlink-to-unlearn: weights untouched, the deleted edges are removed from
// the inference adjacency only. Edge deletions only.
UnlearnResult run_utu(const ModelState& state, const Graph& manipulated, const DeletionSet& del);

// Alternating away/toward distillation against the frozen input model on the
// unchanged graph structure. flop_budget 0 disables the compute budget.
UnlearnResult run_scrub(const ModelState& input, const Graph& manipulated, const DeletionSet& del,
                        const ScrubConfig& cfg, const ValContext& vctx, std::uint64_t flop_budget);

}  // namespace unlearn
