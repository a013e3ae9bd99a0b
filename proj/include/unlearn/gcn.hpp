#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unlearn/graph.hpp"
#include "unlearn/matrix.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

// CSR sparse matrix with values; holds the symmetrically normalized
// adjacency with self-loops: A_hat = D^-1/2 (A + I) D^-1/2.
struct SparseMatrix {
    std::int64_t n = 0;
    std::vector<std::int64_t> row_ptr;
    std::vector<NodeId> col;
    std::vector<double> val;
};

SparseMatrix normalize_adjacency(const Graph& g);
Matrix spmm(const SparseMatrix& A, const Matrix& X);

struct ModelConfig {
    std::int64_t feature_dim = 0;
    std::int64_t hidden_dim = 64;
    std::int64_t num_classes = 0;
    int num_layers = 2;  // fixed at 2; validated
    double dropout_rate = 0.5;
    double weight_init_scale = 1.0;
    std::uint64_t seed = 0;
};

struct OptimizerConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Linear decay to zero over this many steps; 0 means the caller's runner
    // fills it in with its planned step budget (train uses its epoch count).
    std::int64_t decay_steps = 0;
};

struct AdamMoments {
    Matrix m_w1, v_w1, m_w2, v_w2;
    std::int64_t step = 0;
    std::int64_t decay_steps = 0;  // planned step budget for the linear decay
};

// Two-layer GCN: logits = A_hat * dropout(relu(A_hat * X * W1)) * W2.
// No biases. Named Adam instances keep their moments independent so ascent
// and descent phases can be decoupled.
struct ModelState {
    ModelConfig cfg;
    Matrix w1, w2;
    std::map<std::string, AdamMoments> optimizers;
    Rng dropout_rng{0};
};

ModelState init_model(const ModelConfig& cfg);

struct ForwardTrace {
    Matrix pre_hidden;                  // A_hat X W1, before relu
    Matrix hidden;                      // after relu (and dropout in train mode)
    Matrix logits;                      // A_hat hidden W2
    std::vector<std::uint8_t> dropout_keep;  // per hidden entry; empty in eval mode
    bool train_mode = false;
    double keep_prob = 1.0;
};

ForwardTrace forward_eval(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features);
ForwardTrace forward_train(ModelState& s, const SparseMatrix& a_hat, const Matrix& features);

Matrix softmax_rows(const Matrix& logits);

// Mean cross-entropy over the masked nodes; errors on an empty mask.
double masked_cross_entropy(const Matrix& logits, const std::vector<ClassId>& labels,
                            const std::vector<std::uint8_t>& mask);

struct Gradients {
    Matrix w1, w2;
};

// Backward passes through the traced forward. d_logits / d_hidden are the
// loss gradients at the respective layer output.
Gradients backward_from_logits(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                               const ForwardTrace& trace, const Matrix& d_logits);
Gradients backward_from_hidden(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                               const ForwardTrace& trace, const Matrix& d_hidden);

// Loss and exact gradients of sign * masked cross-entropy on one forward
// pass (train or eval mode; the dropout mask sampled in the forward is reused
// in the backward).
struct LossGrads {
    double loss = 0.0;
    Gradients grads;
};
LossGrads cross_entropy_loss_grads(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                   const std::vector<ClassId>& labels, const std::vector<std::uint8_t>& mask,
                                   int sign, bool train_mode);

// Registers a named Adam instance with zeroed moments; decay_steps is the
// instance's planned step budget for the linear rate decay (0: no decay
// unless the per-call OptimizerConfig states one).
void register_optimizer(ModelState& s, const std::string& id, std::int64_t decay_steps = 0);
bool has_optimizer(const ModelState& s, const std::string& id);
std::uint64_t optimizer_fingerprint(const ModelState& s, const std::string& id);
std::uint64_t weights_fingerprint(const ModelState& s);

// One Adam update on the named instance with bias correction and the linear
// rate decay from OptimizerConfig. Unknown instance ids are an error.
void adam_step(ModelState& s, const Gradients& grads, const std::string& id, const OptimizerConfig& opt);

// Validation objective used for checkpoint selection: plain validation
// accuracy, or when an attack context is present the mean of the affected
// and remaining class group accuracies. All accuracies are percentages.
struct ValContext {
    bool has_attack = false;
    ClassId class_a = -1;
    ClassId class_b = -1;
    std::vector<ClassId> clean_labels;  // empty: use the graph's labels
};

double accuracy(const Matrix& logits, const std::vector<ClassId>& labels, const std::vector<std::uint8_t>& mask);
double val_objective(const ModelState& s, const SparseMatrix& a_hat, const Graph& g, const ValContext& ctx);

struct TrainReport {
    std::int64_t best_epoch = 0;
    double best_val = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_objectives;
    std::uint64_t flops = 0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    ModelState state;  // best-validation checkpoint
    TrainReport report;
};

// Full-batch training with per-epoch best-validation checkpointing. The
// initial state counts as the epoch-0 checkpoint. An optional mask override
// replaces the graph's train mask (used when deletion nodes lose supervision).
TrainResult train(const Graph& g, const ModelConfig& mcfg, const OptimizerConfig& ocfg, std::int64_t epochs,
                  const ValContext* ctx = nullptr, const std::vector<std::uint8_t>* train_mask_override = nullptr);

// Checkpoints hold the model config and the weight matrices in the
// features.bin layout (float32 payload); optimizer state is not persisted.
void save_checkpoint(const ModelState& s, const std::filesystem::path& file);
ModelState load_checkpoint(const std::filesystem::path& file);

// Round the weights through the float32 checkpoint encoding in memory, so
// cached-from-disk and freshly trained states are bit-identical.
ModelState quantize_like_checkpoint(const ModelState& s);

}  // namespace unlearn
