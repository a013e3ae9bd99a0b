#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unlearn/baselines.hpp"

namespace unlearn {

// Test accuracy against the clean labels, split into the two targeted
// classes (affected) and everything else (remaining).
struct TestMetrics {
    double acc_aff = 0.0;
    double acc_rem = 0.0;
    double overall = 0.0;
    std::int64_t n_aff = 0;
    std::int64_t n_rem = 0;
};

// Errors when either group has no test nodes; the weighted group mean equals
// the overall test accuracy by construction.
TestMetrics test_metrics(const ModelState& s, const Graph& g, const std::vector<ClassId>& clean_labels,
                         ClassId class_a, ClassId class_b);

enum class DatasetKind { sbm, dir };

struct DatasetSpec {
    DatasetKind kind = DatasetKind::sbm;
    std::string name = "sbm";
    SbmConfig sbm;                // per-cell seed overrides sbm.seed
    std::filesystem::path dir;    // kind == dir: a saved dataset directory
    SplitConfig split;            // fractions; per-cell seed overrides split.seed
};

// Materializes the dataset for one cell. The seed drives generation and, when
// the source carries no masks, the split.
Graph build_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Per-method configuration bundle shared by cells, sweeps, and searches.
struct CellConfigs {
    ModelConfig model;            // feature_dim / num_classes filled per dataset
    OptimizerConfig opt;
    std::int64_t train_epochs = 300;
    CognacConfig cognac;
    CognacConfig acdc;            // the acdc arm; its mode is forced to acdc_only
    ScrubConfig scrub;
    double time_budget_ratio = 0.25;
};

struct MetricsReport {
    std::string dataset;
    std::string attack;
    MethodId method = MethodId::original;
    double fraction = 1.0;
    std::uint64_t seed = 0;       // logical cell seed
    double acc_aff = 0.0;
    double acc_rem = 0.0;
    double val_objective = 0.0;
    double wall_time_s = 0.0;     // metered compute at the 1 GFLOP/s reference
    std::string flags;            // "reference", "budget_exhausted", "error:..."
    std::string fingerprint;      // config fingerprint, 16 hex digits
};

struct CellRequest {
    DatasetSpec dataset;
    AttackSpec attack;            // its seed field is ignored; cells derive one
    MethodId method = MethodId::original;
    double fraction = 1.0;
    std::uint64_t seed = 0;       // logical seed
    std::uint64_t master_seed = 0;
    CellConfigs configs;
    std::filesystem::path cache_dir;  // empty: no on-disk poisoned-model cache
};

// Everything the methods of one (dataset, attack, seed) cell share: the clean
// graph, the attack record, and the trained poisoned model.
struct CellContext {
    Graph clean;
    AttackRecord record;
    ModelState poisoned;          // float32-rounded best checkpoint
    std::uint64_t train_flops = 0;
    std::uint64_t effective_seed = 0;
};

CellContext build_cell_context(const CellRequest& req);

// Runs one method on a prepared context. `out_result` (optional) receives the
// unlearned model, its evaluation graph, and the step trace.
MetricsReport run_cell_with_context(const CellContext& ctx, const CellRequest& req,
                                    UnlearnResult* out_result = nullptr);
MetricsReport run_cell(const CellRequest& req);

struct SearchConfig {
    std::int64_t trials = 100;
    std::uint64_t seed = 0;
    std::uint64_t eval_seed = 0;  // logical cell seed the trials tune on
};

struct SweepConfig {
    DatasetSpec dataset;
    AttackSpec attack;
    std::vector<MethodId> methods = {MethodId::original, MethodId::oracle,  MethodId::retrain, MethodId::utu,
                                     MethodId::scrub,    MethodId::cognac, MethodId::acdc};
    std::vector<double> fractions = {0.05, 0.25, 0.50, 0.75, 1.00};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    double time_budget_ratio = 0.25;
    std::uint64_t master_seed = 0;
    int jobs = 1;
    CellConfigs configs;
    SearchConfig search;
};

struct AggregateRow {
    MethodId method = MethodId::original;
    double fraction = 1.0;
    std::int64_t n = 0;
    double acc_aff_mean = 0.0;
    double acc_aff_std = 0.0;     // population standard deviation
    double acc_rem_mean = 0.0;
    double acc_rem_std = 0.0;
    double delta_acc_rem = 0.0;   // mean acc_rem minus the poisoned model's
};

struct SweepResult {
    std::vector<MetricsReport> rows;        // method-major, then fraction, then seed
    std::vector<AggregateRow> aggregates;   // per (method, fraction)
    int errors = 0;
};

// Runs methods x fractions x seeds. A failing cell becomes a row flagged
// "error:..." and the sweep continues.
SweepResult run_sweep(const SweepConfig& cfg, const std::filesystem::path& cache_dir);

void write_results_csv(const std::vector<MetricsReport>& rows, const std::filesystem::path& file);
void write_aggregates_csv(const std::vector<AggregateRow>& aggregates, const std::filesystem::path& file);

struct TrialRow {
    std::int64_t trial = 0;
    double val_objective = 0.0;   // -1 on a failed trial
    double wall_time_s = 0.0;
    std::string params;           // draw-order "name=value;..." string
    std::string flags;
};

struct SearchResult {
    CellConfigs best;
    std::int64_t best_trial = 0;
    double best_val = 0.0;
    std::vector<TrialRow> log;
};

// Seeded random search over the method's hyperparameters; each trial runs one
// cell and is scored by the validation objective. Ties keep the earlier
// trial. Methods without tunable parameters are rejected.
SearchResult hyperparameter_search(MethodId method, const SweepConfig& cfg, double fraction,
                                   const std::filesystem::path& cache_dir);

void write_trials_csv(const std::vector<TrialRow>& log, const std::filesystem::path& file);

// One row per test node: node_id, clean label, affected flag, and the
// embedding values from an eval-mode forward pass. class_a = class_b = -1
// marks every row unaffected.
void export_embeddings(const ModelState& s, const Graph& g, const std::vector<ClassId>& clean_labels,
                       ClassId class_a, ClassId class_b, EmbeddingSource source,
                       const std::filesystem::path& file);

// "key = value" lines with '#' comments; keys mirror the config field names,
// dotted for nesting (e.g. cognac.lr_descent). Unknown keys are errors.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& file);
void apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value);

// Stable hash of everything that determines a cell's result.
std::string config_fingerprint(const CellRequest& req);

// Canonical text rendering of a sweep config, excluding `jobs` (parallelism
// does not change results). Hashed into artifact paths.
std::string sweep_canonical(const SweepConfig& cfg);

}  // namespace unlearn
