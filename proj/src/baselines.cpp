#include "unlearn/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

namespace unlearn {

std::string to_string(MethodId m) {
    switch (m) {
        case MethodId::original: return "original";
        case MethodId::oracle: return "oracle";
        case MethodId::retrain: return "retrain";
        case MethodId::utu: return "utu";
        case MethodId::scrub: return "scrub";
        case MethodId::cognac: return "cognac";
        case MethodId::acdc: return "acdc";
    }
    throw ConfigError("unknown MethodId");
}

MethodId method_from_string(const std::string& s) {
    if (s == "original") return MethodId::original;
    if (s == "oracle") return MethodId::oracle;
    if (s == "retrain") return MethodId::retrain;
    if (s == "utu") return MethodId::utu;
    if (s == "scrub") return MethodId::scrub;
    if (s == "cognac") return MethodId::cognac;
    if (s == "acdc") return MethodId::acdc;
    throw ConfigError("unknown method '" + s + "'");
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ConfigError("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) throw ConfigError("kl_divergence: q has a zero where p does not");
        kl += p[i] * (std::log(p[i]) - std::log(q[i]));
    }
    return kl;
}

namespace {

// Row log-softmax of logits/temperature, max-shifted for stability.
void log_softmax_row(const Matrix& logits, std::int64_t row, double temperature, std::vector<double>& out) {
    const std::int64_t c = logits.cols;
    out.resize(static_cast<std::size_t>(c));
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < c; ++j) mx = std::max(mx, logits.at(row, j) / temperature);
    double sum = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
        out[static_cast<std::size_t>(j)] = logits.at(row, j) / temperature - mx;
        sum += std::exp(out[static_cast<std::size_t>(j)]);
    }
    const double lse = std::log(sum);
    for (std::int64_t j = 0; j < c; ++j) out[static_cast<std::size_t>(j)] -= lse;
}

// Mean cross-entropy over the masked rows; accumulates scale * gradient into
// d_logits when given. Returns 0 on an empty mask.
double add_ce_gradient(const Matrix& logits, const std::vector<ClassId>& labels,
                       const std::vector<std::uint8_t>& mask, double scale, Matrix* d_logits) {
    std::int64_t n = 0;
    for (std::uint8_t m : mask) n += m ? 1 : 0;
    if (n == 0) return 0.0;
    double loss = 0.0;
    std::vector<double> lp;
    for (std::int64_t v = 0; v < logits.rows; ++v) {
        if (!mask[static_cast<std::size_t>(v)]) continue;
        log_softmax_row(logits, v, 1.0, lp);
        const auto y = static_cast<std::size_t>(labels[static_cast<std::size_t>(v)]);
        loss -= lp[y];
        if (d_logits != nullptr) {
            for (std::int64_t j = 0; j < logits.cols; ++j) {
                double g = std::exp(lp[static_cast<std::size_t>(j)]);
                if (static_cast<std::size_t>(j) == y) g -= 1.0;
                d_logits->at(v, j) += scale * g / static_cast<double>(n);
            }
        }
    }
    return loss / static_cast<double>(n);
}

std::int64_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::int64_t n = 0;
    for (std::uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

UnlearnResult from_train_result(TrainResult&& tr, Graph&& eval_graph) {
    UnlearnResult res;
    res.state = std::move(tr.state);
    res.eval_graph = std::move(eval_graph);
    res.report.best_outer = tr.report.best_epoch;
    res.report.best_val = tr.report.best_val;
    res.report.flops = tr.report.flops;
    res.report.wall_seconds = tr.report.wall_seconds;
    return res;
}

}  // namespace

double masked_kl_with_grad(const Matrix& student_logits, const Matrix& teacher_logits,
                           const std::vector<std::uint8_t>& mask, double temperature, double scale,
                           Matrix* d_logits) {
    if (!(temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
    if (!student_logits.same_shape(teacher_logits)) throw ConfigError("masked_kl_with_grad: shape mismatch");
    const std::int64_t n = mask_count(mask);
    if (n == 0) throw ValidationError("masked_kl_with_grad: empty mask");

    double total = 0.0;
    std::vector<double> lp, lq;
    for (std::int64_t v = 0; v < student_logits.rows; ++v) {
        if (!mask[static_cast<std::size_t>(v)]) continue;
        log_softmax_row(student_logits, v, temperature, lp);
        log_softmax_row(teacher_logits, v, temperature, lq);
        double kl = 0.0;
        for (std::size_t j = 0; j < lp.size(); ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
        total += kl;
        if (d_logits != nullptr) {
            // d KL / d z_j = (p_j / T) * ((lp_j - lq_j) - KL)
            for (std::int64_t j = 0; j < student_logits.cols; ++j) {
                const auto ell = lp[static_cast<std::size_t>(j)] - lq[static_cast<std::size_t>(j)];
                const double g = std::exp(lp[static_cast<std::size_t>(j)]) / temperature * (ell - kl);
                d_logits->at(v, j) += scale * g / static_cast<double>(n);
            }
        }
    }
    return total / static_cast<double>(n);
}

UnlearnResult run_original(const ModelState& state, const Graph& manipulated) {
    UnlearnResult res;
    res.state = state;
    res.eval_graph = manipulated;
    return res;
}

UnlearnResult run_retrain(const Graph& manipulated, const DeletionSet& del, const ModelConfig& mcfg,
                          const OptimizerConfig& ocfg, std::int64_t epochs, const ValContext* vctx,
                          std::uint64_t seed) {
    if (del.size() == 0) throw ValidationError("retrain requires a non-empty deletion set");
    ModelConfig fresh = mcfg;
    fresh.seed = seed;
    if (del.kind == EntityKind::edges) {
        Graph working = remove_edges(manipulated, del.edges);
        TrainResult tr = train(working, fresh, ocfg, epochs, vctx);
        return from_train_result(std::move(tr), std::move(working));
    }
    Graph working = isolate_nodes(manipulated, del.nodes);
    auto train_mask = working.mask_of(SplitRole::train);
    for (NodeId v : del.nodes) train_mask[static_cast<std::size_t>(v)] = 0;
    TrainResult tr = train(working, fresh, ocfg, epochs, vctx, &train_mask);
    return from_train_result(std::move(tr), std::move(working));
}

UnlearnResult run_oracle(const AttackRecord& record, const ModelConfig& mcfg, const OptimizerConfig& ocfg,
                         std::int64_t epochs, const ValContext* vctx, std::uint64_t seed) {
    Graph clean = record.reconstruct_clean();
    ModelConfig fresh = mcfg;
    fresh.seed = seed;
    TrainResult tr = train(clean, fresh, ocfg, epochs, vctx);
    return from_train_result(std::move(tr), std::move(clean));
}

UnlearnResult run_utu(const ModelState& state, const Graph& manipulated, const DeletionSet& del) {
    if (del.kind != EntityKind::edges) {
        throw UnsupportedMethodError("utu removes edges at inference time; node deletions are not supported");
    }
    if (del.size() == 0) throw ValidationError("utu requires a non-empty deletion set");
    const auto t0 = std::chrono::steady_clock::now();
    cost::Scope meter;
    UnlearnResult res;
    res.state = state;
    res.eval_graph = remove_edges(manipulated, del.edges);
    res.report.flops = meter.elapsed();
    res.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

UnlearnResult run_scrub(const ModelState& input, const Graph& manipulated, const DeletionSet& del,
                        const ScrubConfig& cfg, const ValContext& vctx, std::uint64_t flop_budget) {
    if (cfg.epochs < 0) throw ConfigError("scrub: epochs must be >= 0");
    if (!(cfg.distill_temperature > 0.0)) throw ConfigError("scrub: temperature must be positive");
    if (cfg.away_weight < 0.0 || cfg.toward_weight < 0.0 || cfg.task_weight < 0.0) {
        throw ConfigError("scrub: loss weights must be >= 0");
    }
    if (!(cfg.lr > 0.0)) throw ConfigError("scrub: learning rate must be positive");

    const std::vector<NodeId> v_f = del.vertex_set();
    if (v_f.empty()) throw ConfigError("run_scrub: empty deletion set");

    const auto t0 = std::chrono::steady_clock::now();
    cost::Scope meter;

    const SparseMatrix a_hat = normalize_adjacency(manipulated);
    const Matrix teacher_logits = forward_eval(input, a_hat, manipulated.features).logits;

    std::vector<std::uint8_t> forget_mask(static_cast<std::size_t>(manipulated.num_nodes), 0);
    for (NodeId v : v_f) forget_mask[static_cast<std::size_t>(v)] = 1;
    auto retain_mask = manipulated.mask_of(SplitRole::train);
    for (NodeId v : v_f) retain_mask[static_cast<std::size_t>(v)] = 0;
    const bool have_retain = mask_count(retain_mask) > 0;

    UnlearnResult res;
    res.state = input;
    register_optimizer(res.state, "scrub", 2 * cfg.epochs);
    OptimizerConfig opt = cfg.opt_base;
    opt.learning_rate = cfg.lr;
    opt.decay_steps = 0;  // the instance's registered budget governs

    res.report.best_outer = 0;
    res.report.best_val = val_objective(res.state, a_hat, manipulated, vctx);
    ModelState best = res.state;

    std::uint64_t last_epoch_cost = 0;
    std::int64_t completed = 0;
    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (flop_budget > 0 && meter.elapsed() + last_epoch_cost > flop_budget) break;
        const std::uint64_t epoch_start = meter.elapsed();

        UnlearnTraceRow row;
        row.outer_step = epoch;

        // Away step: ascend KL(student || teacher) on the deletion vertices.
        {
            ForwardTrace trace = forward_train(res.state, a_hat, manipulated.features);
            Matrix d_logits(trace.logits.rows, trace.logits.cols);
            row.ascent_loss = masked_kl_with_grad(trace.logits, teacher_logits, forget_mask,
                                                  cfg.distill_temperature, -cfg.away_weight, &d_logits);
            const Gradients grads =
                backward_from_logits(res.state, a_hat, manipulated.features, trace, d_logits);
            adam_step(res.state, grads, "scrub", opt);
        }

        // Toward step: descend KL plus the task loss on the retained train
        // nodes.
        {
            ForwardTrace trace = forward_train(res.state, a_hat, manipulated.features);
            Matrix d_logits(trace.logits.rows, trace.logits.cols);
            double loss = 0.0;
            if (have_retain) {
                loss += cfg.toward_weight * masked_kl_with_grad(trace.logits, teacher_logits, retain_mask,
                                                                cfg.distill_temperature, cfg.toward_weight,
                                                                &d_logits);
                loss += cfg.task_weight * add_ce_gradient(trace.logits, manipulated.labels, retain_mask,
                                                          cfg.task_weight, &d_logits);
            }
            row.descent_loss = loss;
            const Gradients grads =
                backward_from_logits(res.state, a_hat, manipulated.features, trace, d_logits);
            adam_step(res.state, grads, "scrub", opt);
        }

        const double vo = val_objective(res.state, a_hat, manipulated, vctx);
        if (vo > res.report.best_val) {
            res.report.best_val = vo;
            res.report.best_outer = epoch;
            best = res.state;
        }
        res.report.trace.push_back(row);
        ++completed;
        last_epoch_cost = meter.elapsed() - epoch_start;
    }

    res.report.budget_exhausted = completed == 0 && cfg.epochs > 0 && flop_budget > 0;
    res.state = std::move(best);
    res.eval_graph = manipulated;
    res.report.flops = meter.elapsed();
    res.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace unlearn
