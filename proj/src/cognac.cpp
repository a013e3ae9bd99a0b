#include "unlearn/cognac.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace unlearn {

std::string to_string(CognacMode m) {
    switch (m) {
        case CognacMode::full: return "full";
        case CognacMode::acdc_only: return "acdc_only";
        case CognacMode::single_opt_one_lr: return "single_opt_one_lr";
        case CognacMode::single_opt_combined: return "single_opt_combined";
    }
    throw ConfigError("unknown cognac mode");
}

CognacMode cognac_mode_from_string(const std::string& s) {
    if (s == "full") return CognacMode::full;
    if (s == "acdc_only") return CognacMode::acdc_only;
    if (s == "single_opt_one_lr") return CognacMode::single_opt_one_lr;
    if (s == "single_opt_combined") return CognacMode::single_opt_combined;
    throw ConfigError("unknown cognac mode '" + s + "'");
}

Matrix invert_features(const Matrix& features, std::span<const NodeId> v_f) {
    Matrix out = features;
    for (NodeId v : v_f) {
        if (v < 0 || v >= features.rows) throw ConfigError("invert_features: node id out of range");
        double* row = out.row(v);
        for (std::int64_t j = 0; j < out.cols; ++j) row[j] = 1.0 - row[j];
    }
    return out;
}

AffectedSet identify_affected_nodes(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                    std::span<const NodeId> v_f, double k_percent) {
    if (k_percent < 0.0 || k_percent > 100.0) {
        throw ConfigError("identify_affected_nodes: k_percent must lie in [0,100]");
    }
    std::vector<std::uint8_t> in_vf(static_cast<std::size_t>(features.rows), 0);
    for (NodeId v : v_f) {
        if (v < 0 || v >= features.rows) throw ConfigError("identify_affected_nodes: node id out of range");
        in_vf[static_cast<std::size_t>(v)] = 1;
    }

    const Matrix base = forward_eval(s, a_hat, features).logits;
    const Matrix perturbed = forward_eval(s, a_hat, invert_features(features, v_f)).logits;

    struct Scored {
        double delta;
        NodeId node;
    };
    std::vector<Scored> scored;
    scored.reserve(static_cast<std::size_t>(features.rows));
    for (NodeId v = 0; v < features.rows; ++v) {
        if (in_vf[static_cast<std::size_t>(v)]) continue;
        double d = 0.0;
        const double* b = base.row(v);
        const double* p = perturbed.row(v);
        for (std::int64_t j = 0; j < base.cols; ++j) d += std::abs(p[j] - b[j]);
        scored.push_back({d, v});
    }

    const auto keep = static_cast<std::int64_t>(
        std::floor(k_percent / 100.0 * static_cast<double>(scored.size())));
    std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
        if (x.delta != y.delta) return x.delta > y.delta;
        return x.node < y.node;
    });

    AffectedSet out;
    for (std::int64_t i = 0; i < keep; ++i) {
        out.nodes.push_back(scored[static_cast<std::size_t>(i)].node);
        out.deltas.push_back(scored[static_cast<std::size_t>(i)].delta);
    }
    return out;
}

AffectedSet random_neighborhood_set(const Graph& g, std::span<const NodeId> v_f, std::int64_t size, Rng& rng) {
    std::vector<std::uint8_t> in_vf(static_cast<std::size_t>(g.num_nodes), 0);
    for (NodeId v : v_f) in_vf[static_cast<std::size_t>(v)] = 1;

    // Two hops to match the model's receptive field.
    std::vector<std::uint8_t> reached(static_cast<std::size_t>(g.num_nodes), 0);
    std::vector<NodeId> frontier(v_f.begin(), v_f.end());
    for (int hop = 0; hop < 2; ++hop) {
        std::vector<NodeId> next;
        for (NodeId v : frontier) {
            for (NodeId u : g.neighbors(v)) {
                if (!reached[static_cast<std::size_t>(u)]) {
                    reached[static_cast<std::size_t>(u)] = 1;
                    next.push_back(u);
                }
            }
        }
        frontier = std::move(next);
    }

    std::vector<NodeId> pool;
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        if (reached[static_cast<std::size_t>(v)] && !in_vf[static_cast<std::size_t>(v)]) pool.push_back(v);
    }
    const std::int64_t take = std::min<std::int64_t>(size, static_cast<std::int64_t>(pool.size()));
    AffectedSet out;
    for (std::int64_t idx : rng.sample_without_replacement(static_cast<std::int64_t>(pool.size()), take)) {
        out.nodes.push_back(pool[static_cast<std::size_t>(idx)]);
        out.deltas.push_back(0.0);
    }
    return out;
}

ContrastPairs sample_contrast_pairs(const Graph& g, std::span<const NodeId> affected,
                                    std::span<const NodeId> v_f, Rng& rng) {
    if (v_f.empty()) throw ConfigError("sample_contrast_pairs: empty deletion vertex set");
    std::vector<std::uint8_t> in_vf(static_cast<std::size_t>(g.num_nodes), 0);
    for (NodeId v : v_f) in_vf[static_cast<std::size_t>(v)] = 1;

    ContrastPairs pairs;
    std::vector<NodeId> eligible;
    for (NodeId v : affected) {
        eligible.clear();
        for (NodeId u : g.neighbors(v)) {
            if (!in_vf[static_cast<std::size_t>(u)]) eligible.push_back(u);
        }
        if (eligible.empty()) continue;
        pairs.anchors.push_back(v);
        pairs.positives.push_back(eligible[static_cast<std::size_t>(rng.below(eligible.size()))]);
        pairs.negatives.push_back(v_f[static_cast<std::size_t>(rng.below(v_f.size()))]);
    }
    return pairs;
}

namespace {

double stable_log_sigmoid(double x) {
    // log sigma(x) = -softplus(-x)
    const double nx = -x;
    const double sp = std::max(nx, 0.0) + std::log1p(std::exp(-std::abs(nx)));
    return -sp;
}

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double dot_rows(const Matrix& z, NodeId a, NodeId b) {
    const double* x = z.row(a);
    const double* y = z.row(b);
    double s = 0.0;
    for (std::int64_t j = 0; j < z.cols; ++j) s += x[j] * y[j];
    return s;
}

}  // namespace

double contrastive_loss_value(const Matrix& z, const ContrastPairs& pairs) {
    double loss = 0.0;
    for (std::size_t i = 0; i < pairs.anchors.size(); ++i) {
        const double sp = dot_rows(z, pairs.anchors[i], pairs.positives[i]);
        const double sn = dot_rows(z, pairs.anchors[i], pairs.negatives[i]);
        loss += -stable_log_sigmoid(sp) - stable_log_sigmoid(-sn);
    }
    return loss;
}

LossGrads contrastive_loss_grads(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                 const ContrastPairs& pairs, EmbeddingSource source, bool train_mode) {
    if (pairs.anchors.empty()) throw ConfigError("contrastive_loss_grads: no pairs");
    const ForwardTrace trace = train_mode ? forward_train(s, a_hat, features) : forward_eval(s, a_hat, features);
    const Matrix& z = source == EmbeddingSource::hidden ? trace.hidden : trace.logits;

    Matrix dz(z.rows, z.cols);
    LossGrads out;
    for (std::size_t i = 0; i < pairs.anchors.size(); ++i) {
        const NodeId v = pairs.anchors[i];
        const NodeId p = pairs.positives[i];
        const NodeId n = pairs.negatives[i];
        const double sp = dot_rows(z, v, p);
        const double sn = dot_rows(z, v, n);
        out.loss += -stable_log_sigmoid(sp) - stable_log_sigmoid(-sn);
        const double cp = sigmoid(sp) - 1.0;  // d loss / d sp
        const double cn = sigmoid(sn);        // d loss / d sn
        double* dv = dz.row(v);
        double* dp = dz.row(p);
        double* dn = dz.row(n);
        const double* zv = z.row(v);
        const double* zp = z.row(p);
        const double* zn = z.row(n);
        for (std::int64_t j = 0; j < z.cols; ++j) {
            dv[j] += cp * zp[j] + cn * zn[j];
            dp[j] += cp * zv[j];
            dn[j] += cn * zv[j];
        }
    }

    out.grads = source == EmbeddingSource::hidden ? backward_from_hidden(s, a_hat, features, trace, dz)
                                                  : backward_from_logits(s, a_hat, features, trace, dz);
    return out;
}

double contrastive_step(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                        const ContrastPairs& pairs, const CognacConfig& cfg) {
    const LossGrads lg = contrastive_loss_grads(s, a_hat, features, pairs, cfg.embedding_source, true);
    OptimizerConfig opt = cfg.opt_base;
    opt.learning_rate = cfg.lr_contrast;
    adam_step(s, lg.grads, "contrast", opt);
    return lg.loss;
}

namespace {

std::int64_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::int64_t n = 0;
    for (std::uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

Gradients scaled(Gradients g, double factor) {
    for (double& v : g.w1.a) v *= factor;
    for (double& v : g.w2.a) v *= factor;
    return g;
}

Gradients summed(Gradients a, const Gradients& b, double b_scale) {
    add_inplace(a.w1, b.w1, b_scale);
    add_inplace(a.w2, b.w2, b_scale);
    return a;
}

}  // namespace

AcdcLosses ascent_descent_epoch(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                const std::vector<ClassId>& labels, const std::vector<std::uint8_t>& ascent_mask,
                                const std::vector<std::uint8_t>& descent_mask, const CognacConfig& cfg) {
    if (mask_count(descent_mask) == 0) throw ConfigError("ascent_descent_epoch: empty retain set");
    const bool have_ascent = mask_count(ascent_mask) > 0;

    AcdcLosses losses;
    OptimizerConfig opt = cfg.opt_base;

    switch (cfg.mode) {
        case CognacMode::full:
        case CognacMode::acdc_only: {
            if (have_ascent) {
                const LossGrads up = cross_entropy_loss_grads(s, a_hat, features, labels, ascent_mask, -1, true);
                losses.ascent_task_loss = -up.loss;
                losses.ascent_ran = true;
                opt.learning_rate = cfg.lr_ascent;
                adam_step(s, up.grads, "ascent", opt);
            }
            const LossGrads down = cross_entropy_loss_grads(s, a_hat, features, labels, descent_mask, 1, true);
            losses.descent_task_loss = down.loss;
            opt.learning_rate = cfg.lr_descent;
            adam_step(s, down.grads, "descent", opt);
            break;
        }
        case CognacMode::single_opt_one_lr: {
            opt.learning_rate = cfg.lr_descent;
            if (have_ascent) {
                const LossGrads up = cross_entropy_loss_grads(s, a_hat, features, labels, ascent_mask, -1, true);
                losses.ascent_task_loss = -up.loss;
                losses.ascent_ran = true;
                adam_step(s, scaled(up.grads, cfg.ascent_lr_multiplier), "shared", opt);
            }
            const LossGrads down = cross_entropy_loss_grads(s, a_hat, features, labels, descent_mask, 1, true);
            losses.descent_task_loss = down.loss;
            adam_step(s, down.grads, "shared", opt);
            break;
        }
        case CognacMode::single_opt_combined: {
            if (!(cfg.lr_descent > 0.0)) {
                throw ConfigError("single_opt_combined: lr_descent must be positive");
            }
            const LossGrads down = cross_entropy_loss_grads(s, a_hat, features, labels, descent_mask, 1, true);
            losses.descent_task_loss = down.loss;
            Gradients g = down.grads;
            if (have_ascent) {
                const LossGrads up = cross_entropy_loss_grads(s, a_hat, features, labels, ascent_mask, -1, true);
                losses.ascent_task_loss = -up.loss;
                losses.ascent_ran = true;
                g = summed(std::move(g), up.grads, cfg.lr_ascent / cfg.lr_descent);
            }
            opt.learning_rate = cfg.lr_descent;
            adam_step(s, g, "shared", opt);
            break;
        }
    }
    return losses;
}

namespace {

void validate_cognac_config(const CognacConfig& cfg) {
    if (cfg.total_epochs < 0 || cfg.contrast_epochs < 0 || cfg.ascent_descent_epochs < 0) {
        throw ConfigError("cognac: epoch counts must be non-negative");
    }
    if (cfg.k_percent < 0.0 || cfg.k_percent > 100.0) throw ConfigError("cognac: k_percent must lie in [0,100]");
    if (!(cfg.lr_contrast >= 0.0) || !(cfg.lr_ascent >= 0.0) || !(cfg.lr_descent >= 0.0)) {
        throw ConfigError("cognac: learning rates must be non-negative");
    }
}

}  // namespace

UnlearnResult run_cognac(const ModelState& input, const Graph& manipulated, const DeletionSet& del,
                         const CognacConfig& cfg, const ValContext& vctx, std::uint64_t flop_budget) {
    validate_cognac_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    cost::Scope meter;

    const std::vector<NodeId> v_f = del.vertex_set();
    if (v_f.empty()) throw ConfigError("run_cognac: empty deletion set");

    UnlearnResult res;
    res.state = input;

    // Identification runs on the manipulated structure: once the deletion
    // entities are unlinked their features cannot influence anyone's logits.
    const bool contrastive_active = cfg.mode == CognacMode::full && cfg.total_epochs > 0 && cfg.contrast_epochs > 0;
    Rng pair_rng(derive_seed(cfg.seed, "contrast-pairs"));
    if (contrastive_active) {
        const SparseMatrix a_manip = normalize_adjacency(manipulated);
        if (cfg.selection == AffectedSelection::topk) {
            res.report.affected =
                identify_affected_nodes(input, a_manip, manipulated.features, v_f, cfg.k_percent);
        } else {
            const auto candidates = static_cast<double>(manipulated.num_nodes - static_cast<std::int64_t>(v_f.size()));
            const auto size = static_cast<std::int64_t>(std::floor(cfg.k_percent / 100.0 * candidates));
            Rng sel_rng(derive_seed(cfg.seed, "random-selection"));
            res.report.affected = random_neighborhood_set(manipulated, v_f, size, sel_rng);
        }
    }

    // Working graph: unlink drops the deletion entities' structure; either
    // way the deletion vertices lose train supervision.
    Graph working = manipulated;
    if (cfg.unlink) {
        working = del.kind == EntityKind::edges ? remove_edges(manipulated, del.edges)
                                                : isolate_nodes(manipulated, v_f);
    }
    const SparseMatrix a_hat = normalize_adjacency(working);

    std::vector<std::uint8_t> in_vf(static_cast<std::size_t>(working.num_nodes), 0);
    for (NodeId v : v_f) in_vf[static_cast<std::size_t>(v)] = 1;
    const auto train_mask = working.mask_of(SplitRole::train);
    std::vector<std::uint8_t> ascent_mask(train_mask.size(), 0);
    std::vector<std::uint8_t> descent_mask(train_mask.size(), 0);
    for (std::size_t i = 0; i < train_mask.size(); ++i) {
        if (!train_mask[i]) continue;
        (in_vf[i] ? ascent_mask : descent_mask)[i] = 1;
    }

    // Each Adam instance decays linearly over its own planned step count.
    const bool have_ascent = [&] {
        for (std::size_t i = 0; i < ascent_mask.size(); ++i) {
            if (ascent_mask[i]) return true;
        }
        return false;
    }();
    const std::int64_t ad_steps = cfg.total_epochs * cfg.ascent_descent_epochs;
    switch (cfg.mode) {
        case CognacMode::full:
            register_optimizer(res.state, "contrast", cfg.total_epochs * cfg.contrast_epochs);
            [[fallthrough]];
        case CognacMode::acdc_only:
            register_optimizer(res.state, "ascent", ad_steps);
            register_optimizer(res.state, "descent", ad_steps);
            break;
        case CognacMode::single_opt_one_lr:
            register_optimizer(res.state, "shared", have_ascent ? 2 * ad_steps : ad_steps);
            break;
        case CognacMode::single_opt_combined:
            register_optimizer(res.state, "shared", ad_steps);
            break;
    }

    res.report.best_outer = 0;
    res.report.best_val = val_objective(res.state, a_hat, working, vctx);
    ModelState best = res.state;

    ContrastPairs pairs;
    if (contrastive_active && !cfg.resample_pairs && !res.report.affected.nodes.empty()) {
        pairs = sample_contrast_pairs(working, res.report.affected.nodes, v_f, pair_rng);
    }

    std::uint64_t last_epoch_cost = 0;
    std::int64_t completed = 0;
    for (std::int64_t outer = 1; outer <= cfg.total_epochs; ++outer) {
        // Budget check once per outer epoch, predictive so the cap is never
        // overshot once the first epoch's cost is known.
        if (flop_budget > 0 && meter.elapsed() + last_epoch_cost > flop_budget) break;
        const std::uint64_t epoch_start = meter.elapsed();

        UnlearnTraceRow row;
        row.outer_step = outer;

        if (contrastive_active && !res.report.affected.nodes.empty()) {
            if (cfg.resample_pairs) {
                pairs = sample_contrast_pairs(working, res.report.affected.nodes, v_f, pair_rng);
            }
            if (!pairs.anchors.empty()) {
                for (std::int64_t i = 0; i < cfg.contrast_epochs; ++i) {
                    row.contrast_loss = contrastive_step(res.state, a_hat, working.features, pairs, cfg);
                }
            }
        }

        for (std::int64_t i = 0; i < cfg.ascent_descent_epochs; ++i) {
            const AcdcLosses l = ascent_descent_epoch(res.state, a_hat, working.features, working.labels,
                                                      ascent_mask, descent_mask, cfg);
            row.ascent_loss = l.ascent_task_loss;
            row.descent_loss = l.descent_task_loss;
        }

        const double vo = val_objective(res.state, a_hat, working, vctx);
        if (vo > res.report.best_val) {
            res.report.best_val = vo;
            res.report.best_outer = outer;
            best = res.state;
        }
        res.report.trace.push_back(row);
        ++completed;
        last_epoch_cost = meter.elapsed() - epoch_start;
    }

    res.report.budget_exhausted = completed == 0 && cfg.total_epochs > 0 && flop_budget > 0;
    res.state = std::move(best);
    res.eval_graph = std::move(working);
    res.report.flops = meter.elapsed();
    res.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

void save_unlearn_trace(const UnlearnReport& report, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "outer_step,contrast_loss,ascent_loss,descent_loss\n";
    char buf[160];
    for (const UnlearnTraceRow& r : report.trace) {
        std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f\n", static_cast<long long>(r.outer_step),
                      r.contrast_loss, r.ascent_loss, r.descent_loss);
        out << buf;
    }
}

}  // namespace unlearn
