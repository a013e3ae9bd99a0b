#include "unlearn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace unlearn {

double gradient_rel_error(const Gradients& a, const Gradients& b) {
    if (!a.w1.same_shape(b.w1) || !a.w2.same_shape(b.w2)) {
        throw ConfigError("gradient_rel_error: shape mismatch");
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < a.w1.a.size(); ++i) diff = std::max(diff, std::abs(a.w1.a[i] - b.w1.a[i]));
    for (std::size_t i = 0; i < a.w2.a.size(); ++i) diff = std::max(diff, std::abs(a.w2.a[i] - b.w2.a[i]));
    const double scale = std::max({max_abs(a.w1), max_abs(a.w2), max_abs(b.w1), max_abs(b.w2), 1e-12});
    return diff / scale;
}

namespace {

// Central differences over every weight entry of both layers.
Gradients fd_gradients(ModelState& s, const std::function<double()>& loss, double eps) {
    Gradients g;
    g.w1 = Matrix::zeros(s.w1.rows, s.w1.cols);
    g.w2 = Matrix::zeros(s.w2.rows, s.w2.cols);
    auto sweep = [&](Matrix& w, Matrix& out) {
        for (std::size_t i = 0; i < w.a.size(); ++i) {
            const double saved = w.a[i];
            w.a[i] = saved + eps;
            const double up = loss();
            w.a[i] = saved - eps;
            const double down = loss();
            w.a[i] = saved;
            out.a[i] = (up - down) / (2.0 * eps);
        }
    };
    sweep(s.w1, g.w1);
    sweep(s.w2, g.w2);
    return g;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed) {
    SbmConfig sbm;
    sbm.num_blocks = 2;
    sbm.nodes_per_block = 15;
    sbm.p_in = 0.3;
    sbm.p_out = 0.05;
    sbm.feature_dim = 6;
    sbm.feature_noise = 0.1;
    sbm.seed = derive_seed(seed, "gradcheck-sbm");
    Graph g = generate_sbm(sbm);
    SplitConfig split;
    split.seed = derive_seed(seed, "gradcheck-split");
    g = make_splits(g, split);

    ModelConfig mcfg;
    mcfg.feature_dim = g.features.cols;
    mcfg.hidden_dim = 8;
    mcfg.num_classes = g.num_classes;
    mcfg.seed = derive_seed(seed, "gradcheck-model");
    ModelState s = init_model(mcfg);

    const SparseMatrix a_hat = normalize_adjacency(g);
    const auto train_mask = g.mask_of(SplitRole::train);
    constexpr double kEps = 1e-4;

    GradCheckReport rep;

    {
        const LossGrads analytic =
            cross_entropy_loss_grads(s, a_hat, g.features, g.labels, train_mask, 1, false);
        const Gradients fd = fd_gradients(
            s, [&] { return masked_cross_entropy(forward_eval(s, a_hat, g.features).logits, g.labels, train_mask); },
            kEps);
        rep.ce_rel_error = gradient_rel_error(analytic.grads, fd);
    }

    {
        Rng vf_rng(derive_seed(seed, "gradcheck-vf"));
        std::vector<NodeId> v_f;
        for (std::int64_t idx : vf_rng.sample_without_replacement(g.num_nodes, 3)) {
            v_f.push_back(static_cast<NodeId>(idx));
        }
        std::sort(v_f.begin(), v_f.end());
        std::vector<NodeId> anchors;
        for (NodeId v = 0; v < g.num_nodes; ++v) {
            if (!std::binary_search(v_f.begin(), v_f.end(), v)) anchors.push_back(v);
        }
        Rng pair_rng(derive_seed(seed, "gradcheck-pairs"));
        const ContrastPairs pairs = sample_contrast_pairs(g, anchors, v_f, pair_rng);

        const LossGrads analytic =
            contrastive_loss_grads(s, a_hat, g.features, pairs, EmbeddingSource::hidden, false);
        const Gradients fd = fd_gradients(
            s, [&] { return contrastive_loss_value(forward_eval(s, a_hat, g.features).hidden, pairs); }, kEps);
        rep.contrastive_rel_error = gradient_rel_error(analytic.grads, fd);
    }

    rep.max_rel_error = std::max(rep.ce_rel_error, rep.contrastive_rel_error);
    rep.pass = rep.max_rel_error <= rep.threshold;
    return rep;
}

}  // namespace unlearn
