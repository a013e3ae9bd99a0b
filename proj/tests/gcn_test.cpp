#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "unlearn/gcn.hpp"

using namespace unlearn;

namespace {

Graph path3() {
    Matrix x(3, 2);
    x.at(0, 0) = 1.0;
    x.at(1, 1) = 1.0;
    x.at(2, 0) = 1.0;
    return build_graph(3, std::vector<Edge>{{0, 1}, {1, 2}}, std::move(x), {0, 1, 0}, 2,
                       {0, 0, 0});
}

Graph separable_sbm(std::uint64_t seed) {
    SbmConfig cfg;
    cfg.num_blocks = 2;
    cfg.nodes_per_block = 30;
    cfg.p_in = 0.3;
    cfg.p_out = 0.02;
    cfg.feature_dim = 4;
    cfg.feature_noise = 0.0;
    cfg.seed = seed;
    SplitConfig sc;
    sc.seed = seed + 1;
    return make_splits(generate_sbm(cfg), sc);
}

ModelConfig small_model(const Graph& g, std::uint64_t seed, std::int64_t hidden = 8) {
    ModelConfig m;
    m.feature_dim = g.features.cols;
    m.hidden_dim = hidden;
    m.num_classes = g.num_classes;
    m.dropout_rate = 0.5;
    m.seed = seed;
    return m;
}

}  // namespace

TEST_CASE("normalize_adjacency matches hand values on a 3-path") {
    const Graph g = path3();
    const SparseMatrix a = normalize_adjacency(g);
    // With self-loops the degrees are 2, 3, 2.
    auto value = [&](NodeId i, NodeId j) {
        for (std::int64_t k = a.row_ptr[static_cast<std::size_t>(i)];
             k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            if (a.col[static_cast<std::size_t>(k)] == j) return a.val[static_cast<std::size_t>(k)];
        }
        return 0.0;
    };
    CHECK(value(0, 0) == doctest::Approx(0.5));
    CHECK(value(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
    CHECK(value(1, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(value(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)));
    CHECK(value(2, 2) == doctest::Approx(0.5));
    CHECK(value(0, 2) == 0.0);
}

TEST_CASE("spmm agrees with a dense product and meters 2*nnz*cols") {
    const Graph g = path3();
    const SparseMatrix a = normalize_adjacency(g);
    Matrix dense(3, 3);
    for (NodeId i = 0; i < 3; ++i) {
        for (std::int64_t k = a.row_ptr[static_cast<std::size_t>(i)];
             k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            dense.at(i, a.col[static_cast<std::size_t>(k)]) = a.val[static_cast<std::size_t>(k)];
        }
    }
    Matrix b(3, 4);
    for (std::size_t i = 0; i < b.a.size(); ++i) b.a[i] = 0.1 * static_cast<double>(i) - 0.5;

    const std::uint64_t nnz = a.col.size();
    cost::Scope scope;
    const Matrix sparse_product = spmm(a, b);
    CHECK(scope.elapsed() == 2 * nnz * 4);

    const Matrix dense_product = matmul(dense, b);
    for (std::size_t i = 0; i < sparse_product.a.size(); ++i) {
        CHECK(sparse_product.a[i] == doctest::Approx(dense_product.a[i]).epsilon(1e-12));
    }
}

TEST_CASE("masked_cross_entropy is ln(C) for uniform logits and rejects empty masks") {
    const Matrix logits(4, 3);  // all zeros -> uniform softmax
    const std::vector<ClassId> labels{0, 1, 2, 0};
    const std::vector<std::uint8_t> mask{1, 1, 0, 1};
    CHECK(masked_cross_entropy(logits, labels, mask) == doctest::Approx(std::log(3.0)));
    CHECK_THROWS_AS(masked_cross_entropy(logits, labels, std::vector<std::uint8_t>(4, 0)),
                    ConfigError);
}

TEST_CASE("accuracy counts matches, scaled to 100, with ties to the lower class") {
    Matrix logits(4, 2);
    logits.at(0, 0) = 2.0;               // predicts 0
    logits.at(1, 1) = 1.0;               // predicts 1
    logits.at(2, 0) = logits.at(2, 1);   // tie -> predicts 0
    logits.at(3, 1) = 3.0;               // predicts 1
    const std::vector<ClassId> labels{0, 1, 1, 0};
    const std::vector<std::uint8_t> mask{1, 1, 1, 1};
    CHECK(accuracy(logits, labels, mask) == doctest::Approx(50.0));
    const std::vector<std::uint8_t> first_three{1, 1, 1, 0};
    CHECK(accuracy(logits, labels, first_three) == doctest::Approx(2.0 / 3.0 * 100.0));
    CHECK_THROWS_AS(accuracy(logits, labels, std::vector<std::uint8_t>(4, 0)), ConfigError);
}

TEST_CASE("init_model is seed-deterministic and respects the init scale bound") {
    const Graph g = separable_sbm(3);
    const ModelConfig m = small_model(g, 11);
    const ModelState a = init_model(m);
    const ModelState b = init_model(m);
    CHECK(weights_fingerprint(a) == weights_fingerprint(b));

    ModelConfig m2 = m;
    m2.seed = 12;
    CHECK(weights_fingerprint(a) != weights_fingerprint(init_model(m2)));

    const double bound1 = m.weight_init_scale / std::sqrt(static_cast<double>(m.feature_dim));
    const double bound2 = m.weight_init_scale / std::sqrt(static_cast<double>(m.hidden_dim));
    CHECK(max_abs(a.w1) <= bound1);
    CHECK(max_abs(a.w2) <= bound2);
    CHECK(max_abs(a.w1) > 0.0);
}

TEST_CASE("eval forward equals train forward when dropout is zero") {
    const Graph g = separable_sbm(4);
    ModelConfig m = small_model(g, 21);
    m.dropout_rate = 0.0;
    ModelState s = init_model(m);
    const SparseMatrix a = normalize_adjacency(g);
    const ForwardTrace ev = forward_eval(s, a, g.features);
    const ForwardTrace tr = forward_train(s, a, g.features);
    CHECK(fingerprint(ev.logits) == fingerprint(tr.logits));
    CHECK_FALSE(ev.train_mode);
    CHECK(tr.train_mode);
}

TEST_CASE("train-mode dropout draws fresh masks per call, eval mode is unaffected") {
    const Graph g = separable_sbm(5);
    ModelState s = init_model(small_model(g, 31));
    const SparseMatrix a = normalize_adjacency(g);
    const Matrix logits1 = forward_train(s, a, g.features).logits;
    const Matrix logits2 = forward_train(s, a, g.features).logits;
    CHECK(fingerprint(logits1) != fingerprint(logits2));
    const Matrix e1 = forward_eval(s, a, g.features).logits;
    const Matrix e2 = forward_eval(s, a, g.features).logits;
    CHECK(fingerprint(e1) == fingerprint(e2));
}

TEST_CASE("adam first step matches the closed form") {
    const Graph g = separable_sbm(6);
    ModelConfig m = small_model(g, 41, 4);
    ModelState s = init_model(m);
    const Matrix w1_before = s.w1;

    OptimizerConfig opt;
    opt.learning_rate = 0.01;
    register_optimizer(s, "probe", 1000);

    Gradients grads;
    grads.w1 = Matrix(s.w1.rows, s.w1.cols);
    grads.w2 = Matrix(s.w2.rows, s.w2.cols);
    for (std::size_t i = 0; i < grads.w1.a.size(); ++i) {
        grads.w1.a[i] = (i % 3 == 0) ? 0.5 : -0.25;
    }
    adam_step(s, grads, "probe", opt);

    for (std::size_t i = 0; i < w1_before.a.size(); ++i) {
        const double gradient = grads.w1.a[i];
        // Bias-corrected first step: m_hat = g, v_hat = g^2.
        const double expected =
            w1_before.a[i] - 0.01 * (1.0 - 0.0 / 1000.0) * gradient /
                                 (std::abs(gradient) + opt.epsilon);
        CHECK(s.w1.a[i] == doctest::Approx(expected).epsilon(1e-9));
    }
    // Zero gradient matrix leaves w2 in place.
    CHECK(fingerprint(s.w2) == fingerprint(init_model(m).w2));
}

TEST_CASE("adam rate decays linearly and reaches zero at the budget") {
    const Graph g = separable_sbm(7);
    ModelState s = init_model(small_model(g, 51, 4));
    OptimizerConfig opt;
    opt.learning_rate = 0.1;
    register_optimizer(s, "probe", 2);

    Gradients grads;
    grads.w1 = Matrix(s.w1.rows, s.w1.cols);
    grads.w2 = Matrix(s.w2.rows, s.w2.cols);
    for (double& v : grads.w1.a) v = 1.0;

    adam_step(s, grads, "probe", opt);
    const std::uint64_t after_one = weights_fingerprint(s);
    adam_step(s, grads, "probe", opt);
    const std::uint64_t after_two = weights_fingerprint(s);
    CHECK(after_one != after_two);
    // Step 3 sees rate = lr * max(0, 1 - 2/2) = 0.
    adam_step(s, grads, "probe", opt);
    CHECK(weights_fingerprint(s) == after_two);
}

TEST_CASE("optimizer instances are isolated by id") {
    const Graph g = separable_sbm(8);
    ModelState s = init_model(small_model(g, 61, 4));
    register_optimizer(s, "a", 10);
    register_optimizer(s, "b", 10);
    const std::uint64_t b_before = optimizer_fingerprint(s, "b");

    OptimizerConfig opt;
    Gradients grads;
    grads.w1 = Matrix(s.w1.rows, s.w1.cols);
    grads.w2 = Matrix(s.w2.rows, s.w2.cols);
    for (double& v : grads.w1.a) v = 0.3;
    adam_step(s, grads, "a", opt);

    CHECK(optimizer_fingerprint(s, "b") == b_before);
    CHECK(optimizer_fingerprint(s, "a") != b_before);
    CHECK_THROWS_AS(adam_step(s, grads, "missing", opt), ConfigError);
}

TEST_CASE("training on a separable block model reaches full test accuracy") {
    const Graph g = separable_sbm(9);
    ModelConfig m = small_model(g, 71, 16);
    OptimizerConfig opt;
    const TrainResult tr = train(g, m, opt, 80);

    const SparseMatrix a = normalize_adjacency(g);
    const ForwardTrace trace = forward_eval(tr.state, a, g.features);
    CHECK(accuracy(trace.logits, g.labels, g.mask_of(SplitRole::test)) == doctest::Approx(100.0));
    CHECK(tr.report.best_val == doctest::Approx(100.0));
    CHECK(tr.report.flops > 0);
    CHECK(tr.report.train_loss.size() == 80);
    CHECK(tr.report.train_loss.front() > tr.report.train_loss.back());
}

TEST_CASE("training is bit-deterministic in the seed") {
    const Graph g = separable_sbm(10);
    const ModelConfig m = small_model(g, 81);
    OptimizerConfig opt;
    const TrainResult a = train(g, m, opt, 25);
    const TrainResult b = train(g, m, opt, 25);
    CHECK(weights_fingerprint(a.state) == weights_fingerprint(b.state));
    CHECK(a.report.flops == b.report.flops);
    CHECK(a.report.best_epoch == b.report.best_epoch);

    ModelConfig m2 = m;
    m2.seed = 82;
    const TrainResult c = train(g, m2, opt, 25);
    CHECK(weights_fingerprint(a.state) != weights_fingerprint(c.state));
}

TEST_CASE("train validates inputs") {
    const Graph g = separable_sbm(11);
    const ModelConfig m = small_model(g, 91);
    OptimizerConfig opt;
    CHECK_THROWS_AS(train(g, m, opt, -1), ConfigError);
    const std::vector<std::uint8_t> empty_mask(static_cast<std::size_t>(g.num_nodes), 0);
    CHECK_THROWS_AS(train(g, m, opt, 5, nullptr, &empty_mask), ConfigError);

    Graph unsplit = g;
    unsplit.split.clear();
    CHECK_THROWS_AS(train(unsplit, m, opt, 5), ConfigError);
}

TEST_CASE("epoch zero baseline: zero-epoch training returns the initial weights") {
    const Graph g = separable_sbm(12);
    const ModelConfig m = small_model(g, 101);
    OptimizerConfig opt;
    const TrainResult tr = train(g, m, opt, 0);
    CHECK(weights_fingerprint(tr.state) == weights_fingerprint(init_model(m)));
    CHECK(tr.report.best_epoch == 0);
}

TEST_CASE("val_objective without an attack context is plain validation accuracy") {
    const Graph g = separable_sbm(13);
    const ModelState s = init_model(small_model(g, 111));
    const SparseMatrix a = normalize_adjacency(g);
    ValContext ctx;  // has_attack = false
    const double vo = val_objective(s, a, g, ctx);
    const ForwardTrace trace = forward_eval(s, a, g.features);
    CHECK(vo == doctest::Approx(accuracy(trace.logits, g.labels, g.mask_of(SplitRole::val))));
}

TEST_CASE("val_objective with an attack context averages the two group accuracies") {
    const Graph g = separable_sbm(14);
    const ModelState s = init_model(small_model(g, 121));
    const SparseMatrix a = normalize_adjacency(g);

    ValContext ctx;
    ctx.has_attack = true;
    ctx.class_a = 0;
    ctx.class_b = 0;  // classes {0}: affected = class 0, remaining = class 1
    const double vo = val_objective(s, a, g, ctx);

    const ForwardTrace trace = forward_eval(s, a, g.features);
    const auto val_mask = g.mask_of(SplitRole::val);
    std::vector<std::uint8_t> aff(val_mask.size(), 0), rem(val_mask.size(), 0);
    for (std::size_t i = 0; i < val_mask.size(); ++i) {
        if (!val_mask[i]) continue;
        (g.labels[i] == 0 ? aff : rem)[i] = 1;
    }
    const double expected =
        0.5 * (accuracy(trace.logits, g.labels, aff) + accuracy(trace.logits, g.labels, rem));
    CHECK(vo == doctest::Approx(expected));
}

TEST_CASE("checkpoint save/load round-trips the quantized state") {
    const Graph g = separable_sbm(15);
    const ModelConfig m = small_model(g, 131);
    OptimizerConfig opt;
    const TrainResult tr = train(g, m, opt, 10);

    const auto file = std::filesystem::temp_directory_path() / "unlearn-ckpt-test.bin";
    save_checkpoint(tr.state, file);
    const ModelState loaded = load_checkpoint(file);
    const ModelState quantized = quantize_like_checkpoint(tr.state);

    CHECK(weights_fingerprint(loaded) == weights_fingerprint(quantized));
    CHECK(loaded.cfg.hidden_dim == m.hidden_dim);
    CHECK(loaded.cfg.seed == m.seed);
    CHECK(loaded.optimizers.empty());

    // Identical downstream behavior: the dropout stream restarts identically.
    const SparseMatrix a = normalize_adjacency(g);
    ModelState lhs = loaded;
    ModelState rhs = quantized;
    CHECK(fingerprint(forward_train(lhs, a, g.features).logits) ==
          fingerprint(forward_train(rhs, a, g.features).logits));
    std::filesystem::remove(file);
}

TEST_CASE("load_checkpoint rejects corrupted headers") {
    const auto file = std::filesystem::temp_directory_path() / "unlearn-ckpt-bad.bin";
    {
        std::ofstream out(file, std::ios::binary);
        out << "not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(file), ParseError);
    std::filesystem::remove(file);
}
