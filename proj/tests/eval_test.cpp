#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "unlearn/eval.hpp"

using namespace unlearn;

namespace {

namespace fs = std::filesystem;

// Three blocks so the metrics always have a remaining group.
SweepConfig small_sweep() {
    SweepConfig cfg;
    cfg.dataset.kind = DatasetKind::sbm;
    cfg.dataset.name = "mini";
    cfg.dataset.sbm.num_blocks = 3;
    cfg.dataset.sbm.nodes_per_block = 20;
    cfg.dataset.sbm.p_in = 0.35;
    cfg.dataset.sbm.p_out = 0.03;
    cfg.dataset.sbm.feature_dim = 3;
    cfg.dataset.sbm.feature_noise = 0.0;
    cfg.attack.kind = AttackKind::label_flip;
    cfg.attack.class_a = 0;
    cfg.attack.class_b = 1;
    cfg.attack.budget = 0.5;
    cfg.configs.model.hidden_dim = 8;
    cfg.configs.model.dropout_rate = 0.0;
    cfg.configs.train_epochs = 40;
    cfg.configs.cognac.total_epochs = 4;
    cfg.configs.cognac.contrast_epochs = 1;
    cfg.configs.cognac.ascent_descent_epochs = 1;
    cfg.configs.cognac.k_percent = 8.0;
    cfg.configs.acdc = cfg.configs.cognac;
    cfg.configs.scrub.epochs = 4;
    cfg.methods = {MethodId::original, MethodId::cognac};
    cfg.fractions = {0.5, 1.0};
    cfg.seeds = {0, 1};
    return cfg;
}

CellRequest request_for(const SweepConfig& cfg, MethodId method, double fraction, std::uint64_t seed) {
    CellRequest req;
    req.dataset = cfg.dataset;
    req.attack = cfg.attack;
    req.method = method;
    req.fraction = fraction;
    req.seed = seed;
    req.master_seed = cfg.master_seed;
    req.configs = cfg.configs;
    req.configs.time_budget_ratio = cfg.time_budget_ratio;
    return req;
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> read_lines(const fs::path& file) {
    std::ifstream in(file);
    REQUIRE(bool(in));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_fields(const std::string& line) {
    return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("test_metrics partitions the test set and recombines to the overall accuracy") {
    const SweepConfig cfg = small_sweep();
    const Graph g = build_dataset(cfg.dataset, 3);
    ModelConfig mcfg = cfg.configs.model;
    mcfg.feature_dim = g.features.cols;
    mcfg.num_classes = g.num_classes;
    mcfg.seed = 5;
    const TrainResult tr = train(g, mcfg, cfg.configs.opt, 30, nullptr);

    const TestMetrics m = test_metrics(tr.state, g, g.labels, 0, 1);
    std::int64_t test_total = 0;
    for (std::uint8_t r : g.split) {
        if (r == static_cast<std::uint8_t>(SplitRole::test)) ++test_total;
    }
    CHECK(m.n_aff + m.n_rem == test_total);
    CHECK(m.n_aff > 0);
    CHECK(m.n_rem > 0);
    const double recombined = (m.acc_aff * static_cast<double>(m.n_aff) + m.acc_rem * static_cast<double>(m.n_rem)) /
                              static_cast<double>(m.n_aff + m.n_rem);
    CHECK(recombined == doctest::Approx(m.overall).epsilon(1e-9));

    // Every label in {a, b}: the remaining group is empty.
    DatasetSpec two_block = cfg.dataset;
    two_block.sbm.num_blocks = 2;
    two_block.sbm.feature_dim = 2;
    const Graph g2 = build_dataset(two_block, 3);
    ModelConfig m2 = mcfg;
    m2.feature_dim = g2.features.cols;
    m2.num_classes = g2.num_classes;
    const TrainResult tr2 = train(g2, m2, cfg.configs.opt, 10, nullptr);
    CHECK_THROWS_AS(test_metrics(tr2.state, g2, g2.labels, 0, 1), ValidationError);
}

TEST_CASE("build_dataset derives everything from the cell seed") {
    const SweepConfig cfg = small_sweep();

    DatasetSpec a = cfg.dataset;
    a.sbm.seed = 999;  // ignored: the cell seed governs
    DatasetSpec b = cfg.dataset;
    b.sbm.seed = 111;

    const Graph ga = build_dataset(a, 4);
    const Graph gb = build_dataset(b, 4);
    CHECK(ga.col_idx == gb.col_idx);
    CHECK(ga.labels == gb.labels);
    CHECK(ga.split == gb.split);
    CHECK(fingerprint(ga.features) == fingerprint(gb.features));
    CHECK(ga.has_split());

    const Graph gc = build_dataset(a, 5);
    CHECK(gc.col_idx != ga.col_idx);
}

TEST_CASE("build_dataset loads saved directories and splits unsplit ones") {
    const SweepConfig cfg = small_sweep();
    const Graph made = build_dataset(cfg.dataset, 7);

    const fs::path with_masks = fresh_dir("eval_ds_masks");
    save_graph(made, with_masks);
    DatasetSpec spec;
    spec.kind = DatasetKind::dir;
    spec.dir = with_masks;
    const Graph loaded = build_dataset(spec, 12);
    CHECK(loaded.split == made.split);  // masks on disk win over the seed
    CHECK(loaded.labels == made.labels);

    Graph bare = made;
    bare.split.clear();
    const fs::path without_masks = fresh_dir("eval_ds_bare");
    save_graph(bare, without_masks);
    spec.dir = without_masks;
    const Graph split_a = build_dataset(spec, 12);
    const Graph split_b = build_dataset(spec, 12);
    const Graph split_c = build_dataset(spec, 13);
    CHECK(split_a.has_split());
    CHECK(split_a.split == split_b.split);
    CHECK(split_a.split != split_c.split);

    fs::remove_all(with_masks);
    fs::remove_all(without_masks);
}

TEST_CASE("run_cell is repeatable and its report matches the returned model") {
    const SweepConfig cfg = small_sweep();
    const CellRequest req = request_for(cfg, MethodId::cognac, 0.5, 0);

    const MetricsReport first = run_cell(req);
    const MetricsReport second = run_cell(req);
    CHECK(first.acc_aff == second.acc_aff);
    CHECK(first.acc_rem == second.acc_rem);
    CHECK(first.val_objective == second.val_objective);
    CHECK(first.wall_time_s == second.wall_time_s);
    CHECK(first.fingerprint == second.fingerprint);
    CHECK(first.dataset == "mini");
    CHECK(first.attack == "label_flip");
    CHECK(first.method == MethodId::cognac);
    CHECK(first.fraction == 0.5);

    const CellContext ctx = build_cell_context(req);
    UnlearnResult out;
    const MetricsReport third = run_cell_with_context(ctx, req, &out);
    CHECK(third.acc_aff == first.acc_aff);
    const TestMetrics direct = test_metrics(out.state, out.eval_graph, ctx.record.clean_label_vector(),
                                            req.attack.class_a, req.attack.class_b);
    CHECK(direct.acc_aff == doctest::Approx(third.acc_aff).epsilon(1e-12));
    CHECK(direct.acc_rem == doctest::Approx(third.acc_rem).epsilon(1e-12));
}

TEST_CASE("reference methods are flagged and unlearning stays under the compute cap") {
    const SweepConfig cfg = small_sweep();

    const MetricsReport original = run_cell(request_for(cfg, MethodId::original, 0.5, 1));
    CHECK(original.flags == "reference");
    const MetricsReport oracle = run_cell(request_for(cfg, MethodId::oracle, 0.5, 1));
    CHECK(oracle.flags == "reference");
    const MetricsReport retrain = run_cell(request_for(cfg, MethodId::retrain, 0.5, 1));
    CHECK(retrain.flags == "reference");

    const CellRequest probe = request_for(cfg, MethodId::original, 0.5, 1);
    const CellContext ctx = build_cell_context(probe);
    const double cap = 1.05 * cfg.time_budget_ratio * cost::to_seconds(ctx.train_flops);
    for (MethodId m : {MethodId::cognac, MethodId::acdc, MethodId::scrub}) {
        const MetricsReport r = run_cell(request_for(cfg, m, 0.5, 1));
        CAPTURE(to_string(m));
        CHECK(r.wall_time_s <= cap);
        CHECK(r.flags.find("error") == std::string::npos);
    }
}

TEST_CASE("run_cell validates fraction and budget ratio") {
    const SweepConfig cfg = small_sweep();
    CellRequest req = request_for(cfg, MethodId::cognac, 0.0, 0);
    CHECK_THROWS_AS(run_cell(req), ConfigError);
    req.fraction = 1.5;
    CHECK_THROWS_AS(run_cell(req), ConfigError);
    req.fraction = 0.5;
    req.configs.time_budget_ratio = 0.0;
    CHECK_THROWS_AS(run_cell(req), ConfigError);
}

TEST_CASE("run_sweep lays out method-major rows and counts no errors on a clean plan") {
    const SweepConfig cfg = small_sweep();
    const SweepResult res = run_sweep(cfg, fs::path());

    REQUIRE(res.rows.size() == 8);  // 2 methods x 2 fractions x 2 seeds
    CHECK(res.errors == 0);
    std::size_t i = 0;
    for (MethodId m : cfg.methods) {
        for (double f : cfg.fractions) {
            for (std::uint64_t s : cfg.seeds) {
                CHECK(res.rows[i].method == m);
                CHECK(res.rows[i].fraction == f);
                CHECK(res.rows[i].seed == s);
                ++i;
            }
        }
    }

    // The poisoned model ignores the deletion fraction: identical metrics,
    // distinct per-fraction fingerprints.
    const MetricsReport& o05 = res.rows[0];
    const MetricsReport& o10 = res.rows[2];
    CHECK(o05.acc_aff == o10.acc_aff);
    CHECK(o05.acc_rem == o10.acc_rem);
    CHECK(o05.wall_time_s == o10.wall_time_s);
    CHECK(o05.fingerprint != o10.fingerprint);

    REQUIRE(res.aggregates.size() == 4);
    for (const AggregateRow& agg : res.aggregates) {
        CHECK(agg.n == 2);
        // Hand-check mean and population deviation against the matching rows.
        std::vector<double> aff;
        for (const MetricsReport& r : res.rows) {
            if (r.method == agg.method && r.fraction == agg.fraction) aff.push_back(r.acc_aff);
        }
        REQUIRE(aff.size() == 2);
        const double mean = (aff[0] + aff[1]) / 2.0;
        const double var = ((aff[0] - mean) * (aff[0] - mean) + (aff[1] - mean) * (aff[1] - mean)) / 2.0;
        CHECK(agg.acc_aff_mean == doctest::Approx(mean).epsilon(1e-12));
        CHECK(agg.acc_aff_std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
        if (agg.method == MethodId::original) CHECK(agg.delta_acc_rem == 0.0);
    }
}

TEST_CASE("a sweep survives unsupported cells by flagging the rows") {
    SweepConfig cfg = small_sweep();
    cfg.methods = {MethodId::utu};  // node-track deletions: unsupported
    cfg.fractions = {0.5};
    cfg.seeds = {0};
    const SweepResult res = run_sweep(cfg, fs::path());
    REQUIRE(res.rows.size() == 1);
    CHECK(res.errors == 1);
    CHECK(res.rows[0].flags.rfind("error:", 0) == 0);
    CHECK(res.rows[0].acc_aff == 0.0);
    CHECK(res.rows[0].acc_rem == 0.0);
}

TEST_CASE("sweeps reuse the on-disk cache and reproduce byte-identical artifacts") {
    const SweepConfig cfg = small_sweep();
    const fs::path cache = fresh_dir("eval_sweep_cache");
    const fs::path out_a = fs::temp_directory_path() / "eval_sweep_a.csv";
    const fs::path out_b = fs::temp_directory_path() / "eval_sweep_b.csv";

    const SweepResult cold = run_sweep(cfg, cache);
    write_results_csv(cold.rows, out_a);
    bool cached_model = false;
    for (const auto& entry : fs::directory_iterator(cache)) {
        if (entry.path().extension() == ".ckpt") cached_model = true;
    }
    CHECK(cached_model);

    const SweepResult warm = run_sweep(cfg, cache);
    write_results_csv(warm.rows, out_b);
    CHECK(slurp(out_a) == slurp(out_b));

    fs::remove_all(cache);
    fs::remove(out_a);
    fs::remove(out_b);
}

TEST_CASE("results CSV carries the pinned header and formats") {
    const SweepConfig cfg = small_sweep();
    SweepConfig tiny = cfg;
    tiny.methods = {MethodId::original};
    tiny.fractions = {0.25};
    tiny.seeds = {0};
    const SweepResult res = run_sweep(tiny, fs::path());

    const fs::path file = fs::temp_directory_path() / "eval_results_fmt.csv";
    write_results_csv(res.rows, file);
    const auto lines = read_lines(file);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "dataset,attack,method,fraction,seed,acc_aff,acc_rem,val_objective,wall_time_s,flags");
    CHECK(count_fields(lines[1]) == 10);
    CHECK(lines[1].find("mini,label_flip,original,0.25,0,") == 0);
    // Nine decimals on the wall clock column.
    std::istringstream row(lines[1]);
    std::string field;
    for (int i = 0; i < 9; ++i) std::getline(row, field, ',');
    const std::size_t dot = field.find('.');
    REQUIRE(dot != std::string::npos);
    CHECK(field.size() - dot - 1 == 9);
    fs::remove(file);
}

TEST_CASE("aggregate and trial CSVs carry their pinned headers") {
    AggregateRow agg;
    agg.method = MethodId::cognac;
    agg.fraction = 0.25;
    agg.n = 5;
    agg.acc_aff_mean = 91.25;
    const fs::path afile = fs::temp_directory_path() / "eval_agg_fmt.csv";
    write_aggregates_csv({agg}, afile);
    auto alines = read_lines(afile);
    REQUIRE(alines.size() == 2);
    CHECK(alines[0] == "method,fraction,n,acc_aff_mean,acc_aff_std,acc_rem_mean,acc_rem_std,delta_acc_rem");
    CHECK(alines[1] == "cognac,0.25,5,91.2,0.0,0.0,0.0,0.0");
    fs::remove(afile);

    TrialRow trial;
    trial.trial = 3;
    trial.val_objective = 88.5;
    trial.params = "lr=1.000000e-03;epochs=7";
    const fs::path tfile = fs::temp_directory_path() / "eval_trials_fmt.csv";
    write_trials_csv({trial}, tfile);
    auto tlines = read_lines(tfile);
    REQUIRE(tlines.size() == 2);
    CHECK(tlines[0] == "trial,val_objective,wall_time_s,params,flags");
    CHECK(tlines[1].rfind("3,88.500000,", 0) == 0);
    fs::remove(tfile);
}

TEST_CASE("hyperparameter search logs every trial and keeps the argmax") {
    SweepConfig cfg = small_sweep();
    cfg.search.trials = 3;
    cfg.search.seed = 5;
    cfg.search.eval_seed = 0;

    const SearchResult res = hyperparameter_search(MethodId::scrub, cfg, 0.5, fs::path());
    REQUIRE(res.log.size() == 3);
    double best = -1.0;
    std::int64_t best_trial = 0;
    for (const TrialRow& t : res.log) {
        CHECK(t.val_objective >= 0.0);  // no failed trials on this plan
        CHECK(t.params.find("lr=") != std::string::npos);
        CHECK(t.params.find("epochs=") != std::string::npos);
        CHECK(t.params.find("temperature=") != std::string::npos);
        if (t.val_objective > best) {
            best = t.val_objective;
            best_trial = t.trial;
        }
    }
    CHECK(res.best_val == best);
    CHECK(res.best_trial == best_trial);

    // The winning parameters land in the returned config bundle.
    const SearchResult again = hyperparameter_search(MethodId::scrub, cfg, 0.5, fs::path());
    CHECK(again.best_val == res.best_val);
    CHECK(again.best_trial == res.best_trial);
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        CHECK(again.log[i].params == res.log[i].params);
        CHECK(again.log[i].val_objective == res.log[i].val_objective);
    }

    CHECK_THROWS_AS(hyperparameter_search(MethodId::original, cfg, 0.5, fs::path()), ConfigError);
    CHECK_THROWS_AS(hyperparameter_search(MethodId::utu, cfg, 0.5, fs::path()), ConfigError);
}

TEST_CASE("search draws differ across trials and respond to the search seed") {
    SweepConfig cfg = small_sweep();
    cfg.search.trials = 2;
    cfg.search.seed = 1;
    const SearchResult a = hyperparameter_search(MethodId::cognac, cfg, 0.5, fs::path());
    CHECK(a.log[0].params != a.log[1].params);

    cfg.search.seed = 2;
    const SearchResult b = hyperparameter_search(MethodId::cognac, cfg, 0.5, fs::path());
    CHECK(b.log[0].params != a.log[0].params);
}

TEST_CASE("export_embeddings writes one row per test node and re-exports identically") {
    const SweepConfig cfg = small_sweep();
    const CellRequest req = request_for(cfg, MethodId::original, 1.0, 2);
    const CellContext ctx = build_cell_context(req);

    const fs::path file = fs::temp_directory_path() / "eval_emb.csv";
    export_embeddings(ctx.poisoned, ctx.record.manipulated, ctx.record.clean_label_vector(), 0, 1,
                      EmbeddingSource::hidden, file);
    const auto lines = read_lines(file);
    std::int64_t test_total = 0;
    for (std::uint8_t r : ctx.record.manipulated.split) {
        if (r == static_cast<std::uint8_t>(SplitRole::test)) ++test_total;
    }
    REQUIRE(static_cast<std::int64_t>(lines.size()) == test_total + 1);
    CHECK(lines[0].rfind("node_id,label,affected,e0", 0) == 0);
    CHECK(count_fields(lines[0]) == 3 + cfg.configs.model.hidden_dim);
    int affected_rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        CHECK(count_fields(lines[i]) == count_fields(lines[0]));
        std::istringstream row(lines[i]);
        std::string node, label, affected;
        std::getline(row, node, ',');
        std::getline(row, label, ',');
        std::getline(row, affected, ',');
        const bool should = label == "0" || label == "1";
        CHECK(affected == (should ? "1" : "0"));
        affected_rows += affected == "1" ? 1 : 0;
    }
    CHECK(affected_rows > 0);

    const std::string first = slurp(file);
    export_embeddings(ctx.poisoned, ctx.record.manipulated, ctx.record.clean_label_vector(), 0, 1,
                      EmbeddingSource::hidden, file);
    CHECK(slurp(file) == first);

    // Logit-space export narrows to num_classes columns; -1/-1 marks all rows
    // unaffected.
    export_embeddings(ctx.poisoned, ctx.record.manipulated, ctx.record.clean_label_vector(), -1, -1,
                      EmbeddingSource::logits, file);
    const auto logit_lines = read_lines(file);
    CHECK(count_fields(logit_lines[0]) == 3 + 3);
    for (std::size_t i = 1; i < logit_lines.size(); ++i) {
        std::istringstream row(logit_lines[i]);
        std::string node, label, affected;
        std::getline(row, node, ',');
        std::getline(row, label, ',');
        std::getline(row, affected, ',');
        CHECK(affected == "0");
    }
    fs::remove(file);
}

TEST_CASE("config files parse to ordered pairs with precise error positions") {
    const fs::path file = fs::temp_directory_path() / "eval_cfg_parse.cfg";
    {
        std::ofstream out(file);
        out << "# leading comment\n";
        out << "methods = cognac, scrub\n";
        out << "\n";
        out << "cognac.lr_descent = 0.01  # trailing comment\n";
        out << "dataset.name = demo\n";
    }
    const auto pairs = parse_config_file(file);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].first == "methods");
    CHECK(pairs[0].second == "cognac, scrub");
    CHECK(pairs[1].first == "cognac.lr_descent");
    CHECK(pairs[1].second == "0.01");
    CHECK(pairs[2].second == "demo");

    {
        std::ofstream out(file);
        out << "methods = cognac\n";
        out << "this line has no equals\n";
    }
    CHECK_THROWS_WITH_AS(parse_config_file(file), doctest::Contains(":2:"), ParseError);

    {
        std::ofstream out(file);
        out << " = value\n";
    }
    CHECK_THROWS_WITH_AS(parse_config_file(file), doctest::Contains(":1:"), ParseError);
    fs::remove(file);

    CHECK_THROWS_AS(parse_config_file(fs::temp_directory_path() / "eval_cfg_missing.cfg"), IoError);
}

TEST_CASE("apply_setting reaches every section and rejects unknown keys") {
    SweepConfig cfg;
    apply_setting(cfg, "methods", "cognac,scrub");
    REQUIRE(cfg.methods.size() == 2);
    CHECK(cfg.methods[0] == MethodId::cognac);
    apply_setting(cfg, "fractions", "0.25, 1.0");
    CHECK(cfg.fractions == std::vector<double>{0.25, 1.0});
    apply_setting(cfg, "seeds", "3,4");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
    apply_setting(cfg, "train_epochs", "55");
    CHECK(cfg.configs.train_epochs == 55);
    apply_setting(cfg, "time_budget_ratio", "0.4");
    CHECK(cfg.time_budget_ratio == 0.4);
    apply_setting(cfg, "master_seed", "9");
    CHECK(cfg.master_seed == 9);
    apply_setting(cfg, "jobs", "3");
    CHECK(cfg.jobs == 3);

    apply_setting(cfg, "dataset.num_blocks", "5");
    CHECK(cfg.dataset.sbm.num_blocks == 5);
    apply_setting(cfg, "dataset.p_in", "0.2");
    CHECK(cfg.dataset.sbm.p_in == 0.2);
    apply_setting(cfg, "attack.kind", "spurious_edges");
    CHECK(cfg.attack.kind == AttackKind::spurious_edges);
    apply_setting(cfg, "attack.budget", "150");
    CHECK(cfg.attack.budget == 150.0);
    apply_setting(cfg, "model.hidden_dim", "32");
    CHECK(cfg.configs.model.hidden_dim == 32);
    apply_setting(cfg, "opt.learning_rate", "0.005");
    CHECK(cfg.configs.opt.learning_rate == 0.005);
    apply_setting(cfg, "cognac.lr_descent", "0.02");
    CHECK(cfg.configs.cognac.lr_descent == 0.02);
    apply_setting(cfg, "cognac.mode", "single_opt_one_lr");
    CHECK(cfg.configs.cognac.mode == CognacMode::single_opt_one_lr);
    apply_setting(cfg, "cognac.unlink", "false");
    CHECK_FALSE(cfg.configs.cognac.unlink);
    apply_setting(cfg, "cognac.selection", "random_neighborhood");
    CHECK(cfg.configs.cognac.selection == AffectedSelection::random_neighborhood);
    apply_setting(cfg, "acdc.lr_ascent", "0.003");
    CHECK(cfg.configs.acdc.lr_ascent == 0.003);
    apply_setting(cfg, "scrub.distill_temperature", "2");
    CHECK(cfg.configs.scrub.distill_temperature == 2.0);
    apply_setting(cfg, "search.trials", "12");
    CHECK(cfg.search.trials == 12);

    CHECK_THROWS_AS(apply_setting(cfg, "unknown_key", "1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "dataset.unknown", "1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "cognac.unknown", "1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "train_epochs", "not_a_number"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "time_budget_ratio", "0.5x"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "methods", ""), ConfigError);
}

TEST_CASE("config fingerprints track result-relevant fields and nothing else") {
    const SweepConfig cfg = small_sweep();
    const CellRequest base = request_for(cfg, MethodId::cognac, 0.5, 0);
    const std::string fp = config_fingerprint(base);
    CHECK(fp.size() == 16);
    CHECK(config_fingerprint(base) == fp);

    CellRequest changed = base;
    changed.fraction = 1.0;
    CHECK(config_fingerprint(changed) != fp);
    changed = base;
    changed.method = MethodId::scrub;
    CHECK(config_fingerprint(changed) != fp);
    changed = base;
    changed.seed = 1;
    CHECK(config_fingerprint(changed) != fp);
    changed = base;
    changed.master_seed = 7;
    CHECK(config_fingerprint(changed) != fp);
    changed = base;
    changed.configs.cognac.lr_descent *= 2.0;
    CHECK(config_fingerprint(changed) != fp);
    changed = base;
    changed.cache_dir = "elsewhere";  // storage location does not alter results
    CHECK(config_fingerprint(changed) == fp);

    SweepConfig sweep_a = cfg;
    SweepConfig sweep_b = cfg;
    sweep_b.jobs = 7;
    CHECK(sweep_canonical(sweep_a) == sweep_canonical(sweep_b));
    sweep_b.master_seed = 3;
    CHECK(sweep_canonical(sweep_a) != sweep_canonical(sweep_b));
}
