// graph-unlearn: train small GCNs, inject targeted label/edge manipulations,
// and remove their effect post-training. Every command prints a one-line
// summary; machine-readable artifacts land under --out-dir in directories
// named by a fingerprint of the effective configuration.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unlearn/baselines.hpp"
#include "unlearn/cognac.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace unlearn;

namespace {

struct CliState {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string config_file;
    std::vector<std::string> sets;  // additional key=value overrides
    SweepConfig cfg;
};

// Benchmark defaults: a 4-block SBM with a label-flip attack on classes
// {0,1}; flags and config files override any of it.
SweepConfig default_config() {
    SweepConfig cfg;
    cfg.dataset.kind = DatasetKind::sbm;
    cfg.dataset.name = "sbm";
    cfg.dataset.sbm.num_blocks = 4;
    cfg.dataset.sbm.nodes_per_block = 100;
    cfg.dataset.sbm.p_in = 0.1;
    cfg.dataset.sbm.p_out = 0.01;
    cfg.dataset.sbm.feature_dim = 4;
    cfg.dataset.sbm.feature_noise = 0.05;
    cfg.attack.kind = AttackKind::label_flip;
    cfg.attack.class_a = 0;
    cfg.attack.class_b = 1;
    cfg.attack.budget = 0.5;
    return cfg;
}

void load_config_into(CliState& st) {
    st.cfg = default_config();
    if (!st.config_file.empty()) {
        for (const auto& [key, value] : parse_config_file(st.config_file)) {
            apply_setting(st.cfg, key, value);
        }
    }
    for (const std::string& kv : st.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_setting(st.cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

void add_common(CLI::App* sub, CliState& st) {
    sub->add_option("--seed", st.seed, "base seed for this command");
    sub->add_option("--out-dir", st.out_dir, "artifact root directory");
    sub->add_option("--config", st.config_file, "key = value config file");
    sub->add_option("--set", st.sets, "extra key=value override (repeatable)");
}

std::string fingerprint(const CliState& st, const std::string& command, const std::string& extra) {
    const std::string canon = command + "\n" + sweep_canonical(st.cfg) + extra + "\nseed=" +
                              std::to_string(st.seed) + "\n";
    return to_hex16(fnv1a64(canon));
}

fs::path artifact_dir(const CliState& st, const std::string& command, const std::string& extra) {
    fs::path dir = fs::path(st.out_dir) / (command + "-" + fingerprint(st, command, extra));
    fs::create_directories(dir);
    return dir;
}

fs::path cache_dir(const CliState& st) { return fs::path(st.out_dir) / "cache"; }

Graph load_or_build_dataset(const CliState& st, const std::string& dataset_dir) {
    if (!dataset_dir.empty()) {
        Graph g = load_graph(dataset_dir);
        if (!g.has_split()) {
            SplitConfig sc = st.cfg.dataset.split;
            sc.seed = derive_seed(st.seed, "split");
            g = make_splits(g, sc);
        }
        return g;
    }
    return build_dataset(st.cfg.dataset, derive_seed(st.cfg.master_seed, "cell", st.seed));
}

CellRequest cell_request(const CliState& st, MethodId method, double fraction) {
    CellRequest req;
    req.dataset = st.cfg.dataset;
    req.attack = st.cfg.attack;
    req.method = method;
    req.fraction = fraction;
    req.seed = st.seed;
    req.master_seed = st.cfg.master_seed;
    req.configs = st.cfg.configs;
    req.configs.time_budget_ratio = st.cfg.time_budget_ratio;
    req.cache_dir = cache_dir(st);
    return req;
}

int cmd_gen_sbm(CliState& st) {
    const Graph g = build_dataset(st.cfg.dataset, derive_seed(st.cfg.master_seed, "cell", st.seed));
    const fs::path dir = artifact_dir(st, "gen-sbm", "");
    save_graph(g, dir);
    std::printf("gen-sbm name=%s nodes=%lld edges=%lld classes=%d dir=%s\n", st.cfg.dataset.name.c_str(),
                static_cast<long long>(g.num_nodes), static_cast<long long>(g.num_undirected_edges()),
                g.num_classes, dir.string().c_str());
    return 0;
}

int cmd_ingest(CliState& st, const std::string& dataset_dir) {
    const Graph g = load_or_build_dataset(st, dataset_dir);
    const fs::path dir = artifact_dir(st, "dataset", "\nsource=" + dataset_dir);
    save_graph(g, dir);
    std::int64_t train = 0, val = 0, test = 0;
    for (std::uint8_t r : g.split) {
        if (r == static_cast<std::uint8_t>(SplitRole::train)) ++train;
        else if (r == static_cast<std::uint8_t>(SplitRole::val)) ++val;
        else ++test;
    }
    std::printf("ingest nodes=%lld edges=%lld classes=%d train=%lld val=%lld test=%lld dir=%s\n",
                static_cast<long long>(g.num_nodes), static_cast<long long>(g.num_undirected_edges()),
                g.num_classes, static_cast<long long>(train), static_cast<long long>(val),
                static_cast<long long>(test), dir.string().c_str());
    return 0;
}

int cmd_train(CliState& st, const std::string& dataset_dir, std::int64_t epochs) {
    const Graph g = load_or_build_dataset(st, dataset_dir);
    ModelConfig mcfg = st.cfg.configs.model;
    mcfg.feature_dim = g.features.cols;
    mcfg.num_classes = g.num_classes;
    mcfg.seed = derive_seed(st.seed, "train");
    const TrainResult tr = train(g, mcfg, st.cfg.configs.opt, epochs);
    const fs::path dir = artifact_dir(st, "train", "\nsource=" + dataset_dir +
                                                       "\nepochs=" + std::to_string(epochs));
    save_checkpoint(tr.state, dir / "model.ckpt");
    std::printf("train epochs=%lld best_epoch=%lld best_val=%.6f compute_s=%.9f file=%s\n",
                static_cast<long long>(epochs), static_cast<long long>(tr.report.best_epoch),
                tr.report.best_val, cost::to_seconds(tr.report.flops), (dir / "model.ckpt").string().c_str());
    return 0;
}

int cmd_attack(CliState& st, const std::string& dataset_dir) {
    const Graph g = load_or_build_dataset(st, dataset_dir);
    AttackSpec aspec = st.cfg.attack;
    aspec.seed = derive_seed(st.seed, "attack");
    const AttackRecord rec = apply_attack(g, aspec);
    const fs::path dir = artifact_dir(st, "attack", "\nsource=" + dataset_dir);
    save_attack_record(rec, dir / "record.txt");
    save_graph(rec.manipulated, dir / "dataset");
    std::printf("attack kind=%s classes=%d,%d size=%lld dir=%s\n", to_string(rec.kind).c_str(), rec.class_a,
                rec.class_b, static_cast<long long>(rec.manipulation_size()), dir.string().c_str());
    return 0;
}

int cmd_unlearn(CliState& st, MethodId method, double fraction) {
    const CellRequest req = cell_request(st, method, fraction);
    const CellContext ctx = build_cell_context(req);
    UnlearnResult result;
    const MetricsReport rep = run_cell_with_context(ctx, req, &result);
    const fs::path dir =
        artifact_dir(st, "unlearn", "\nmethod=" + to_string(method) + "\nfraction=" + std::to_string(fraction));
    write_results_csv({rep}, dir / "metrics.csv");
    save_unlearn_trace(result.report, dir / "trace.csv");
    save_checkpoint(result.state, dir / "model.ckpt");
    std::printf("unlearn method=%s fraction=%.2f acc_aff=%.6f acc_rem=%.6f val=%.6f compute_s=%.9f flags=%s dir=%s\n",
                to_string(method).c_str(), fraction, rep.acc_aff, rep.acc_rem, rep.val_objective,
                rep.wall_time_s, rep.flags.empty() ? "-" : rep.flags.c_str(), dir.string().c_str());
    return 0;
}

int cmd_eval(CliState& st, const std::string& checkpoint) {
    const CellRequest req = cell_request(st, MethodId::original, 1.0);
    const CellContext ctx = build_cell_context(req);
    const ModelState state = checkpoint.empty() ? ctx.poisoned : load_checkpoint(checkpoint);
    const std::vector<ClassId> clean = ctx.record.clean_label_vector();
    const TestMetrics tm = test_metrics(state, ctx.record.manipulated, clean, ctx.record.class_a,
                                        ctx.record.class_b);

    MetricsReport rep;
    rep.dataset = req.dataset.name;
    rep.attack = to_string(req.attack.kind);
    rep.method = MethodId::original;
    rep.fraction = 1.0;
    rep.seed = st.seed;
    rep.acc_aff = tm.acc_aff;
    rep.acc_rem = tm.acc_rem;
    ValContext vctx{true, ctx.record.class_a, ctx.record.class_b, clean};
    rep.val_objective =
        val_objective(state, normalize_adjacency(ctx.record.manipulated), ctx.record.manipulated, vctx);
    rep.flags = checkpoint.empty() ? "poisoned" : "checkpoint";
    rep.fingerprint = config_fingerprint(req);

    const fs::path dir = artifact_dir(st, "eval", "\ncheckpoint=" + checkpoint);
    write_results_csv({rep}, dir / "metrics.csv");
    std::printf("eval acc_aff=%.6f acc_rem=%.6f overall=%.6f val=%.6f file=%s\n", tm.acc_aff, tm.acc_rem,
                tm.overall, rep.val_objective, (dir / "metrics.csv").string().c_str());
    return 0;
}

int cmd_sweep(CliState& st) {
    const SweepResult res = run_sweep(st.cfg, cache_dir(st));
    const fs::path dir = artifact_dir(st, "sweep", "");
    write_results_csv(res.rows, dir / "results.csv");
    write_aggregates_csv(res.aggregates, dir / "aggregates.csv");
    std::printf("sweep rows=%zu errors=%d results=%s aggregates=%s\n", res.rows.size(), res.errors,
                (dir / "results.csv").string().c_str(), (dir / "aggregates.csv").string().c_str());
    return res.errors == 0 ? 0 : 1;
}

void write_best_config(const CellConfigs& best, MethodId method, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    char buf[128];
    auto put = [&](const std::string& key, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << key << " = " << buf << "\n";
    };
    if (method == MethodId::scrub) {
        const ScrubConfig& s = best.scrub;
        put("scrub.lr", s.lr);
        out << "scrub.epochs = " << s.epochs << "\n";
        put("scrub.distill_temperature", s.distill_temperature);
        return;
    }
    const char* head = method == MethodId::acdc ? "acdc" : "cognac";
    const CognacConfig& c = method == MethodId::acdc ? best.acdc : best.cognac;
    const std::string h(head);
    out << h << ".mode = " << to_string(method == MethodId::acdc ? CognacMode::acdc_only : c.mode) << "\n";
    put(h + ".k_percent", c.k_percent);
    out << h << ".total_epochs = " << c.total_epochs << "\n";
    out << h << ".contrast_epochs = " << c.contrast_epochs << "\n";
    out << h << ".ascent_descent_epochs = " << c.ascent_descent_epochs << "\n";
    put(h + ".lr_contrast", c.lr_contrast);
    put(h + ".lr_ascent", c.lr_ascent);
    put(h + ".lr_descent", c.lr_descent);
    out << h << ".unlink = " << (c.unlink ? "true" : "false") << "\n";
}

int cmd_search(CliState& st, const std::string& method_name, double fraction) {
    const MethodId method = method_from_string(method_name);
    const SearchResult res = hyperparameter_search(method, st.cfg, fraction, cache_dir(st));
    const fs::path dir =
        artifact_dir(st, "search", "\nmethod=" + method_name + "\nfraction=" + std::to_string(fraction));
    write_trials_csv(res.log, dir / "trials.csv");
    write_best_config(res.best, method, dir / "best.cfg");
    std::printf("search method=%s trials=%zu best_trial=%lld best_val=%.6f best_cfg=%s\n", method_name.c_str(),
                res.log.size(), static_cast<long long>(res.best_trial), res.best_val,
                (dir / "best.cfg").string().c_str());
    return 0;
}

int cmd_gradcheck(CliState& st) {
    const GradCheckReport rep = run_gradcheck(st.seed);
    const fs::path dir = artifact_dir(st, "gradcheck", "");
    {
        std::ofstream out(dir / "report.txt");
        if (!out) throw IoError("cannot write " + (dir / "report.txt").string());
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "cross_entropy_rel_error %.6e\ncontrastive_rel_error %.6e\nmax_rel_error %.6e\n"
                      "threshold %.1e\nstatus %s\n",
                      rep.ce_rel_error, rep.contrastive_rel_error, rep.max_rel_error, rep.threshold,
                      rep.pass ? "pass" : "fail");
        out << buf;
    }
    std::printf("gradcheck max_rel_error=%.6e threshold=%.1e status=%s\n", rep.max_rel_error, rep.threshold,
                rep.pass ? "pass" : "fail");
    return rep.pass ? 0 : 1;
}

int cmd_export_emb(CliState& st, const std::string& checkpoint, const std::string& source_name) {
    EmbeddingSource source;
    if (source_name == "hidden") source = EmbeddingSource::hidden;
    else if (source_name == "logits") source = EmbeddingSource::logits;
    else throw ConfigError("--source expects hidden|logits, got '" + source_name + "'");

    const CellRequest req = cell_request(st, MethodId::original, 1.0);
    const CellContext ctx = build_cell_context(req);
    const ModelState state = checkpoint.empty() ? ctx.poisoned : load_checkpoint(checkpoint);
    const fs::path dir =
        artifact_dir(st, "emb", "\ncheckpoint=" + checkpoint + "\nsource=" + source_name);
    export_embeddings(state, ctx.record.manipulated, ctx.record.clean_label_vector(), ctx.record.class_a,
                      ctx.record.class_b, source, dir / "embeddings.csv");
    std::int64_t rows = 0;
    for (std::uint8_t r : ctx.record.manipulated.split) {
        if (r == static_cast<std::uint8_t>(SplitRole::test)) ++rows;
    }
    std::printf("export-emb rows=%lld source=%s file=%s\n", static_cast<long long>(rows), source_name.c_str(),
                (dir / "embeddings.csv").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-unlearn: GCN training, targeted manipulation, and post-training unlearning"};
    app.require_subcommand(1);

    CliState st;

    // gen-sbm
    auto* gen = app.add_subcommand("gen-sbm", "generate a block-model dataset directory");
    add_common(gen, st);
    int blocks = 0;
    std::int64_t nodes_per_block = 0;
    double p_in = -1.0, p_out = -1.0, feature_noise = -1.0;
    std::int64_t feature_dim = 0;
    std::string name;
    gen->add_option("--blocks", blocks, "number of blocks (classes)");
    gen->add_option("--nodes-per-block", nodes_per_block, "nodes per block");
    gen->add_option("--p-in", p_in, "within-block edge probability");
    gen->add_option("--p-out", p_out, "cross-block edge probability");
    gen->add_option("--feature-dim", feature_dim, "feature width (>= blocks)");
    gen->add_option("--feature-noise", feature_noise, "one-hot bit-flip probability");
    gen->add_option("--name", name, "dataset name tag");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a dataset directory and save a canonical copy");
    add_common(ingest, st);
    std::string ingest_dir;
    ingest->add_option("--dataset-dir", ingest_dir, "directory with edges.txt/features.bin/labels.txt")
        ->required();

    // train
    auto* trn = app.add_subcommand("train", "train a GCN and save the best-validation checkpoint");
    add_common(trn, st);
    std::string train_dir;
    std::int64_t hidden_dim = 0, epochs = -1;
    double lr = -1.0, dropout = -1.0, init_scale = -1.0;
    trn->add_option("--dataset-dir", train_dir, "dataset directory (default: generated block model)");
    trn->add_option("--hidden-dim", hidden_dim, "hidden layer width");
    trn->add_option("--epochs", epochs, "training epochs");
    trn->add_option("--lr", lr, "Adam learning rate");
    trn->add_option("--dropout", dropout, "hidden dropout rate");
    trn->add_option("--init-scale", init_scale, "weight init scale");

    // attack
    auto* atk = app.add_subcommand("attack", "inject a targeted manipulation and save the record");
    add_common(atk, st);
    std::string attack_dir, attack_kind, attack_classes;
    double attack_budget = -1.0;
    atk->add_option("--dataset-dir", attack_dir, "dataset directory (default: generated block model)");
    atk->add_option("--kind", attack_kind, "label_flip | spurious_edges")
        ->check(CLI::IsMember({"label_flip", "spurious_edges"}));
    atk->add_option("--classes", attack_classes, "targeted class pair, e.g. 0,1");
    atk->add_option("--budget", attack_budget, "attack budget");

    // unlearn
    auto* unl = app.add_subcommand("unlearn", "run one unlearning method on a poisoned model");
    add_common(unl, st);
    std::string method_name = "cognac", mode_name;
    double fraction = 1.0, k_percent = -1.0, lr_ascent = -1.0, lr_descent = -1.0, lr_contrast = -1.0;
    double scrub_temperature = -1.0, scrub_lr = -1.0;
    std::int64_t total_epochs = -1, contrast_epochs = -1, ad_epochs = -1, scrub_epochs = -1;
    std::string unlink_str;
    unl->add_option("--method", method_name, "original|oracle|retrain|utu|scrub|cognac|acdc")
        ->check(CLI::IsMember({"original", "oracle", "retrain", "utu", "scrub", "cognac", "acdc"}));
    unl->add_option("--mode", mode_name, "cognac mode: full|acdc_only|single_opt_one_lr|single_opt_combined")
        ->check(CLI::IsMember({"full", "acdc_only", "single_opt_one_lr", "single_opt_combined"}));
    unl->add_option("--fraction", fraction, "deletion-request fraction in (0,1]");
    unl->add_option("--k", k_percent, "affected-set size as percent of candidates");
    unl->add_option("--lr-ascent", lr_ascent, "ascent learning rate");
    unl->add_option("--lr-descent", lr_descent, "descent learning rate");
    unl->add_option("--lr-contrast", lr_contrast, "contrastive learning rate");
    unl->add_option("--total-epochs", total_epochs, "outer unlearning epochs");
    unl->add_option("--contrast-epochs", contrast_epochs, "contrastive steps per outer epoch");
    unl->add_option("--ad-epochs", ad_epochs, "ascent/descent rounds per outer epoch");
    unl->add_option("--unlink", unlink_str, "drop the deletion set's structure first: true|false")
        ->check(CLI::IsMember({"true", "false"}));
    unl->add_option("--scrub-epochs", scrub_epochs, "distillation epochs");
    unl->add_option("--temperature", scrub_temperature, "distillation temperature");
    unl->add_option("--scrub-lr", scrub_lr, "distillation learning rate");

    // eval
    auto* evl = app.add_subcommand("eval", "score a checkpoint on clean labels, split by targeted classes");
    add_common(evl, st);
    std::string eval_checkpoint;
    evl->add_option("--checkpoint", eval_checkpoint, "checkpoint file (default: the cell's poisoned model)");

    // sweep
    auto* swp = app.add_subcommand("sweep", "run methods x fractions x seeds and write results CSVs");
    add_common(swp, st);
    int jobs = 0;
    swp->add_option("--jobs", jobs, "parallel worker threads");

    // search
    auto* sch = app.add_subcommand("search", "random hyperparameter search scored by validation objective");
    add_common(sch, st);
    std::string search_method = "cognac";
    double search_fraction = 0.25;
    std::int64_t trials = -1;
    sch->add_option("--method", search_method, "cognac|acdc|scrub")
        ->check(CLI::IsMember({"original", "oracle", "retrain", "utu", "scrub", "cognac", "acdc"}));
    sch->add_option("--fraction", search_fraction, "deletion-request fraction the trials tune on");
    sch->add_option("--trials", trials, "number of trials");

    // gradcheck
    auto* grd = app.add_subcommand("gradcheck", "compare analytic gradients against central differences");
    add_common(grd, st);

    // export-emb
    auto* emb = app.add_subcommand("export-emb", "write test-node embeddings with affected flags");
    add_common(emb, st);
    std::string emb_checkpoint, emb_source = "hidden";
    emb->add_option("--checkpoint", emb_checkpoint, "checkpoint file (default: the cell's poisoned model)");
    emb->add_option("--source", emb_source, "hidden | logits")
        ->check(CLI::IsMember({"hidden", "logits"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        load_config_into(st);

        if (gen->parsed()) {
            if (gen->count("--blocks")) st.cfg.dataset.sbm.num_blocks = blocks;
            if (gen->count("--nodes-per-block")) st.cfg.dataset.sbm.nodes_per_block = nodes_per_block;
            if (gen->count("--p-in")) st.cfg.dataset.sbm.p_in = p_in;
            if (gen->count("--p-out")) st.cfg.dataset.sbm.p_out = p_out;
            if (gen->count("--feature-dim")) st.cfg.dataset.sbm.feature_dim = feature_dim;
            if (gen->count("--feature-noise")) st.cfg.dataset.sbm.feature_noise = feature_noise;
            if (gen->count("--name")) st.cfg.dataset.name = name;
            return cmd_gen_sbm(st);
        }
        if (ingest->parsed()) return cmd_ingest(st, ingest_dir);
        if (trn->parsed()) {
            if (trn->count("--hidden-dim")) st.cfg.configs.model.hidden_dim = hidden_dim;
            if (trn->count("--lr")) st.cfg.configs.opt.learning_rate = lr;
            if (trn->count("--dropout")) st.cfg.configs.model.dropout_rate = dropout;
            if (trn->count("--init-scale")) st.cfg.configs.model.weight_init_scale = init_scale;
            if (trn->count("--epochs")) st.cfg.configs.train_epochs = epochs;
            return cmd_train(st, train_dir, st.cfg.configs.train_epochs);
        }
        if (atk->parsed()) {
            if (atk->count("--kind")) st.cfg.attack.kind = attack_kind_from_string(attack_kind);
            if (atk->count("--classes")) {
                const std::size_t comma = attack_classes.find(',');
                if (comma == std::string::npos) {
                    throw ConfigError("--classes expects two ids, e.g. 0,1");
                }
                st.cfg.attack.class_a = static_cast<ClassId>(std::stoi(attack_classes.substr(0, comma)));
                st.cfg.attack.class_b = static_cast<ClassId>(std::stoi(attack_classes.substr(comma + 1)));
            }
            if (atk->count("--budget")) st.cfg.attack.budget = attack_budget;
            return cmd_attack(st, attack_dir);
        }
        if (unl->parsed()) {
            const MethodId method = method_from_string(method_name);
            CognacConfig& cg = method == MethodId::acdc ? st.cfg.configs.acdc : st.cfg.configs.cognac;
            if (unl->count("--mode")) cg.mode = cognac_mode_from_string(mode_name);
            if (unl->count("--k")) cg.k_percent = k_percent;
            if (unl->count("--lr-ascent")) cg.lr_ascent = lr_ascent;
            if (unl->count("--lr-descent")) cg.lr_descent = lr_descent;
            if (unl->count("--lr-contrast")) cg.lr_contrast = lr_contrast;
            if (unl->count("--total-epochs")) cg.total_epochs = total_epochs;
            if (unl->count("--contrast-epochs")) cg.contrast_epochs = contrast_epochs;
            if (unl->count("--ad-epochs")) cg.ascent_descent_epochs = ad_epochs;
            if (unl->count("--unlink")) {
                if (unlink_str == "true" || unlink_str == "1") cg.unlink = true;
                else if (unlink_str == "false" || unlink_str == "0") cg.unlink = false;
                else throw ConfigError("--unlink expects true|false, got '" + unlink_str + "'");
            }
            if (unl->count("--scrub-epochs")) st.cfg.configs.scrub.epochs = scrub_epochs;
            if (unl->count("--temperature")) st.cfg.configs.scrub.distill_temperature = scrub_temperature;
            if (unl->count("--scrub-lr")) st.cfg.configs.scrub.lr = scrub_lr;
            return cmd_unlearn(st, method, fraction);
        }
        if (evl->parsed()) return cmd_eval(st, eval_checkpoint);
        if (swp->parsed()) {
            if (swp->count("--jobs")) st.cfg.jobs = jobs;
            return cmd_sweep(st);
        }
        if (sch->parsed()) {
            if (sch->count("--trials")) st.cfg.search.trials = trials;
            return cmd_search(st, search_method, search_fraction);
        }
        if (grd->parsed()) return cmd_gradcheck(st);
        if (emb->parsed()) return cmd_export_emb(st, emb_checkpoint, emb_source);

        std::cerr << "error: no command\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
