#include "unlearn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>
#include <utility>

namespace unlearn {

namespace {

std::int64_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::int64_t n = 0;
    for (std::uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

}  // namespace

TestMetrics test_metrics(const ModelState& s, const Graph& g, const std::vector<ClassId>& clean_labels,
                         ClassId class_a, ClassId class_b) {
    if (static_cast<std::int64_t>(clean_labels.size()) != g.num_nodes) {
        throw ConfigError("test_metrics: clean label vector size mismatch");
    }
    const SparseMatrix a_hat = normalize_adjacency(g);
    const ForwardTrace trace = forward_eval(s, a_hat, g.features);
    const auto test_mask = g.mask_of(SplitRole::test);

    std::vector<std::uint8_t> aff(test_mask.size(), 0), rem(test_mask.size(), 0);
    for (std::size_t i = 0; i < test_mask.size(); ++i) {
        if (!test_mask[i]) continue;
        const ClassId y = clean_labels[i];
        (y == class_a || y == class_b ? aff : rem)[i] = 1;
    }

    TestMetrics tm;
    tm.n_aff = mask_count(aff);
    tm.n_rem = mask_count(rem);
    if (tm.n_aff == 0) throw ValidationError("test_metrics: no test nodes in the targeted classes");
    if (tm.n_rem == 0) throw ValidationError("test_metrics: no test nodes outside the targeted classes");
    tm.acc_aff = accuracy(trace.logits, clean_labels, aff);
    tm.acc_rem = accuracy(trace.logits, clean_labels, rem);
    tm.overall = accuracy(trace.logits, clean_labels, test_mask);
    return tm;
}

Graph build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    if (spec.kind == DatasetKind::sbm) {
        SbmConfig c = spec.sbm;
        c.seed = derive_seed(seed, "sbm");
        Graph g = generate_sbm(c);
        SplitConfig sc = spec.split;
        sc.seed = derive_seed(seed, "split");
        return make_splits(g, sc);
    }
    Graph g = load_graph(spec.dir);
    if (!g.has_split()) {
        SplitConfig sc = spec.split;
        sc.seed = derive_seed(seed, "split");
        g = make_splits(g, sc);
    }
    return g;
}

namespace {

// Canonical text rendering of everything that determines a result; hashed
// into fingerprints and cache keys. Derived per-run seed fields are omitted
// because the cell overwrites them.
void describe_dataset(std::ostream& out, const DatasetSpec& d) {
    out << "dataset.kind=" << (d.kind == DatasetKind::sbm ? "sbm" : "dir") << '\n';
    out << "dataset.name=" << d.name << '\n';
    if (d.kind == DatasetKind::sbm) {
        out << fmt("dataset.sbm=%d,%lld,%.17g,%.17g,%lld,%.17g\n", d.sbm.num_blocks,
                   static_cast<long long>(d.sbm.nodes_per_block), d.sbm.p_in, d.sbm.p_out,
                   static_cast<long long>(d.sbm.feature_dim), d.sbm.feature_noise);
    } else {
        out << "dataset.dir=" << d.dir.string() << '\n';
    }
    out << fmt("dataset.split=%.17g,%.17g,%.17g\n", d.split.train_fraction, d.split.val_fraction,
               d.split.test_fraction);
}

void describe_attack(std::ostream& out, const AttackSpec& a) {
    out << "attack=" << to_string(a.kind) << fmt(",%d,%d,%.17g\n", a.class_a, a.class_b, a.budget);
}

void describe_training(std::ostream& out, const CellRequest& req) {
    const ModelConfig& m = req.configs.model;
    out << fmt("model=%lld,%d,%.17g,%.17g\n", static_cast<long long>(m.hidden_dim), m.num_layers,
               m.dropout_rate, m.weight_init_scale);
    const OptimizerConfig& o = req.configs.opt;
    out << fmt("opt=%.17g,%.17g,%.17g,%.17g,%lld\n", o.learning_rate, o.beta1, o.beta2, o.epsilon,
               static_cast<long long>(o.decay_steps));
    out << fmt("train_epochs=%lld\n", static_cast<long long>(req.configs.train_epochs));
    out << fmt("seed=%llu\n", static_cast<unsigned long long>(req.seed));
    out << fmt("master_seed=%llu\n", static_cast<unsigned long long>(req.master_seed));
}

void describe_cognac(std::ostream& out, const char* tag, const CognacConfig& c) {
    out << tag
        << fmt("=%.17g,%lld,%lld,%lld,%.17g,%.17g,%.17g,%s,%d,%.17g,%s,%s,%d\n", c.k_percent,
               static_cast<long long>(c.total_epochs), static_cast<long long>(c.contrast_epochs),
               static_cast<long long>(c.ascent_descent_epochs), c.lr_contrast, c.lr_ascent, c.lr_descent,
               to_string(c.mode).c_str(), c.unlink ? 1 : 0, c.ascent_lr_multiplier,
               c.embedding_source == EmbeddingSource::hidden ? "hidden" : "logits",
               c.selection == AffectedSelection::topk ? "topk" : "random_neighborhood",
               c.resample_pairs ? 1 : 0);
}

std::string context_key(const CellRequest& req) {
    std::ostringstream os;
    describe_dataset(os, req.dataset);
    describe_attack(os, req.attack);
    describe_training(os, req);
    return to_hex16(fnv1a64(os.str()));
}

void write_meta(const std::filesystem::path& file, std::uint64_t train_flops) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "poisoned-meta v1\n";
    out << "train_flops " << train_flops << "\n";
}

std::uint64_t read_meta(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::string header;
    std::getline(in, header);
    if (header != "poisoned-meta v1") throw ParseError(file.string() + ": unrecognized meta header");
    std::string key;
    std::uint64_t value = 0;
    if (!(in >> key >> value) || key != "train_flops") {
        throw ParseError(file.string() + ": missing train_flops");
    }
    return value;
}

}  // namespace

std::string sweep_canonical(const SweepConfig& cfg) {
    std::ostringstream os;
    describe_dataset(os, cfg.dataset);
    describe_attack(os, cfg.attack);
    os << "methods=";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
        os << (i ? "," : "") << to_string(cfg.methods[i]);
    }
    os << "\nfractions=";
    for (std::size_t i = 0; i < cfg.fractions.size(); ++i) os << (i ? "," : "") << fmt("%.17g", cfg.fractions[i]);
    os << "\nseeds=";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        os << (i ? "," : "") << static_cast<unsigned long long>(cfg.seeds[i]);
    }
    os << fmt("\ntime_budget_ratio=%.17g\n", cfg.time_budget_ratio);
    os << fmt("master_seed=%llu\n", static_cast<unsigned long long>(cfg.master_seed));
    const ModelConfig& m = cfg.configs.model;
    os << fmt("model=%lld,%d,%.17g,%.17g\n", static_cast<long long>(m.hidden_dim), m.num_layers,
              m.dropout_rate, m.weight_init_scale);
    const OptimizerConfig& o = cfg.configs.opt;
    os << fmt("opt=%.17g,%.17g,%.17g,%.17g,%lld\n", o.learning_rate, o.beta1, o.beta2, o.epsilon,
              static_cast<long long>(o.decay_steps));
    os << fmt("train_epochs=%lld\n", static_cast<long long>(cfg.configs.train_epochs));
    describe_cognac(os, "cognac", cfg.configs.cognac);
    describe_cognac(os, "acdc", cfg.configs.acdc);
    const ScrubConfig& s = cfg.configs.scrub;
    os << fmt("scrub=%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(s.epochs),
              s.distill_temperature, s.away_weight, s.toward_weight, s.task_weight, s.lr);
    os << fmt("search=%lld,%llu,%llu\n", static_cast<long long>(cfg.search.trials),
              static_cast<unsigned long long>(cfg.search.seed),
              static_cast<unsigned long long>(cfg.search.eval_seed));
    return os.str();
}

std::string config_fingerprint(const CellRequest& req) {
    std::ostringstream os;
    describe_dataset(os, req.dataset);
    describe_attack(os, req.attack);
    describe_training(os, req);
    os << "method=" << to_string(req.method) << '\n';
    os << fmt("fraction=%.17g\n", req.fraction);
    os << fmt("time_budget_ratio=%.17g\n", req.configs.time_budget_ratio);
    describe_cognac(os, "cognac", req.configs.cognac);
    describe_cognac(os, "acdc", req.configs.acdc);
    const ScrubConfig& s = req.configs.scrub;
    os << fmt("scrub=%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(s.epochs),
              s.distill_temperature, s.away_weight, s.toward_weight, s.task_weight, s.lr);
    return to_hex16(fnv1a64(os.str()));
}

CellContext build_cell_context(const CellRequest& req) {
    CellContext ctx;
    ctx.effective_seed = derive_seed(req.master_seed, "cell", req.seed);
    ctx.clean = build_dataset(req.dataset, ctx.effective_seed);

    AttackSpec aspec = req.attack;
    aspec.seed = derive_seed(ctx.effective_seed, "attack");

    ModelConfig mcfg = req.configs.model;
    mcfg.feature_dim = ctx.clean.features.cols;
    mcfg.num_classes = ctx.clean.num_classes;
    mcfg.seed = derive_seed(ctx.effective_seed, "poisoned-train");

    const bool caching = !req.cache_dir.empty();
    std::filesystem::path rec_file, ckpt_file, meta_file;
    if (caching) {
        const std::string key = context_key(req);
        rec_file = req.cache_dir / (key + ".record.txt");
        ckpt_file = req.cache_dir / (key + ".ckpt");
        meta_file = req.cache_dir / (key + ".meta");
        try {
            AttackRecord rec = load_attack_record(rec_file, ctx.clean);
            ModelState st = load_checkpoint(ckpt_file);
            const std::uint64_t flops = read_meta(meta_file);
            ctx.record = std::move(rec);
            ctx.poisoned = std::move(st);
            ctx.train_flops = flops;
            return ctx;
        } catch (const std::exception&) {
            // cache miss or stale files: rebuild below and overwrite
        }
    }

    ctx.record = apply_attack(ctx.clean, aspec);
    TrainResult tr = train(ctx.record.manipulated, mcfg, req.configs.opt, req.configs.train_epochs);
    ctx.poisoned = quantize_like_checkpoint(tr.state);
    ctx.train_flops = tr.report.flops;

    if (caching) {
        std::filesystem::create_directories(req.cache_dir);
        save_attack_record(ctx.record, rec_file);
        save_checkpoint(ctx.poisoned, ckpt_file);
        write_meta(meta_file, ctx.train_flops);
    }
    return ctx;
}

MetricsReport run_cell_with_context(const CellContext& ctx, const CellRequest& req, UnlearnResult* out_result) {
    if (!(req.fraction > 0.0) || req.fraction > 1.0) throw ConfigError("fraction must lie in (0,1]");
    if (!(req.configs.time_budget_ratio > 0.0)) throw ConfigError("time_budget_ratio must be positive");

    const std::uint64_t effective = ctx.effective_seed;
    const AttackRecord& record = ctx.record;
    const Graph& manipulated = record.manipulated;

    MetricsReport rep;
    rep.dataset = req.dataset.name;
    rep.attack = to_string(req.attack.kind);
    rep.method = req.method;
    rep.fraction = req.fraction;
    rep.seed = req.seed;
    rep.fingerprint = config_fingerprint(req);

    ValContext vctx;
    vctx.has_attack = true;
    vctx.class_a = record.class_a;
    vctx.class_b = record.class_b;
    vctx.clean_labels = record.clean_label_vector();

    const auto budget =
        static_cast<std::uint64_t>(req.configs.time_budget_ratio * static_cast<double>(ctx.train_flops));

    UnlearnResult result;
    if (req.method == MethodId::original) {
        result = run_original(ctx.poisoned, manipulated);
        rep.flags = "reference";
    } else if (req.method == MethodId::oracle) {
        result = run_oracle(record, ctx.poisoned.cfg, req.configs.opt, req.configs.train_epochs, &vctx,
                            derive_seed(effective, "oracle"));
        rep.flags = "reference";
    } else {
        const DeletionSet del = sample_deletion_subset(
            record, req.fraction, derive_seed(effective, "deletion", std::bit_cast<std::uint64_t>(req.fraction)));
        switch (req.method) {
            case MethodId::retrain:
                result = run_retrain(manipulated, del, ctx.poisoned.cfg, req.configs.opt,
                                     req.configs.train_epochs, &vctx, derive_seed(effective, "retrain"));
                rep.flags = "reference";
                break;
            case MethodId::utu:
                result = run_utu(ctx.poisoned, manipulated, del);
                break;
            case MethodId::scrub: {
                ScrubConfig sc = req.configs.scrub;
                sc.opt_base = req.configs.opt;
                sc.seed = derive_seed(effective, "scrub-run");
                result = run_scrub(ctx.poisoned, manipulated, del, sc, vctx, budget);
                break;
            }
            case MethodId::cognac: {
                CognacConfig cc = req.configs.cognac;
                cc.opt_base = req.configs.opt;
                cc.seed = derive_seed(effective, "cognac-run");
                result = run_cognac(ctx.poisoned, manipulated, del, cc, vctx, budget);
                break;
            }
            case MethodId::acdc: {
                CognacConfig cc = req.configs.acdc;
                cc.mode = CognacMode::acdc_only;
                cc.opt_base = req.configs.opt;
                cc.seed = derive_seed(effective, "cognac-run");
                result = run_cognac(ctx.poisoned, manipulated, del, cc, vctx, budget);
                break;
            }
            default:
                throw ConfigError("run_cell: unhandled method");
        }
    }

    const TestMetrics tm =
        test_metrics(result.state, result.eval_graph, vctx.clean_labels, record.class_a, record.class_b);
    rep.acc_aff = tm.acc_aff;
    rep.acc_rem = tm.acc_rem;
    const SparseMatrix a_hat = normalize_adjacency(result.eval_graph);
    rep.val_objective = val_objective(result.state, a_hat, result.eval_graph, vctx);
    rep.wall_time_s = cost::to_seconds(result.report.flops);
    if (result.report.budget_exhausted) {
        rep.flags = rep.flags.empty() ? "budget_exhausted" : rep.flags + ";budget_exhausted";
    }
    if (out_result) *out_result = std::move(result);
    return rep;
}

MetricsReport run_cell(const CellRequest& req) {
    const CellContext ctx = build_cell_context(req);
    return run_cell_with_context(ctx, req);
}

namespace {

bool fraction_invariant(MethodId m) { return m == MethodId::original || m == MethodId::oracle; }

CellRequest make_request(const SweepConfig& cfg, MethodId m, double fraction, std::uint64_t seed,
                         const std::filesystem::path& cache_dir) {
    CellRequest req;
    req.dataset = cfg.dataset;
    req.attack = cfg.attack;
    req.method = m;
    req.fraction = fraction;
    req.seed = seed;
    req.master_seed = cfg.master_seed;
    req.configs = cfg.configs;
    req.configs.time_budget_ratio = cfg.time_budget_ratio;
    req.cache_dir = cache_dir;
    return req;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double pstd_of(const std::vector<double>& v, double mean) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const std::filesystem::path& cache_dir) {
    if (cfg.methods.empty()) throw ConfigError("sweep: no methods");
    if (cfg.fractions.empty()) throw ConfigError("sweep: no fractions");
    for (double f : cfg.fractions) {
        if (!(f > 0.0) || f > 1.0) throw ConfigError("sweep: fractions must lie in (0,1]");
    }
    if (cfg.seeds.empty()) throw ConfigError("sweep: no seeds");
    if (!(cfg.time_budget_ratio > 0.0)) throw ConfigError("sweep: time_budget_ratio must be positive");
    if (cfg.jobs < 1) throw ConfigError("sweep: jobs must be >= 1");

    // One shared context per seed: the same poisoned checkpoint feeds every
    // method and fraction of that seed's cells.
    std::map<std::uint64_t, CellContext> contexts;
    for (std::uint64_t s : cfg.seeds) {
        if (contexts.count(s)) continue;
        contexts.emplace(s, build_cell_context(make_request(cfg, cfg.methods.front(), cfg.fractions.front(), s,
                                                            cache_dir)));
    }

    struct Item {
        MethodId method;
        double fraction;
        std::uint64_t seed;
    };
    std::vector<Item> items;
    std::map<std::pair<int, std::uint64_t>, std::size_t> invariant_idx;
    std::map<std::tuple<int, std::size_t, std::uint64_t>, std::size_t> variant_idx;
    for (MethodId m : cfg.methods) {
        if (fraction_invariant(m)) {
            for (std::uint64_t s : cfg.seeds) {
                invariant_idx[{static_cast<int>(m), s}] = items.size();
                items.push_back({m, cfg.fractions.front(), s});
            }
        } else {
            for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
                for (std::uint64_t s : cfg.seeds) {
                    variant_idx[{static_cast<int>(m), fi, s}] = items.size();
                    items.push_back({m, cfg.fractions[fi], s});
                }
            }
        }
    }

    std::vector<MetricsReport> computed(items.size());
    auto run_one = [&](std::size_t i) {
        const Item& it = items[i];
        const CellRequest req = make_request(cfg, it.method, it.fraction, it.seed, cache_dir);
        try {
            computed[i] = run_cell_with_context(contexts.at(it.seed), req);
        } catch (const std::exception& e) {
            MetricsReport r;
            r.dataset = cfg.dataset.name;
            r.attack = to_string(cfg.attack.kind);
            r.method = it.method;
            r.fraction = it.fraction;
            r.seed = it.seed;
            r.flags = std::string("error:") + e.what();
            r.fingerprint = config_fingerprint(req);
            computed[i] = r;
        }
    };

    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), items.size());
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        auto drain = [&] {
            for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) run_one(i);
        };
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(drain);
        for (auto& th : pool) th.join();
    }

    SweepResult res;
    for (MethodId m : cfg.methods) {
        for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
            for (std::uint64_t s : cfg.seeds) {
                MetricsReport row;
                if (fraction_invariant(m)) {
                    row = computed[invariant_idx.at({static_cast<int>(m), s})];
                    row.fraction = cfg.fractions[fi];
                    row.fingerprint =
                        config_fingerprint(make_request(cfg, m, cfg.fractions[fi], s, cache_dir));
                } else {
                    row = computed[variant_idx.at({static_cast<int>(m), fi, s})];
                }
                if (row.flags.rfind("error:", 0) == 0) ++res.errors;
                res.rows.push_back(std::move(row));
            }
        }
    }

    // The poisoned model's remaining-class accuracy anchors the delta column
    // whether or not `original` is among the swept methods.
    std::vector<double> poisoned_rem;
    for (std::uint64_t s : cfg.seeds) {
        const CellContext& ctx = contexts.at(s);
        const TestMetrics tm = test_metrics(ctx.poisoned, ctx.record.manipulated, ctx.record.clean_label_vector(),
                                            ctx.record.class_a, ctx.record.class_b);
        poisoned_rem.push_back(tm.acc_rem);
    }
    const double poisoned_rem_mean = mean_of(poisoned_rem);

    for (MethodId m : cfg.methods) {
        for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
            std::vector<double> aff, rem;
            for (const MetricsReport& row : res.rows) {
                if (row.method != m || row.fraction != cfg.fractions[fi]) continue;
                if (row.flags.rfind("error:", 0) == 0) continue;
                aff.push_back(row.acc_aff);
                rem.push_back(row.acc_rem);
            }
            AggregateRow agg;
            agg.method = m;
            agg.fraction = cfg.fractions[fi];
            agg.n = static_cast<std::int64_t>(aff.size());
            agg.acc_aff_mean = mean_of(aff);
            agg.acc_aff_std = pstd_of(aff, agg.acc_aff_mean);
            agg.acc_rem_mean = mean_of(rem);
            agg.acc_rem_std = pstd_of(rem, agg.acc_rem_mean);
            agg.delta_acc_rem = agg.n > 0 ? agg.acc_rem_mean - poisoned_rem_mean : 0.0;
            res.aggregates.push_back(agg);
        }
    }
    return res;
}

void write_results_csv(const std::vector<MetricsReport>& rows, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "dataset,attack,method,fraction,seed,acc_aff,acc_rem,val_objective,wall_time_s,flags\n";
    for (const MetricsReport& r : rows) {
        out << r.dataset << ',' << r.attack << ',' << to_string(r.method) << ','
            << fmt("%.2f,%llu,%.6f,%.6f,%.6f,%.9f,", r.fraction, static_cast<unsigned long long>(r.seed),
                   r.acc_aff, r.acc_rem, r.val_objective, r.wall_time_s)
            << r.flags << '\n';
    }
}

void write_aggregates_csv(const std::vector<AggregateRow>& aggregates, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "method,fraction,n,acc_aff_mean,acc_aff_std,acc_rem_mean,acc_rem_std,delta_acc_rem\n";
    for (const AggregateRow& a : aggregates) {
        out << to_string(a.method) << ','
            << fmt("%.2f,%lld,%.1f,%.1f,%.1f,%.1f,%.1f", a.fraction, static_cast<long long>(a.n),
                   a.acc_aff_mean, a.acc_aff_std, a.acc_rem_mean, a.acc_rem_std, a.delta_acc_rem)
            << '\n';
    }
}

SearchResult hyperparameter_search(MethodId method, const SweepConfig& cfg, double fraction,
                                   const std::filesystem::path& cache_dir) {
    if (cfg.search.trials < 1) throw ConfigError("search: trials must be >= 1");
    if (method != MethodId::cognac && method != MethodId::acdc && method != MethodId::scrub) {
        throw ConfigError("search: method '" + to_string(method) + "' has no tunable parameters");
    }

    const CellRequest base = make_request(cfg, method, fraction, cfg.search.eval_seed, cache_dir);
    const CellContext ctx = build_cell_context(base);

    Rng rng(derive_seed(cfg.search.seed, "search"));
    SearchResult res;
    res.best_trial = -1;
    res.best_val = -std::numeric_limits<double>::infinity();
    std::string first_error;

    for (std::int64_t t = 0; t < cfg.search.trials; ++t) {
        CellRequest req = base;
        std::string params;
        if (method == MethodId::scrub) {
            ScrubConfig& s = req.configs.scrub;
            s.lr = rng.log_uniform(1e-5, 1e-1);
            s.epochs = rng.range_int(1, 50);
            static const double kTemps[] = {1.0, 2.0, 4.0, 8.0};
            s.distill_temperature = kTemps[rng.below(4)];
            params = fmt("lr=%.6e;epochs=%lld;distill_temperature=%.1f", s.lr,
                         static_cast<long long>(s.epochs), s.distill_temperature);
        } else {
            CognacConfig& c = method == MethodId::acdc ? req.configs.acdc : req.configs.cognac;
            const CognacMode mode = method == MethodId::acdc ? CognacMode::acdc_only : c.mode;
            switch (mode) {
                case CognacMode::full:
                    c.lr_contrast = rng.log_uniform(1e-5, 1e-1);
                    c.lr_ascent = rng.log_uniform(1e-5, 1e-1);
                    c.lr_descent = rng.log_uniform(1e-5, 1e-1);
                    c.k_percent = static_cast<double>(rng.range_int(0, 10));
                    c.total_epochs = rng.range_int(1, 50);
                    c.contrast_epochs = rng.range_int(1, 5);
                    c.ascent_descent_epochs = rng.range_int(1, 5);
                    params = fmt("lr_contrast=%.6e;lr_ascent=%.6e;lr_descent=%.6e;k_percent=%.0f;"
                                 "total_epochs=%lld;contrast_epochs=%lld;ascent_descent_epochs=%lld",
                                 c.lr_contrast, c.lr_ascent, c.lr_descent, c.k_percent,
                                 static_cast<long long>(c.total_epochs),
                                 static_cast<long long>(c.contrast_epochs),
                                 static_cast<long long>(c.ascent_descent_epochs));
                    break;
                case CognacMode::acdc_only:
                case CognacMode::single_opt_combined:
                    c.lr_ascent = rng.log_uniform(1e-5, 1e-1);
                    c.lr_descent = rng.log_uniform(1e-5, 1e-1);
                    c.total_epochs = rng.range_int(1, 50);
                    c.ascent_descent_epochs = rng.range_int(1, 5);
                    params = fmt("lr_ascent=%.6e;lr_descent=%.6e;total_epochs=%lld;ascent_descent_epochs=%lld",
                                 c.lr_ascent, c.lr_descent, static_cast<long long>(c.total_epochs),
                                 static_cast<long long>(c.ascent_descent_epochs));
                    break;
                case CognacMode::single_opt_one_lr:
                    // ascent_lr_multiplier stays pinned at the base config's
                    // value; the ablation shares a single learning rate.
                    c.lr_descent = rng.log_uniform(1e-5, 1e-1);
                    c.total_epochs = rng.range_int(1, 50);
                    c.ascent_descent_epochs = rng.range_int(1, 5);
                    params = fmt("lr_descent=%.6e;total_epochs=%lld;ascent_descent_epochs=%lld", c.lr_descent,
                                 static_cast<long long>(c.total_epochs),
                                 static_cast<long long>(c.ascent_descent_epochs));
                    break;
            }
        }

        TrialRow row;
        row.trial = t;
        row.params = params;
        try {
            const MetricsReport rep = run_cell_with_context(ctx, req);
            row.val_objective = rep.val_objective;
            row.wall_time_s = rep.wall_time_s;
            row.flags = rep.flags;
            if (rep.val_objective > res.best_val) {
                res.best_val = rep.val_objective;
                res.best_trial = t;
                res.best = req.configs;
            }
        } catch (const std::exception& e) {
            row.val_objective = -1.0;
            row.flags = std::string("error:") + e.what();
            if (first_error.empty()) first_error = e.what();
        }
        res.log.push_back(std::move(row));
    }

    if (res.best_trial < 0) {
        throw ConfigError("hyperparameter search: every trial failed; first error: " + first_error);
    }
    return res;
}

void write_trials_csv(const std::vector<TrialRow>& log, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "trial,val_objective,wall_time_s,params,flags\n";
    for (const TrialRow& r : log) {
        out << fmt("%lld,%.6f,%.9f,", static_cast<long long>(r.trial), r.val_objective, r.wall_time_s)
            << r.params << ',' << r.flags << '\n';
    }
}

void export_embeddings(const ModelState& s, const Graph& g, const std::vector<ClassId>& clean_labels,
                       ClassId class_a, ClassId class_b, EmbeddingSource source,
                       const std::filesystem::path& file) {
    if (static_cast<std::int64_t>(clean_labels.size()) != g.num_nodes) {
        throw ConfigError("export_embeddings: clean label vector size mismatch");
    }
    const SparseMatrix a_hat = normalize_adjacency(g);
    const ForwardTrace trace = forward_eval(s, a_hat, g.features);
    const Matrix& z = source == EmbeddingSource::hidden ? trace.hidden : trace.logits;
    const auto test_mask = g.mask_of(SplitRole::test);

    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "node_id,label,affected";
    for (std::int64_t j = 0; j < z.cols; ++j) out << ",e" << j;
    out << '\n';
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        if (!test_mask[static_cast<std::size_t>(v)]) continue;
        const ClassId y = clean_labels[static_cast<std::size_t>(v)];
        const int affected = (y == class_a || y == class_b) ? 1 : 0;
        out << v << ',' << y << ',' << affected;
        for (std::int64_t j = 0; j < z.cols; ++j) out << fmt(",%.6f", z.at(v, j));
        out << '\n';
    }
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

bool apply_cognac_setting(CognacConfig& c, const std::string& key, const std::string& field,
                          const std::string& value) {
    if (field == "k_percent") c.k_percent = parse_double(key, value);
    else if (field == "total_epochs") c.total_epochs = parse_int(key, value);
    else if (field == "contrast_epochs") c.contrast_epochs = parse_int(key, value);
    else if (field == "ascent_descent_epochs") c.ascent_descent_epochs = parse_int(key, value);
    else if (field == "lr_contrast") c.lr_contrast = parse_double(key, value);
    else if (field == "lr_ascent") c.lr_ascent = parse_double(key, value);
    else if (field == "lr_descent") c.lr_descent = parse_double(key, value);
    else if (field == "mode") c.mode = cognac_mode_from_string(value);
    else if (field == "unlink") c.unlink = parse_bool(key, value);
    else if (field == "ascent_lr_multiplier") c.ascent_lr_multiplier = parse_double(key, value);
    else if (field == "embedding_source") {
        if (value == "hidden") c.embedding_source = EmbeddingSource::hidden;
        else if (value == "logits") c.embedding_source = EmbeddingSource::logits;
        else throw ConfigError(key + ": expected hidden|logits, got '" + value + "'");
    } else if (field == "selection") {
        if (value == "topk") c.selection = AffectedSelection::topk;
        else if (value == "random_neighborhood") c.selection = AffectedSelection::random_neighborhood;
        else throw ConfigError(key + ": expected topk|random_neighborhood, got '" + value + "'");
    } else if (field == "resample_pairs") c.resample_pairs = parse_bool(key, value);
    else return false;
    return true;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(file.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(file.string() + ":" + std::to_string(lineno) + ": empty key");
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

void apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value) {
    const std::size_t dot = key.find('.');
    const std::string head = dot == std::string::npos ? key : key.substr(0, dot);
    const std::string field = dot == std::string::npos ? std::string() : key.substr(dot + 1);

    if (head == "dataset") {
        if (field == "kind") {
            if (value == "sbm") cfg.dataset.kind = DatasetKind::sbm;
            else if (value == "dir") cfg.dataset.kind = DatasetKind::dir;
            else throw ConfigError(key + ": expected sbm|dir, got '" + value + "'");
        } else if (field == "name") cfg.dataset.name = value;
        else if (field == "dir") cfg.dataset.dir = value;
        else if (field == "num_blocks") cfg.dataset.sbm.num_blocks = static_cast<ClassId>(parse_int(key, value));
        else if (field == "nodes_per_block") cfg.dataset.sbm.nodes_per_block = parse_int(key, value);
        else if (field == "p_in") cfg.dataset.sbm.p_in = parse_double(key, value);
        else if (field == "p_out") cfg.dataset.sbm.p_out = parse_double(key, value);
        else if (field == "feature_dim") cfg.dataset.sbm.feature_dim = parse_int(key, value);
        else if (field == "feature_noise") cfg.dataset.sbm.feature_noise = parse_double(key, value);
        else if (field == "train_fraction") cfg.dataset.split.train_fraction = parse_double(key, value);
        else if (field == "val_fraction") cfg.dataset.split.val_fraction = parse_double(key, value);
        else if (field == "test_fraction") cfg.dataset.split.test_fraction = parse_double(key, value);
        else throw ConfigError("unknown setting '" + key + "'");
        return;
    }
    if (head == "attack") {
        if (field == "kind") cfg.attack.kind = attack_kind_from_string(value);
        else if (field == "class_a") cfg.attack.class_a = static_cast<ClassId>(parse_int(key, value));
        else if (field == "class_b") cfg.attack.class_b = static_cast<ClassId>(parse_int(key, value));
        else if (field == "budget") cfg.attack.budget = parse_double(key, value);
        else throw ConfigError("unknown setting '" + key + "'");
        return;
    }
    if (head == "model") {
        if (field == "hidden_dim") cfg.configs.model.hidden_dim = parse_int(key, value);
        else if (field == "dropout_rate") cfg.configs.model.dropout_rate = parse_double(key, value);
        else if (field == "weight_init_scale") cfg.configs.model.weight_init_scale = parse_double(key, value);
        else throw ConfigError("unknown setting '" + key + "'");
        return;
    }
    if (head == "opt") {
        if (field == "learning_rate") cfg.configs.opt.learning_rate = parse_double(key, value);
        else if (field == "beta1") cfg.configs.opt.beta1 = parse_double(key, value);
        else if (field == "beta2") cfg.configs.opt.beta2 = parse_double(key, value);
        else if (field == "epsilon") cfg.configs.opt.epsilon = parse_double(key, value);
        else if (field == "decay_steps") cfg.configs.opt.decay_steps = parse_int(key, value);
        else throw ConfigError("unknown setting '" + key + "'");
        return;
    }
    if (head == "cognac") {
        if (!apply_cognac_setting(cfg.configs.cognac, key, field, value)) {
            throw ConfigError("unknown setting '" + key + "'");
        }
        return;
    }
    if (head == "acdc") {
        if (!apply_cognac_setting(cfg.configs.acdc, key, field, value)) {
            throw ConfigError("unknown setting '" + key + "'");
        }
        return;
    }
    if (head == "scrub") {
        if (field == "epochs") cfg.configs.scrub.epochs = parse_int(key, value);
        else if (field == "distill_temperature") cfg.configs.scrub.distill_temperature = parse_double(key, value);
        else if (field == "away_weight") cfg.configs.scrub.away_weight = parse_double(key, value);
        else if (field == "toward_weight") cfg.configs.scrub.toward_weight = parse_double(key, value);
        else if (field == "task_weight") cfg.configs.scrub.task_weight = parse_double(key, value);
        else if (field == "lr") cfg.configs.scrub.lr = parse_double(key, value);
        else throw ConfigError("unknown setting '" + key + "'");
        return;
    }
    if (head == "search") {
        if (field == "trials") cfg.search.trials = parse_int(key, value);
        else if (field == "seed") cfg.search.seed = parse_u64(key, value);
        else if (field == "eval_seed") cfg.search.eval_seed = parse_u64(key, value);
        else throw ConfigError("unknown setting '" + key + "'");
        return;
    }

    if (key == "methods") {
        cfg.methods.clear();
        for (const std::string& m : split_list(value)) cfg.methods.push_back(method_from_string(m));
        if (cfg.methods.empty()) throw ConfigError("methods: empty list");
        return;
    }
    if (key == "fractions") {
        cfg.fractions.clear();
        for (const std::string& f : split_list(value)) cfg.fractions.push_back(parse_double(key, f));
        if (cfg.fractions.empty()) throw ConfigError("fractions: empty list");
        return;
    }
    if (key == "seeds") {
        cfg.seeds.clear();
        for (const std::string& s : split_list(value)) cfg.seeds.push_back(parse_u64(key, s));
        if (cfg.seeds.empty()) throw ConfigError("seeds: empty list");
        return;
    }
    if (key == "train_epochs") {
        cfg.configs.train_epochs = parse_int(key, value);
        return;
    }
    if (key == "time_budget_ratio") {
        cfg.time_budget_ratio = parse_double(key, value);
        return;
    }
    if (key == "master_seed") {
        cfg.master_seed = parse_u64(key, value);
        return;
    }
    if (key == "jobs") {
        cfg.jobs = static_cast<int>(parse_int(key, value));
        return;
    }
    throw ConfigError("unknown setting '" + key + "'");
}

}  // namespace unlearn
