#include "unlearn/gcn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "unlearn/bytes.hpp"

namespace unlearn {

SparseMatrix normalize_adjacency(const Graph& g) {
    SparseMatrix A;
    A.n = g.num_nodes;
    A.row_ptr.assign(static_cast<std::size_t>(g.num_nodes) + 1, 0);
    A.col.reserve(g.col_idx.size() + static_cast<std::size_t>(g.num_nodes));
    A.val.reserve(A.col.capacity());

    std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(g.num_nodes));
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        inv_sqrt_deg[static_cast<std::size_t>(v)] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
    }

    for (NodeId v = 0; v < g.num_nodes; ++v) {
        auto nb = g.neighbors(v);
        bool self_emitted = false;
        const double dv = inv_sqrt_deg[static_cast<std::size_t>(v)];
        for (NodeId u : nb) {
            if (!self_emitted && u > v) {
                A.col.push_back(v);
                A.val.push_back(dv * dv);
                self_emitted = true;
            }
            A.col.push_back(u);
            A.val.push_back(dv * inv_sqrt_deg[static_cast<std::size_t>(u)]);
        }
        if (!self_emitted) {
            A.col.push_back(v);
            A.val.push_back(dv * dv);
        }
        A.row_ptr[static_cast<std::size_t>(v) + 1] = static_cast<std::int64_t>(A.col.size());
    }
    return A;
}

Matrix spmm(const SparseMatrix& A, const Matrix& X) {
    if (A.n != X.rows) throw ConfigError("spmm: dimension mismatch");
    Matrix Y(A.n, X.cols);
    for (std::int64_t i = 0; i < A.n; ++i) {
        double* yi = Y.row(i);
        for (std::int64_t e = A.row_ptr[i]; e < A.row_ptr[i + 1]; ++e) {
            const double a = A.val[static_cast<std::size_t>(e)];
            const double* xj = X.row(A.col[static_cast<std::size_t>(e)]);
            for (std::int64_t c = 0; c < X.cols; ++c) yi[c] += a * xj[c];
        }
    }
    cost::add(2ull * A.col.size() * static_cast<std::uint64_t>(X.cols));
    return Y;
}

namespace {

void validate_model_config(const ModelConfig& cfg) {
    if (cfg.num_layers != 2) throw ConfigError("model: only two-layer networks are supported");
    if (cfg.feature_dim < 1 || cfg.hidden_dim < 1 || cfg.num_classes < 1) {
        throw ConfigError("model: dimensions must be positive");
    }
    if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) {
        throw ConfigError("model: dropout_rate must lie in [0,1)");
    }
    if (!(cfg.weight_init_scale > 0.0)) throw ConfigError("model: weight_init_scale must be positive");
}

Matrix init_weight(std::int64_t fan_in, std::int64_t fan_out, double scale, Rng& rng) {
    Matrix w(fan_in, fan_out);
    const double s = scale / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.a) v = rng.uniform(-s, s);
    return w;
}

}  // namespace

ModelState init_model(const ModelConfig& cfg) {
    validate_model_config(cfg);
    ModelState s;
    s.cfg = cfg;
    Rng init_rng(derive_seed(cfg.seed, "weight-init"));
    s.w1 = init_weight(cfg.feature_dim, cfg.hidden_dim, cfg.weight_init_scale, init_rng);
    s.w2 = init_weight(cfg.hidden_dim, cfg.num_classes, cfg.weight_init_scale, init_rng);
    s.dropout_rng = Rng(derive_seed(cfg.seed, "dropout"));
    return s;
}

namespace {

ForwardTrace run_forward(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                         bool train_mode, Rng* dropout_rng) {
    if (features.cols != s.cfg.feature_dim) throw ConfigError("forward: feature dimension mismatch");
    if (a_hat.n != features.rows) throw ConfigError("forward: adjacency and feature rows differ");

    ForwardTrace t;
    t.train_mode = train_mode;
    t.pre_hidden = spmm(a_hat, matmul(features, s.w1));
    t.hidden = t.pre_hidden;
    for (double& v : t.hidden.a) v = v > 0.0 ? v : 0.0;

    if (train_mode && s.cfg.dropout_rate > 0.0) {
        t.keep_prob = 1.0 - s.cfg.dropout_rate;
        t.dropout_keep.resize(t.hidden.a.size());
        for (std::size_t i = 0; i < t.hidden.a.size(); ++i) {
            const bool keep = dropout_rng->unit() >= s.cfg.dropout_rate;
            t.dropout_keep[i] = keep ? 1 : 0;
            t.hidden.a[i] = keep ? t.hidden.a[i] / t.keep_prob : 0.0;
        }
    }

    t.logits = spmm(a_hat, matmul(t.hidden, s.w2));
    return t;
}

}  // namespace

ForwardTrace forward_eval(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features) {
    return run_forward(s, a_hat, features, false, nullptr);
}

ForwardTrace forward_train(ModelState& s, const SparseMatrix& a_hat, const Matrix& features) {
    return run_forward(s, a_hat, features, true, &s.dropout_rng);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows, logits.cols);
    for (std::int64_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double* pi = p.row(i);
        double mx = z[0];
        for (std::int64_t j = 1; j < logits.cols; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < logits.cols; ++j) {
            pi[j] = std::exp(z[j] - mx);
            sum += pi[j];
        }
        for (std::int64_t j = 0; j < logits.cols; ++j) pi[j] /= sum;
    }
    return p;
}

namespace {

// log softmax of one row evaluated at index y, numerically stable.
double log_prob_at(const double* z, std::int64_t cols, ClassId y) {
    double mx = z[0];
    for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) sum += std::exp(z[j] - mx);
    return z[y] - mx - std::log(sum);
}

std::int64_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::int64_t n = 0;
    for (std::uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

}  // namespace

double masked_cross_entropy(const Matrix& logits, const std::vector<ClassId>& labels,
                            const std::vector<std::uint8_t>& mask) {
    if (static_cast<std::int64_t>(labels.size()) != logits.rows ||
        static_cast<std::int64_t>(mask.size()) != logits.rows) {
        throw ConfigError("masked_cross_entropy: size mismatch");
    }
    const std::int64_t n = mask_count(mask);
    if (n == 0) throw ConfigError("masked_cross_entropy: empty mask");
    double loss = 0.0;
    for (std::int64_t i = 0; i < logits.rows; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        loss -= log_prob_at(logits.row(i), logits.cols, labels[static_cast<std::size_t>(i)]);
    }
    return loss / static_cast<double>(n);
}

namespace {

Gradients backward_common(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                          const ForwardTrace& trace, Matrix d_hidden) {
    // Through dropout (inverted scaling) and relu, then the first layer.
    if (trace.train_mode && !trace.dropout_keep.empty()) {
        for (std::size_t i = 0; i < d_hidden.a.size(); ++i) {
            d_hidden.a[i] = trace.dropout_keep[i] ? d_hidden.a[i] / trace.keep_prob : 0.0;
        }
    }
    for (std::size_t i = 0; i < d_hidden.a.size(); ++i) {
        if (trace.pre_hidden.a[i] <= 0.0) d_hidden.a[i] = 0.0;
    }
    const Matrix g2 = spmm(a_hat, d_hidden);  // A_hat is symmetric
    Gradients g;
    g.w1 = matmul_tn(features, g2);
    g.w2 = Matrix::zeros(s.w2.rows, s.w2.cols);
    return g;
}

}  // namespace

Gradients backward_from_hidden(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                               const ForwardTrace& trace, const Matrix& d_hidden) {
    return backward_common(s, a_hat, features, trace, d_hidden);
}

Gradients backward_from_logits(const ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                               const ForwardTrace& trace, const Matrix& d_logits) {
    const Matrix g1 = spmm(a_hat, d_logits);
    Gradients g = backward_common(s, a_hat, features, trace, matmul_nt(g1, s.w2));
    g.w2 = matmul_tn(trace.hidden, g1);
    return g;
}

LossGrads cross_entropy_loss_grads(ModelState& s, const SparseMatrix& a_hat, const Matrix& features,
                                   const std::vector<ClassId>& labels, const std::vector<std::uint8_t>& mask,
                                   int sign, bool train_mode) {
    if (sign != 1 && sign != -1) throw ConfigError("cross_entropy_loss_grads: sign must be +1 or -1");
    const ForwardTrace trace =
        train_mode ? forward_train(s, a_hat, features) : forward_eval(s, a_hat, features);
    const std::int64_t n = mask_count(mask);
    if (n == 0) throw ConfigError("cross_entropy_loss_grads: empty mask");

    const Matrix probs = softmax_rows(trace.logits);
    Matrix d_logits(trace.logits.rows, trace.logits.cols);
    const double scale = static_cast<double>(sign) / static_cast<double>(n);
    double loss = 0.0;
    for (std::int64_t i = 0; i < trace.logits.rows; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const ClassId y = labels[static_cast<std::size_t>(i)];
        loss -= log_prob_at(trace.logits.row(i), trace.logits.cols, y);
        const double* pi = probs.row(i);
        double* di = d_logits.row(i);
        for (std::int64_t j = 0; j < trace.logits.cols; ++j) di[j] = scale * pi[j];
        di[y] -= scale;
    }

    LossGrads out;
    out.loss = static_cast<double>(sign) * loss / static_cast<double>(n);
    out.grads = backward_from_logits(s, a_hat, features, trace, d_logits);
    return out;
}

void register_optimizer(ModelState& s, const std::string& id, std::int64_t decay_steps) {
    if (s.optimizers.count(id)) return;
    AdamMoments m;
    m.m_w1 = Matrix::zeros(s.w1.rows, s.w1.cols);
    m.v_w1 = Matrix::zeros(s.w1.rows, s.w1.cols);
    m.m_w2 = Matrix::zeros(s.w2.rows, s.w2.cols);
    m.v_w2 = Matrix::zeros(s.w2.rows, s.w2.cols);
    m.decay_steps = decay_steps;
    s.optimizers.emplace(id, std::move(m));
}

bool has_optimizer(const ModelState& s, const std::string& id) { return s.optimizers.count(id) > 0; }

std::uint64_t optimizer_fingerprint(const ModelState& s, const std::string& id) {
    const auto it = s.optimizers.find(id);
    if (it == s.optimizers.end()) throw ConfigError("optimizer_fingerprint: unknown instance '" + id + "'");
    std::uint64_t h = fingerprint(it->second.m_w1);
    h = mix64(h ^ fingerprint(it->second.v_w1));
    h = mix64(h ^ fingerprint(it->second.m_w2));
    h = mix64(h ^ fingerprint(it->second.v_w2));
    return mix64(h ^ static_cast<std::uint64_t>(it->second.step));
}

std::uint64_t weights_fingerprint(const ModelState& s) {
    return mix64(fingerprint(s.w1) ^ mix64(fingerprint(s.w2)));
}

namespace {

void adam_update(Matrix& w, Matrix& m, Matrix& v, const Matrix& g, double rate, const OptimizerConfig& opt,
                 std::int64_t t) {
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < w.a.size(); ++i) {
        m.a[i] = opt.beta1 * m.a[i] + (1.0 - opt.beta1) * g.a[i];
        v.a[i] = opt.beta2 * v.a[i] + (1.0 - opt.beta2) * g.a[i] * g.a[i];
        const double m_hat = m.a[i] / bc1;
        const double v_hat = v.a[i] / bc2;
        w.a[i] -= rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
}

}  // namespace

void adam_step(ModelState& s, const Gradients& grads, const std::string& id, const OptimizerConfig& opt) {
    const auto it = s.optimizers.find(id);
    if (it == s.optimizers.end()) throw ConfigError("adam_step: unknown optimizer instance '" + id + "'");
    if (!grads.w1.same_shape(s.w1) || !grads.w2.same_shape(s.w2)) {
        throw ConfigError("adam_step: gradient shape mismatch");
    }
    AdamMoments& mo = it->second;
    double rate = opt.learning_rate;
    const std::int64_t decay = opt.decay_steps > 0 ? opt.decay_steps : mo.decay_steps;
    if (decay > 0) {
        const double frac = static_cast<double>(mo.step) / static_cast<double>(decay);
        rate *= std::max(0.0, 1.0 - frac);
    }
    const std::int64_t t = ++mo.step;
    adam_update(s.w1, mo.m_w1, mo.v_w1, grads.w1, rate, opt, t);
    adam_update(s.w2, mo.m_w2, mo.v_w2, grads.w2, rate, opt, t);
}

double accuracy(const Matrix& logits, const std::vector<ClassId>& labels, const std::vector<std::uint8_t>& mask) {
    const std::int64_t n = mask_count(mask);
    if (n == 0) throw ConfigError("accuracy: empty mask");
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < logits.rows; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const double* z = logits.row(i);
        std::int64_t arg = 0;
        for (std::int64_t j = 1; j < logits.cols; ++j) {
            if (z[j] > z[arg]) arg = j;  // ties keep the lower class id
        }
        if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

double val_objective(const ModelState& s, const SparseMatrix& a_hat, const Graph& g, const ValContext& ctx) {
    const ForwardTrace trace = forward_eval(s, a_hat, g.features);
    const auto val_mask = g.mask_of(SplitRole::val);
    const std::vector<ClassId>& labels = ctx.clean_labels.empty() ? g.labels : ctx.clean_labels;
    if (!ctx.has_attack) return accuracy(trace.logits, labels, val_mask);

    std::vector<std::uint8_t> aff(val_mask.size(), 0), rem(val_mask.size(), 0);
    for (std::size_t i = 0; i < val_mask.size(); ++i) {
        if (!val_mask[i]) continue;
        const ClassId y = labels[i];
        (y == ctx.class_a || y == ctx.class_b ? aff : rem)[i] = 1;
    }
    // Degenerate splits (no affected or no remaining validation nodes) fall
    // back to plain validation accuracy.
    if (mask_count(aff) == 0 || mask_count(rem) == 0) return accuracy(trace.logits, labels, val_mask);
    return 0.5 * (accuracy(trace.logits, labels, aff) + accuracy(trace.logits, labels, rem));
}

TrainResult train(const Graph& g, const ModelConfig& mcfg, const OptimizerConfig& ocfg, std::int64_t epochs,
                  const ValContext* ctx, const std::vector<std::uint8_t>* train_mask_override) {
    if (epochs < 0) throw ConfigError("train: negative epoch count");
    const auto t0 = std::chrono::steady_clock::now();
    cost::Scope meter;

    const SparseMatrix a_hat = normalize_adjacency(g);
    const std::vector<std::uint8_t> train_mask = train_mask_override ? *train_mask_override : g.mask_of(SplitRole::train);
    if (mask_count(train_mask) == 0) throw ConfigError("train: empty train mask");

    ModelState state = init_model(mcfg);
    register_optimizer(state, "train", epochs);
    const ValContext default_ctx;
    const ValContext& vctx = ctx ? *ctx : default_ctx;

    TrainResult res;
    res.report.best_epoch = 0;
    res.report.best_val = val_objective(state, a_hat, g, vctx);
    ModelState best = state;

    for (std::int64_t epoch = 1; epoch <= epochs; ++epoch) {
        const LossGrads lg =
            cross_entropy_loss_grads(state, a_hat, g.features, g.labels, train_mask, 1, true);
        adam_step(state, lg.grads, "train", ocfg);
        const double vo = val_objective(state, a_hat, g, vctx);
        res.report.train_loss.push_back(lg.loss);
        res.report.val_objectives.push_back(vo);
        if (vo > res.report.best_val) {
            res.report.best_val = vo;
            res.report.best_epoch = epoch;
            best = state;
        }
    }

    res.state = std::move(best);
    res.report.flops = meter.elapsed();
    res.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace {
constexpr std::uint64_t kCheckpointMagic = 0x31544b43'4e434755ull;  // "UGCNCKT1"
}

void save_checkpoint(const ModelState& s, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    bytes::write_u64(out, kCheckpointMagic);
    bytes::write_u64(out, static_cast<std::uint64_t>(s.cfg.feature_dim));
    bytes::write_u64(out, static_cast<std::uint64_t>(s.cfg.hidden_dim));
    bytes::write_u64(out, static_cast<std::uint64_t>(s.cfg.num_classes));
    bytes::write_u64(out, static_cast<std::uint64_t>(s.cfg.num_layers));
    bytes::write_f64(out, s.cfg.dropout_rate);
    bytes::write_f64(out, s.cfg.weight_init_scale);
    bytes::write_u64(out, s.cfg.seed);
    bytes::write_matrix_block(out, s.w1);
    bytes::write_matrix_block(out, s.w2);
    if (!out) throw IoError("short write to " + file.string());
}

ModelState load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    if (bytes::read_u64(in, "checkpoint magic") != kCheckpointMagic) {
        throw ParseError(file.string() + ": not a model checkpoint");
    }
    ModelConfig cfg;
    cfg.feature_dim = static_cast<std::int64_t>(bytes::read_u64(in, "feature_dim"));
    cfg.hidden_dim = static_cast<std::int64_t>(bytes::read_u64(in, "hidden_dim"));
    cfg.num_classes = static_cast<std::int64_t>(bytes::read_u64(in, "num_classes"));
    cfg.num_layers = static_cast<int>(bytes::read_u64(in, "num_layers"));
    cfg.dropout_rate = bytes::read_f64(in, "dropout_rate");
    cfg.weight_init_scale = bytes::read_f64(in, "weight_init_scale");
    cfg.seed = bytes::read_u64(in, "seed");
    validate_model_config(cfg);

    ModelState s;
    s.cfg = cfg;
    s.w1 = bytes::read_matrix_block(in, "layer-1 weights");
    s.w2 = bytes::read_matrix_block(in, "layer-2 weights");
    if (s.w1.rows != cfg.feature_dim || s.w1.cols != cfg.hidden_dim || s.w2.rows != cfg.hidden_dim ||
        s.w2.cols != cfg.num_classes) {
        throw ValidationError(file.string() + ": weight shapes disagree with the header");
    }
    s.dropout_rng = Rng(derive_seed(cfg.seed, "dropout"));
    return s;
}

ModelState quantize_like_checkpoint(const ModelState& s) {
    ModelState out = s;
    for (double& v : out.w1.a) v = static_cast<double>(static_cast<float>(v));
    for (double& v : out.w2.a) v = static_cast<double>(static_cast<float>(v));
    out.optimizers.clear();
    out.dropout_rng = Rng(derive_seed(s.cfg.seed, "dropout"));
    return out;
}

}  // namespace unlearn
