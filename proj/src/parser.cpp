#include "synli/parser.hpp"

#include <algorithm>
#include <cmath>

namespace synli {

void ParserConfig::validate() const {
    if (embed_dim <= 0 || encoder_hidden <= 0 || encoder_layers <= 0 || arc_mlp_dim <= 0 ||
        label_mlp_dim <= 0 || n_labels <= 0)
        throw ContractError("ParserConfig: all dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ContractError("ParserConfig: dropout in [0,1)");
}

// ---- GRU ----

static Tensor glorot(int rows, int cols, Rng& rng) {
    double s = std::sqrt(2.0 / (rows + cols));
    return Tensor::randn({rows, cols}, rng, s, true);
}

GruCell GruCell::init(int input_dim, int hidden_dim, Rng& rng) {
    GruCell c;
    c.w_z = glorot(hidden_dim, input_dim, rng);
    c.u_z = glorot(hidden_dim, hidden_dim, rng);
    c.b_z = Tensor::zeros({hidden_dim}, true);
    c.w_r = glorot(hidden_dim, input_dim, rng);
    c.u_r = glorot(hidden_dim, hidden_dim, rng);
    c.b_r = Tensor::zeros({hidden_dim}, true);
    c.w_h = glorot(hidden_dim, input_dim, rng);
    c.u_h = glorot(hidden_dim, hidden_dim, rng);
    c.b_h = Tensor::zeros({hidden_dim}, true);
    return c;
}

Tensor GruCell::step(const Tensor& x, const Tensor& h_prev) const {
    Tensor z = sigmoid_t(add(add(matvec(w_z, x), matvec(u_z, h_prev)), b_z));
    Tensor r = sigmoid_t(add(add(matvec(w_r, x), matvec(u_r, h_prev)), b_r));
    Tensor h_tilde = tanh_t(add(add(matvec(w_h, x), matvec(u_h, mul(r, h_prev))), b_h));
    // h = (1-z)*h_prev + z*h_tilde
    Tensor one_minus_z = sub(Tensor::full(z.shape(), 1.0), z);
    return add(mul(one_minus_z, h_prev), mul(z, h_tilde));
}

void GruCell::collect(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".w_z", w_z);
    out.emplace_back(prefix + ".u_z", u_z);
    out.emplace_back(prefix + ".b_z", b_z);
    out.emplace_back(prefix + ".w_r", w_r);
    out.emplace_back(prefix + ".u_r", u_r);
    out.emplace_back(prefix + ".b_r", b_r);
    out.emplace_back(prefix + ".w_h", w_h);
    out.emplace_back(prefix + ".u_h", u_h);
    out.emplace_back(prefix + ".b_h", b_h);
}

BiGruEncoder BiGruEncoder::init(int input_dim, int hidden, int layers, Rng& rng) {
    BiGruEncoder enc;
    enc.hidden = hidden;
    int in = input_dim;
    for (int l = 0; l < layers; ++l) {
        enc.fwd.push_back(GruCell::init(in, hidden, rng));
        enc.bwd.push_back(GruCell::init(in, hidden, rng));
        in = 2 * hidden;
    }
    return enc;
}

Tensor BiGruEncoder::encode(const Tensor& inputs, double dropout, Rng* dropout_rng,
                            bool train_mode) const {
    int len = inputs.dim(0);
    Tensor layer_in = inputs;
    Tensor layer_out;
    for (size_t l = 0; l < fwd.size(); ++l) {
        if (train_mode && dropout > 0.0) {
            if (!dropout_rng) throw ContractError("encoder dropout needs an rng in train mode");
            layer_in = dropout_t(layer_in, dropout, *dropout_rng, true);
        }
        std::vector<Tensor> fwd_states(static_cast<size_t>(len)), bwd_states(static_cast<size_t>(len));
        Tensor h = Tensor::zeros({hidden});
        for (int t = 0; t < len; ++t) {
            h = fwd[l].step(row(layer_in, t), h);
            fwd_states[static_cast<size_t>(t)] = h;
        }
        h = Tensor::zeros({hidden});
        for (int t = len - 1; t >= 0; --t) {
            h = bwd[l].step(row(layer_in, t), h);
            bwd_states[static_cast<size_t>(t)] = h;
        }
        std::vector<Tensor> rows;
        rows.reserve(static_cast<size_t>(len));
        for (int t = 0; t < len; ++t)
            rows.push_back(concat({fwd_states[static_cast<size_t>(t)],
                                   bwd_states[static_cast<size_t>(t)]}, 0));
        layer_out = stack_rows(rows);
        layer_in = layer_out;
    }
    return layer_out;
}

void BiGruEncoder::collect(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
    for (size_t l = 0; l < fwd.size(); ++l) {
        fwd[l].collect(prefix + ".fwd" + std::to_string(l), out);
        bwd[l].collect(prefix + ".bwd" + std::to_string(l), out);
    }
}

// ---- model ----

ParserModel ParserModel::init(const ParserConfig& config, Vocabulary vocab,
                              LabelInventory deprels, uint64_t seed) {
    ParserConfig cfg = config;
    if (cfg.n_labels == 0) cfg.n_labels = deprels.size();
    cfg.validate();
    Rng rng(seed);
    ParserModel m;
    m.config = cfg;
    m.vocab = std::move(vocab);
    m.deprels = std::move(deprels);
    m.embedding = Tensor::randn({m.vocab.size(), cfg.embed_dim}, rng, 0.1, true);
    m.encoder = BiGruEncoder::init(cfg.embed_dim, cfg.encoder_hidden, cfg.encoder_layers, rng);
    int ds = cfg.swr_dim();
    m.arc_dep_w = glorot(cfg.arc_mlp_dim, ds, rng);
    m.arc_dep_b = Tensor::zeros({cfg.arc_mlp_dim}, true);
    m.arc_head_w = glorot(cfg.arc_mlp_dim, ds, rng);
    m.arc_head_b = Tensor::zeros({cfg.arc_mlp_dim}, true);
    m.arc_u = glorot(cfg.arc_mlp_dim, cfg.arc_mlp_dim, rng);
    m.arc_bias = Tensor::zeros({cfg.arc_mlp_dim}, true);
    m.root_arc = Tensor::randn({cfg.arc_mlp_dim}, rng, 0.1, true);
    m.label_dep_w = glorot(cfg.label_mlp_dim, ds, rng);
    m.label_dep_b = Tensor::zeros({cfg.label_mlp_dim}, true);
    m.label_head_w = glorot(cfg.label_mlp_dim, ds, rng);
    m.label_head_b = Tensor::zeros({cfg.label_mlp_dim}, true);
    for (int l = 0; l < cfg.n_labels; ++l)
        m.label_u.push_back(glorot(cfg.label_mlp_dim + 1, cfg.label_mlp_dim + 1, rng));
    m.root_label = Tensor::randn({cfg.label_mlp_dim}, rng, 0.1, true);
    return m;
}

std::vector<std::pair<std::string, Tensor>> ParserModel::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embedding", embedding);
    encoder.collect("encoder", out);
    out.emplace_back("arc_dep_w", arc_dep_w);
    out.emplace_back("arc_dep_b", arc_dep_b);
    out.emplace_back("arc_head_w", arc_head_w);
    out.emplace_back("arc_head_b", arc_head_b);
    out.emplace_back("arc_u", arc_u);
    out.emplace_back("arc_bias", arc_bias);
    out.emplace_back("root_arc", root_arc);
    out.emplace_back("label_dep_w", label_dep_w);
    out.emplace_back("label_dep_b", label_dep_b);
    out.emplace_back("label_head_w", label_head_w);
    out.emplace_back("label_head_b", label_head_b);
    for (size_t l = 0; l < label_u.size(); ++l)
        out.emplace_back("label_u" + std::to_string(l), label_u[l]);
    out.emplace_back("root_label", root_label);
    return out;
}

std::vector<Tensor> ParserModel::parameter_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : parameters()) out.push_back(t);
    return out;
}

// ---- forward ----

Tensor encode(const ParserModel& model, const TokenSequence& sentence, bool train_mode,
              Rng* dropout_rng) {
    if (sentence.ids.empty()) throw ContractError("encode: empty sentence");
    for (int id : sentence.ids)
        if (id < 0 || id >= model.vocab.size())
            throw ContractError("encode: token id out of vocabulary range");
    Tensor emb = gather_rows(model.embedding, sentence.ids);
    return model.encoder.encode(emb, model.config.dropout, dropout_rng, train_mode);
}

static Tensor mlp(const Tensor& x, const Tensor& w, const Tensor& b) {
    return relu_t(add_rowvec(matmul(x, transpose(w)), b));
}

static Tensor with_bias_col(const Tensor& m) {
    return concat({m, Tensor::full({m.dim(0), 1}, 1.0)}, 1);
}

namespace {

struct RawScores {
    Tensor arc;          // [L × (L+1)]
    Tensor labels_flat;  // [L(L+1) × n_labels]
};

RawScores raw_scores(const ParserModel& model, const Tensor& encoded) {
    int len = encoded.dim(0);
    Tensor h_dep = mlp(encoded, model.arc_dep_w, model.arc_dep_b);
    Tensor h_head = mlp(encoded, model.arc_head_w, model.arc_head_b);
    Tensor h_head_all =
        concat({reshape(model.root_arc, {1, model.config.arc_mlp_dim}), h_head}, 0);
    Tensor arc = matmul(matmul(h_dep, model.arc_u), transpose(h_head_all));
    arc = add_rowvec(arc, matvec(h_head_all, model.arc_bias));

    Tensor l_dep = with_bias_col(mlp(encoded, model.label_dep_w, model.label_dep_b));
    Tensor l_head = mlp(encoded, model.label_head_w, model.label_head_b);
    Tensor l_head_all = with_bias_col(
        concat({reshape(model.root_label, {1, model.config.label_mlp_dim}), l_head}, 0));
    std::vector<Tensor> per_label;
    per_label.reserve(model.label_u.size());
    for (const Tensor& u : model.label_u) {
        Tensor s = matmul(matmul(l_dep, u), transpose(l_head_all));  // [L × (L+1)]
        per_label.push_back(reshape(s, {len * (len + 1), 1}));
    }
    return {arc, concat(per_label, 1)};
}

}  // namespace

ArcLabelScores score_arcs_labels(const ParserModel& model, const Tensor& encoded) {
    int len = encoded.dim(0);
    RawScores raw = raw_scores(model, encoded);
    return {raw.arc, reshape(raw.labels_flat, {len, len + 1, model.config.n_labels})};
}

// ---- decoding ----

static std::vector<int> greedy_heads(const Tensor& arc_scores) {
    int len = arc_scores.dim(0);
    std::vector<int> heads(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
        int best = 0;
        for (int j = 1; j <= len; ++j)
            if (arc_scores.at(i, j) > arc_scores.at(i, best)) best = j;
        heads[static_cast<size_t>(i)] = best;
    }
    return heads;
}

namespace {

// Chu-Liu/Edmonds maximum arborescence. Nodes 0..n-1, node 0 is the root;
// w[h][d] is the score of attaching d under h. Returns parent per node.
std::vector<int> cle(int n, std::vector<std::vector<double>> w) {
    const double NEG = -1e18;
    std::vector<int> parent(static_cast<size_t>(n), -1);
    for (int v = 1; v < n; ++v) {
        int best = -1;
        for (int u = 0; u < n; ++u) {
            if (u == v || w[static_cast<size_t>(u)][static_cast<size_t>(v)] <= NEG / 2) continue;
            if (best == -1 || w[static_cast<size_t>(u)][static_cast<size_t>(v)] >
                                  w[static_cast<size_t>(best)][static_cast<size_t>(v)])
                best = u;
        }
        parent[static_cast<size_t>(v)] = best;
    }
    // find a cycle among the chosen edges
    std::vector<int> color(static_cast<size_t>(n), 0);
    std::vector<int> cycle;
    for (int v = 1; v < n && cycle.empty(); ++v) {
        if (color[static_cast<size_t>(v)]) continue;
        std::vector<int> path;
        int cur = v;
        while (cur != 0 && color[static_cast<size_t>(cur)] == 0) {
            color[static_cast<size_t>(cur)] = 1;
            path.push_back(cur);
            cur = parent[static_cast<size_t>(cur)];
        }
        if (cur != 0 && color[static_cast<size_t>(cur)] == 1) {
            // walked into the current path: extract the cycle
            auto it = std::find(path.begin(), path.end(), cur);
            cycle.assign(it, path.end());
        }
        for (int u : path) color[static_cast<size_t>(u)] = 2;
        if (cur != 0) color[static_cast<size_t>(cur)] = 2;
    }
    if (cycle.empty()) return parent;

    // contract the cycle into a single node and recurse
    std::vector<char> in_cycle(static_cast<size_t>(n), 0);
    double cycle_score = 0.0;
    for (int v : cycle) {
        in_cycle[static_cast<size_t>(v)] = 1;
        cycle_score += w[static_cast<size_t>(parent[static_cast<size_t>(v)])]
                        [static_cast<size_t>(v)];
    }
    std::vector<int> keep;  // old ids of non-cycle nodes
    std::vector<int> new_id(static_cast<size_t>(n), -1);
    for (int v = 0; v < n; ++v)
        if (!in_cycle[static_cast<size_t>(v)]) {
            new_id[static_cast<size_t>(v)] = static_cast<int>(keep.size());
            keep.push_back(v);
        }
    int c = static_cast<int>(keep.size());  // contracted node id
    int m = c + 1;
    std::vector<std::vector<double>> w2(static_cast<size_t>(m),
                                        std::vector<double>(static_cast<size_t>(m), NEG));
    // best entering/leaving representatives for expansion
    std::vector<int> enter_via(static_cast<size_t>(m), -1);  // cycle node chosen per outside u
    std::vector<int> leave_via(static_cast<size_t>(m), -1);
    for (int u = 0; u < n; ++u) {
        if (in_cycle[static_cast<size_t>(u)]) continue;
        int nu = new_id[static_cast<size_t>(u)];
        for (int v = 0; v < n; ++v) {
            if (u == v) continue;
            if (!in_cycle[static_cast<size_t>(v)]) {
                w2[static_cast<size_t>(nu)][static_cast<size_t>(new_id[static_cast<size_t>(v)])] =
                    w[static_cast<size_t>(u)][static_cast<size_t>(v)];
            } else {
                // u -> cycle: adjusted by breaking v's in-cycle edge
                double adj = w[static_cast<size_t>(u)][static_cast<size_t>(v)] -
                             w[static_cast<size_t>(parent[static_cast<size_t>(v)])]
                              [static_cast<size_t>(v)];
                if (adj > w2[static_cast<size_t>(nu)][static_cast<size_t>(c)]) {
                    w2[static_cast<size_t>(nu)][static_cast<size_t>(c)] = adj;
                    enter_via[static_cast<size_t>(nu)] = v;
                }
            }
        }
    }
    for (int v = 0; v < n; ++v) {
        if (in_cycle[static_cast<size_t>(v)]) continue;
        int nv = new_id[static_cast<size_t>(v)];
        for (int u : cycle) {
            if (w[static_cast<size_t>(u)][static_cast<size_t>(v)] >
                w2[static_cast<size_t>(c)][static_cast<size_t>(nv)]) {
                w2[static_cast<size_t>(c)][static_cast<size_t>(nv)] =
                    w[static_cast<size_t>(u)][static_cast<size_t>(v)];
                leave_via[static_cast<size_t>(nv)] = u;
            }
        }
    }
    std::vector<int> sub = cle(m, w2);
    std::vector<int> result(static_cast<size_t>(n), -1);
    for (int v = 0; v < n; ++v) {
        if (in_cycle[static_cast<size_t>(v)]) continue;
        int nv = new_id[static_cast<size_t>(v)];
        int p = sub[static_cast<size_t>(nv)];
        if (p == -1) continue;  // root
        result[static_cast<size_t>(v)] = p == c ? leave_via[static_cast<size_t>(nv)]
                                                : keep[static_cast<size_t>(p)];
    }
    // expand: the cycle keeps all its edges except the one into the entry node
    int entry_parent_outside = sub[static_cast<size_t>(c)];
    int entry = enter_via[static_cast<size_t>(entry_parent_outside)];
    for (int v : cycle)
        result[static_cast<size_t>(v)] = parent[static_cast<size_t>(v)];
    result[static_cast<size_t>(entry)] = keep[static_cast<size_t>(entry_parent_outside)];
    (void)cycle_score;
    return result;
}

}  // namespace

std::vector<int> decode_tree(const Tensor& arc_scores, DecodeMode mode) {
    int len = arc_scores.dim(0);
    if (len < 1) throw ContractError("decode_tree: empty sentence");
    if (mode == DecodeMode::Greedy) return greedy_heads(arc_scores);
    // nodes: 0 = ROOT, 1..L = tokens; w[h][d]
    int n = len + 1;
    std::vector<std::vector<double>> w(static_cast<size_t>(n),
                                       std::vector<double>(static_cast<size_t>(n), -1e18));
    for (int d = 1; d <= len; ++d)
        for (int h = 0; h <= len; ++h) {
            if (h == d) continue;
            // epsilon bias toward smaller head index for deterministic ties
            w[static_cast<size_t>(h)][static_cast<size_t>(d)] =
                arc_scores.at(d - 1, h) - 1e-12 * h;
        }
    std::vector<int> parent = cle(n, w);
    std::vector<int> heads(static_cast<size_t>(len));
    for (int d = 1; d <= len; ++d) heads[static_cast<size_t>(d - 1)] = parent[static_cast<size_t>(d)];
    return heads;
}

std::vector<int> predict_labels(const ArcLabelScores& scores, const std::vector<int>& heads) {
    int len = scores.arc_scores.dim(0);
    int n_labels = scores.label_scores.dim(2);
    std::vector<int> labels(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
        int h = heads[static_cast<size_t>(i)];
        int best = 0;
        for (int l = 1; l < n_labels; ++l)
            if (scores.label_scores.at(i, h, l) > scores.label_scores.at(i, h, best)) best = l;
        labels[static_cast<size_t>(i)] = best;
    }
    return labels;
}

std::pair<double, double> attachment_scores(const std::vector<int>& pred_heads,
                                            const std::vector<int>& pred_labels,
                                            const DepSentence& gold) {
    size_t n = gold.heads.size();
    if (pred_heads.size() != n || pred_labels.size() != n)
        throw ContractError("attachment_scores: length mismatch");
    int correct_heads = 0, correct_both = 0;
    for (size_t i = 0; i < n; ++i) {
        if (pred_heads[i] == gold.heads[i]) {
            ++correct_heads;
            if (pred_labels[i] == gold.deprels[i]) ++correct_both;
        }
    }
    return {static_cast<double>(correct_heads) / n, static_cast<double>(correct_both) / n};
}

// ---- training ----

static Tensor sentence_loss(const ParserModel& model, const DepSentence& s, bool train_mode,
                            Rng* dropout_rng) {
    Tensor enc = encode(model, s.tokens, train_mode, dropout_rng);
    int len = enc.dim(0);
    RawScores raw = raw_scores(model, enc);
    Tensor arc_loss = cross_entropy_rows(raw.arc, s.heads, Reduction::Mean);
    // label loss is taken at the gold head only
    std::vector<int> sel;
    sel.reserve(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) sel.push_back(i * (len + 1) + s.heads[static_cast<size_t>(i)]);
    Tensor label_loss =
        cross_entropy_rows(gather_rows(raw.labels_flat, sel), s.deprels, Reduction::Mean);
    return add(arc_loss, label_loss);
}

ParserTrainResult train_parser(ParserModel& model, const std::vector<DepSentence>& treebank,
                               double lr, int epochs, uint64_t seed) {
    if (treebank.empty()) throw ContractError("train_parser: empty treebank");
    Rng rng(seed);
    Rng dropout_rng = rng.fork();
    std::vector<Tensor> params = model.parameter_tensors();
    AdamState adam;
    ParserTrainResult result;
    std::vector<size_t> order(treebank.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    const size_t batch_size = 8;
    int64_t step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += batch_size) {
            size_t end = std::min(order.size(), start + batch_size);
            Tape tape;
            Tensor total;
            for (size_t i = start; i < end; ++i) {
                Tensor l = sentence_loss(model, treebank[order[i]], true, &dropout_rng);
                total = total.defined() ? add(total, l) : l;
            }
            Tensor loss = scale(total, 1.0 / static_cast<double>(end - start));
            ++step;
            if (!std::isfinite(loss.value()))
                throw DivergenceError("train_parser: non-finite loss at step " +
                                      std::to_string(step));
            for (Tensor& p : params) p.zero_grad();
            tape.backward(loss);
            for (Tensor& p : params) p.grad();  // ensure buffers exist for unused params
            adam_step(params, adam, lr);
            epoch_loss += loss.value() * static_cast<double>(end - start);
        }
        ParserEpoch ep;
        ep.loss = epoch_loss / static_cast<double>(treebank.size());
        int correct = 0, total_tokens = 0;
        for (const DepSentence& s : treebank) {
            Tensor enc = encode(model, s.tokens, false);
            ArcLabelScores sc = score_arcs_labels(model, enc);
            std::vector<int> heads = decode_tree(sc.arc_scores, DecodeMode::Mst);
            for (size_t i = 0; i < heads.size(); ++i)
                if (heads[i] == s.heads[i]) ++correct;
            total_tokens += static_cast<int>(heads.size());
        }
        ep.uas = static_cast<double>(correct) / total_tokens;
        result.history.push_back(ep);
    }
    return result;
}

SWRSequence extract_swrs(const ParserModel& frozen, const TokenSequence& sentence) {
    if (!frozen.frozen)
        throw ContractError("extract_swrs: parser must be frozen before SWR extraction");
    Tensor enc = encode(frozen, sentence, false);
    return SWRSequence{enc.detach()};
}

}  // namespace synli
