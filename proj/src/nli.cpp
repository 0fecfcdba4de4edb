#include "synli/nli.hpp"

#include <cmath>

namespace synli {

std::string fusion_name(FusionMode m) {
    switch (m) {
        case FusionMode::Baseline: return "baseline";
        case FusionMode::LateFusion: return "lf";
        case FusionMode::SyntacticAttention: return "sa";
        case FusionMode::LateFusionNoise: return "lf_n";
        case FusionMode::SyntacticAttentionNoise: return "sa_n";
    }
    return "?";
}

FusionMode parse_fusion(const std::string& name) {
    if (name == "baseline") return FusionMode::Baseline;
    if (name == "lf") return FusionMode::LateFusion;
    if (name == "sa") return FusionMode::SyntacticAttention;
    if (name == "lf_n") return FusionMode::LateFusionNoise;
    if (name == "sa_n") return FusionMode::SyntacticAttentionNoise;
    throw FormatError("unknown fusion mode '" + name + "'");
}

bool fusion_uses_swrs(FusionMode m) {
    return m == FusionMode::LateFusion || m == FusionMode::SyntacticAttention;
}

bool fusion_uses_noise(FusionMode m) {
    return m == FusionMode::LateFusionNoise || m == FusionMode::SyntacticAttentionNoise;
}

bool fusion_is_late(FusionMode m) {
    return m == FusionMode::LateFusion || m == FusionMode::LateFusionNoise;
}

bool fusion_is_attention(FusionMode m) {
    return m == FusionMode::SyntacticAttention || m == FusionMode::SyntacticAttentionNoise;
}

void DAConfig::validate() const {
    if (attend_hd <= 0 || compare_hd <= 0 || aggregate_hd <= 0)
        throw ContractError("DAConfig: dimensions must be positive");
    for (double d : {attend_dropout, compare_dropout, aggregate_dropout})
        if (d < 0.0 || d >= 1.0) throw ContractError("DAConfig: dropout in [0,1)");
}

void ESIMConfig::validate() const {
    if (encoder_hidden <= 0 || composition_hidden <= 0)
        throw ContractError("ESIMConfig: dimensions must be positive");
    for (double d : {model_dropout, output_dropout})
        if (d < 0.0 || d >= 1.0) throw ContractError("ESIMConfig: dropout in [0,1)");
}

static Tensor glorot(int rows, int cols, Rng& rng) {
    double s = std::sqrt(2.0 / (rows + cols));
    return Tensor::randn({rows, cols}, rng, s, true);
}

int NLIModel::classifier_input_dim() const {
    int base = arch == Arch::DA ? da.aggregate_hd : 8 * esim.composition_hidden;
    return base + (fusion_is_late(fusion) ? 2 * d_swr : 0);
}

int NLIModel::classifier_hidden_dim() const {
    return arch == Arch::DA ? da.aggregate_hd : esim.composition_hidden;
}

static void init_classifier(NLIModel& m, Rng& rng) {
    m.cls_w1 = glorot(m.classifier_hidden_dim(), m.classifier_input_dim(), rng);
    m.cls_b1 = Tensor::zeros({m.classifier_hidden_dim()}, true);
    m.cls_w2 = glorot(m.n_classes(), m.classifier_hidden_dim(), rng);
    m.cls_b2 = Tensor::zeros({m.n_classes()}, true);
}

NLIModel NLIModel::init_da(const DAConfig& config, FusionMode fusion, const LabelSet& labels,
                           const EmbeddingMatrix& embeddings, int d_swr, uint64_t seed) {
    config.validate();
    if (fusion != FusionMode::Baseline && d_swr <= 0)
        throw ContractError("init_da: SWR and noise modes need d_swr > 0");
    Rng rng(seed);
    NLIModel m;
    m.arch = Arch::DA;
    m.fusion = fusion;
    m.label_set = labels;
    m.vocab = embeddings.vocab;
    m.embedding = embeddings.vectors;  // frozen, shared
    m.embed_dim = embeddings.dim;
    m.d_swr = fusion == FusionMode::Baseline ? 0 : d_swr;
    m.da = config;
    m.noise_salt = seed;
    m.att_w = glorot(config.attend_hd, m.embed_dim, rng);
    m.att_b = Tensor::zeros({config.attend_hd}, true);
    m.cmp_w = glorot(config.compare_hd, 2 * m.embed_dim, rng);
    m.cmp_b = Tensor::zeros({config.compare_hd}, true);
    m.agg_w = glorot(config.aggregate_hd, 2 * config.compare_hd, rng);
    m.agg_b = Tensor::zeros({config.aggregate_hd}, true);
    init_classifier(m, rng);
    return m;
}

NLIModel NLIModel::init_esim(const ESIMConfig& config, FusionMode fusion, const LabelSet& labels,
                             const EmbeddingMatrix& embeddings, int d_swr, uint64_t seed) {
    config.validate();
    if (fusion != FusionMode::Baseline && d_swr <= 0)
        throw ContractError("init_esim: SWR and noise modes need d_swr > 0");
    Rng rng(seed);
    NLIModel m;
    m.arch = Arch::ESIM;
    m.fusion = fusion;
    m.label_set = labels;
    m.vocab = embeddings.vocab;
    m.embedding = embeddings.vectors;
    m.embed_dim = embeddings.dim;
    m.d_swr = fusion == FusionMode::Baseline ? 0 : d_swr;
    m.esim = config;
    m.noise_salt = seed;
    m.input_encoder = BiGruEncoder::init(m.embed_dim, config.encoder_hidden, 1, rng);
    m.proj_w = glorot(config.composition_hidden, 8 * config.encoder_hidden, rng);
    m.proj_b = Tensor::zeros({config.composition_hidden}, true);
    m.composition = BiGruEncoder::init(config.composition_hidden, config.composition_hidden, 1, rng);
    init_classifier(m, rng);
    return m;
}

std::vector<std::pair<std::string, Tensor>> NLIModel::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (arch == Arch::DA) {
        out.emplace_back("att_w", att_w);
        out.emplace_back("att_b", att_b);
        out.emplace_back("cmp_w", cmp_w);
        out.emplace_back("cmp_b", cmp_b);
        out.emplace_back("agg_w", agg_w);
        out.emplace_back("agg_b", agg_b);
    } else {
        input_encoder.collect("input_encoder", out);
        out.emplace_back("proj_w", proj_w);
        out.emplace_back("proj_b", proj_b);
        composition.collect("composition", out);
    }
    out.emplace_back("cls_w1", cls_w1);
    out.emplace_back("cls_b1", cls_b1);
    out.emplace_back("cls_w2", cls_w2);
    out.emplace_back("cls_b2", cls_b2);
    return out;
}

std::vector<Tensor> NLIModel::parameter_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : parameters()) out.push_back(t);
    return out;
}

int64_t count_parameters(const NLIModel& model) {
    int64_t n = 0;
    for (auto& [name, t] : model.parameters()) n += static_cast<int64_t>(t.size());
    return n;
}

// ---- fusion primitives ----

Tensor compute_attention(const Tensor& p_bar, const Tensor& h_bar, const Tensor* swr_p,
                         const Tensor* swr_h, FusionMode mode) {
    bool attend_swr = fusion_is_attention(mode);
    if (attend_swr) {
        if (!swr_p || !swr_h)
            throw ContractError("compute_attention: SWR tensors required under " +
                                fusion_name(mode));
        if (swr_p->dim(0) != p_bar.dim(0) || swr_h->dim(0) != h_bar.dim(0))
            throw ContractError("compute_attention: SWR length does not match sentence length");
        Tensor p_aug = concat({p_bar, *swr_p}, 1);
        Tensor h_aug = concat({h_bar, *swr_h}, 1);
        return matmul(p_aug, transpose(h_aug));
    }
    return matmul(p_bar, transpose(h_bar));
}

Tensor sample_noise_swr(const Shape& shape, Rng& rng) {
    return Tensor::randn(shape, rng);
}

Tensor classify_head(const NLIModel& model, const Tensor& e, const Tensor* swr_last_p,
                     const Tensor* swr_last_h, FusionMode mode) {
    Tensor input = e;
    if (fusion_is_late(mode)) {
        if (!swr_last_p || !swr_last_h)
            throw ContractError("classify_head: final-position SWRs required under " +
                                fusion_name(mode));
        input = concat({e, *swr_last_p, *swr_last_h}, 0);
    }
    if (input.dim(0) != model.cls_w1.dim(1))
        throw ContractError("classify_head: input dim " + std::to_string(input.dim(0)) +
                            " vs classifier expecting " + std::to_string(model.cls_w1.dim(1)));
    Tensor h = tanh_t(add(matvec(model.cls_w1, input), model.cls_b1));
    return add(matvec(model.cls_w2, h), model.cls_b2);
}

// ---- forwards ----

namespace {

struct ResolvedSwrs {
    Tensor premise, hypothesis;
    bool present = false;
};

ResolvedSwrs resolve_swrs(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                          Rng* rng) {
    ResolvedSwrs r;
    if (model.fusion == FusionMode::Baseline) {
        if (swrs) throw ContractError("baseline forward given SWRs");
        return r;
    }
    int lp = static_cast<int>(example.premise.length());
    int lh = static_cast<int>(example.hypothesis.length());
    if (fusion_uses_swrs(model.fusion)) {
        if (!swrs) throw ContractError("fusion mode " + fusion_name(model.fusion) +
                                       " requires extracted SWRs");
        if (swrs->premise.dim(0) != lp || swrs->hypothesis.dim(0) != lh)
            throw ContractError("SWR length does not match tokenized sentence length");
        r.premise = swrs->premise;
        r.hypothesis = swrs->hypothesis;
    } else {
        // noise ablation: s ~ N(0,1), resampled every forward pass unless
        // pinned per example
        if (model.fixed_noise_per_example) {
            uint64_t key = model.noise_salt;
            for (int id : example.premise.ids) key = fnv1a(&id, sizeof(id), key);
            for (int id : example.hypothesis.ids) key = fnv1a(&id, sizeof(id), key);
            Rng local(key);
            r.premise = sample_noise_swr({lp, model.d_swr}, local);
            r.hypothesis = sample_noise_swr({lh, model.d_swr}, local);
        } else {
            if (!rng) throw ContractError("noise fusion mode requires an rng");
            r.premise = sample_noise_swr({lp, model.d_swr}, *rng);
            r.hypothesis = sample_noise_swr({lh, model.d_swr}, *rng);
        }
    }
    r.present = true;
    return r;
}

Tensor last_row(const Tensor& m) { return row(m, m.dim(0) - 1); }

}  // namespace

Tensor da_forward(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                  bool train_mode, Rng* rng) {
    if (model.arch != NLIModel::Arch::DA) throw ContractError("da_forward: not a DA model");
    if (train_mode && !rng) throw ContractError("da_forward: train mode requires an rng");
    ResolvedSwrs s = resolve_swrs(model, example, swrs, rng);
    Tensor p_emb = gather_rows(model.embedding, example.premise.ids);
    Tensor h_emb = gather_rows(model.embedding, example.hypothesis.ids);

    auto ff = [&](const Tensor& x, const Tensor& w, const Tensor& b, double dropout) {
        Tensor y = relu_t(add_rowvec(matmul(x, transpose(w)), b));
        return train_mode ? dropout_t(y, dropout, *rng, true) : y;
    };

    // attend
    Tensor fp = ff(p_emb, model.att_w, model.att_b, model.da.attend_dropout);
    Tensor fh = ff(h_emb, model.att_w, model.att_b, model.da.attend_dropout);
    const Tensor* sp = s.present && fusion_is_attention(model.fusion) ? &s.premise : nullptr;
    const Tensor* sh = s.present && fusion_is_attention(model.fusion) ? &s.hypothesis : nullptr;
    Tensor scores = compute_attention(fp, fh, sp, sh, model.fusion);

    // soft alignments over raw embeddings
    Tensor beta = matmul(softmax_rows(scores), h_emb);
    Tensor alpha = matmul(softmax_rows(transpose(scores)), p_emb);

    // compare
    Tensor v1 = ff(concat({p_emb, beta}, 1), model.cmp_w, model.cmp_b, model.da.compare_dropout);
    Tensor v2 = ff(concat({h_emb, alpha}, 1), model.cmp_w, model.cmp_b, model.da.compare_dropout);

    // aggregate
    Tensor pooled = concat({sum_axis0(v1), sum_axis0(v2)}, 0);
    Tensor e = relu_t(add(matvec(model.agg_w, pooled), model.agg_b));
    if (train_mode) e = dropout_t(e, model.da.aggregate_dropout, *rng, true);

    if (fusion_is_late(model.fusion)) {
        Tensor lp = last_row(s.premise);
        Tensor lh = last_row(s.hypothesis);
        return classify_head(model, e, &lp, &lh, model.fusion);
    }
    return classify_head(model, e, nullptr, nullptr, model.fusion);
}

Tensor esim_forward(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                    bool train_mode, Rng* rng) {
    if (model.arch != NLIModel::Arch::ESIM) throw ContractError("esim_forward: not an ESIM model");
    if (train_mode && !rng) throw ContractError("esim_forward: train mode requires an rng");
    ResolvedSwrs s = resolve_swrs(model, example, swrs, rng);
    Tensor p_emb = gather_rows(model.embedding, example.premise.ids);
    Tensor h_emb = gather_rows(model.embedding, example.hypothesis.ids);

    Tensor p_bar = model.input_encoder.encode(p_emb, model.esim.model_dropout, rng, train_mode);
    Tensor h_bar = model.input_encoder.encode(h_emb, model.esim.model_dropout, rng, train_mode);

    const Tensor* sp = s.present && fusion_is_attention(model.fusion) ? &s.premise : nullptr;
    const Tensor* sh = s.present && fusion_is_attention(model.fusion) ? &s.hypothesis : nullptr;
    Tensor scores = compute_attention(p_bar, h_bar, sp, sh, model.fusion);

    Tensor p_aligned = matmul(softmax_rows(scores), h_bar);
    Tensor h_aligned = matmul(softmax_rows(transpose(scores)), p_bar);

    auto enhance = [](const Tensor& a, const Tensor& b) {
        return concat({a, b, sub(a, b), mul(a, b)}, 1);
    };
    auto compose = [&](const Tensor& m) {
        Tensor proj = relu_t(add_rowvec(matmul(m, transpose(model.proj_w)), model.proj_b));
        return model.composition.encode(proj, model.esim.model_dropout, rng, train_mode);
    };
    Tensor cp = compose(enhance(p_bar, p_aligned));
    Tensor ch = compose(enhance(h_bar, h_aligned));

    Tensor e = concat({mean_axis0(cp), max_axis0(cp), mean_axis0(ch), max_axis0(ch)}, 0);
    if (train_mode) e = dropout_t(e, model.esim.output_dropout, *rng, true);

    if (fusion_is_late(model.fusion)) {
        Tensor lp = last_row(s.premise);
        Tensor lh = last_row(s.hypothesis);
        return classify_head(model, e, &lp, &lh, model.fusion);
    }
    return classify_head(model, e, nullptr, nullptr, model.fusion);
}

Tensor nli_forward(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                   bool train_mode, Rng* rng) {
    return model.arch == NLIModel::Arch::DA ? da_forward(model, example, swrs, train_mode, rng)
                                            : esim_forward(model, example, swrs, train_mode, rng);
}

}  // namespace synli
