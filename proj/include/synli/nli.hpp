#pragma once

#include <string>
#include <utility>
#include <vector>

#include "synli/data.hpp"
#include "synli/parser.hpp"
#include "synli/tensor.hpp"

namespace synli {

enum class FusionMode {
    Baseline,
    LateFusion,
    SyntacticAttention,
    LateFusionNoise,
    SyntacticAttentionNoise,
};

std::string fusion_name(FusionMode m);
FusionMode parse_fusion(const std::string& name);
bool fusion_uses_swrs(FusionMode m);   // real parser SWRs
bool fusion_uses_noise(FusionMode m);  // noise ablations
bool fusion_is_late(FusionMode m);     // late fusion family
bool fusion_is_attention(FusionMode m);

struct DAConfig {
    double lr = 3e-4;
    int attend_hd = 295;
    int compare_hd = 108;
    int aggregate_hd = 172;
    double attend_dropout = 0.29;
    double compare_dropout = 0.34;
    double aggregate_dropout = 0.54;
    void validate() const;
};

struct ESIMConfig {
    double lr = 4e-4;
    int encoder_hidden = 64;      // per direction
    int composition_hidden = 64;  // per direction
    double model_dropout = 0.3;
    double output_dropout = 0.3;
    void validate() const;
};

struct NLIModel {
    enum class Arch { DA, ESIM };

    Arch arch = Arch::DA;
    FusionMode fusion = FusionMode::Baseline;
    LabelSet label_set;
    Vocabulary vocab;
    Tensor embedding;  // frozen word vectors, excluded from count_parameters
    int embed_dim = 0;
    int d_swr = 0;  // SWR width; 0 only for Baseline
    DAConfig da;
    ESIMConfig esim;

    // DA: attend / compare / aggregate feedforwards
    Tensor att_w, att_b;
    Tensor cmp_w, cmp_b;
    Tensor agg_w, agg_b;

    // ESIM: input encoder, enhancement projection, composition encoder
    BiGruEncoder input_encoder;
    Tensor proj_w, proj_b;
    BiGruEncoder composition;

    // classifier head H: one tanh hidden layer, then linear logits. Under the
    // late-fusion family the first layer is widened by 2*d_swr input columns.
    Tensor cls_w1, cls_b1, cls_w2, cls_b2;

    // noise ablation: fresh N(0,1) draw per forward pass by default; with
    // fixed_noise_per_example the draw is keyed on the token ids.
    bool fixed_noise_per_example = false;
    uint64_t noise_salt = 0;

    static NLIModel init_da(const DAConfig& config, FusionMode fusion, const LabelSet& labels,
                            const EmbeddingMatrix& embeddings, int d_swr, uint64_t seed);
    static NLIModel init_esim(const ESIMConfig& config, FusionMode fusion, const LabelSet& labels,
                              const EmbeddingMatrix& embeddings, int d_swr, uint64_t seed);

    std::vector<std::pair<std::string, Tensor>> parameters() const;
    std::vector<Tensor> parameter_tensors() const;

    int n_classes() const { return label_set.n_classes(); }
    int classifier_input_dim() const;
    int classifier_hidden_dim() const;
};

struct SwrPair {
    Tensor premise;     // [ℓp × d_swr]
    Tensor hypothesis;  // [ℓh × d_swr]
};

// Eq-level attention primitive. Baseline: a_ij = p̄_i·h̄_j. SWR modes append
// the untransformed SWRs to both sides before the dot product.
Tensor compute_attention(const Tensor& p_bar, const Tensor& h_bar, const Tensor* swr_p,
                         const Tensor* swr_h, FusionMode mode);

Tensor sample_noise_swr(const Shape& shape, Rng& rng);

// e -> logits; late-fusion variants concatenate the final-position SWRs.
Tensor classify_head(const NLIModel& model, const Tensor& e, const Tensor* swr_last_p,
                     const Tensor* swr_last_h, FusionMode mode);

Tensor da_forward(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                  bool train_mode, Rng* rng);
Tensor esim_forward(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                    bool train_mode, Rng* rng);

// Dispatches on architecture; resolves noise-mode SWRs internally.
Tensor nli_forward(const NLIModel& model, const NLIExample& example, const SwrPair* swrs,
                   bool train_mode, Rng* rng);

int64_t count_parameters(const NLIModel& model);

}  // namespace synli
