#pragma once

#include <string>
#include <utility>
#include <vector>

#include "synli/data.hpp"
#include "synli/tensor.hpp"

namespace synli {

struct ParserConfig {
    int embed_dim = 100;
    int encoder_hidden = 64;  // per direction
    int encoder_layers = 2;
    int arc_mlp_dim = 64;
    int label_mlp_dim = 32;
    int n_labels = 0;
    double dropout = 0.0;

    int swr_dim() const { return 2 * encoder_hidden; }
    void validate() const;
};

// Single GRU cell; the same recurrence is used by the parser encoder and ESIM.
struct GruCell {
    Tensor w_z, u_z, b_z;
    Tensor w_r, u_r, b_r;
    Tensor w_h, u_h, b_h;

    static GruCell init(int input_dim, int hidden_dim, Rng& rng);
    Tensor step(const Tensor& x, const Tensor& h_prev) const;
    int hidden_dim() const { return b_z.dim(0); }
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

// Stacked bidirectional GRU; output per token is [fwd_t ; bwd_t] of the final
// layer.
struct BiGruEncoder {
    std::vector<GruCell> fwd, bwd;  // one per layer
    int hidden = 0;

    static BiGruEncoder init(int input_dim, int hidden, int layers, Rng& rng);
    Tensor encode(const Tensor& inputs, double dropout, Rng* dropout_rng,
                  bool train_mode) const;  // [L×in] -> [L×2h]
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct ParserModel {
    ParserConfig config;
    Vocabulary vocab;
    LabelInventory deprels;
    Tensor embedding;  // [V × embed_dim], trainable
    BiGruEncoder encoder;
    Tensor arc_dep_w, arc_dep_b, arc_head_w, arc_head_b;
    Tensor arc_u;     // [arc × arc]
    Tensor arc_bias;  // [arc], the head-only linear term
    Tensor root_arc;  // learned ROOT vector in arc-head space
    Tensor label_dep_w, label_dep_b, label_head_w, label_head_b;
    // Per-label biaffine over bias-augmented projections, [(lab+1) × (lab+1)];
    // the extra constant column carries the linear and constant terms.
    std::vector<Tensor> label_u;
    Tensor root_label;  // ROOT vector in label-head space
    bool frozen = false;

    static ParserModel init(const ParserConfig& config, Vocabulary vocab,
                            LabelInventory deprels, uint64_t seed);
    std::vector<std::pair<std::string, Tensor>> parameters() const;
    std::vector<Tensor> parameter_tensors() const;
};

struct ArcLabelScores {
    Tensor arc_scores;    // [L × (L+1)], column 0 is ROOT
    Tensor label_scores;  // [L × (L+1) × n_labels]
};

struct SWRSequence {
    Tensor vectors;  // [L × swr_dim], detached
};

Tensor encode(const ParserModel& model, const TokenSequence& sentence, bool train_mode,
              Rng* dropout_rng = nullptr);

ArcLabelScores score_arcs_labels(const ParserModel& model, const Tensor& encoded);

enum class DecodeMode { Greedy, Mst };

// greedy: per-token argmax, may be cyclic; mst: Chu-Liu/Edmonds arborescence
// rooted at 0. Ties break toward the smaller head index.
std::vector<int> decode_tree(const Tensor& arc_scores, DecodeMode mode);

std::vector<int> predict_labels(const ArcLabelScores& scores, const std::vector<int>& heads);

std::pair<double, double> attachment_scores(const std::vector<int>& pred_heads,
                                            const std::vector<int>& pred_labels,
                                            const DepSentence& gold);

struct ParserEpoch {
    double loss = 0.0;
    double uas = 0.0;
};

struct ParserTrainResult {
    std::vector<ParserEpoch> history;
};

ParserTrainResult train_parser(ParserModel& model, const std::vector<DepSentence>& treebank,
                               double lr, int epochs, uint64_t seed);

SWRSequence extract_swrs(const ParserModel& frozen, const TokenSequence& sentence);

}  // namespace synli
