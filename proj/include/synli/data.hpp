#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "synli/tensor.hpp"

namespace synli {

struct Vocabulary {
    // index 0 = padding, index 1 = unknown
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::unordered_map<std::string, int> index;
    std::vector<std::string> tokens;  // tokens[i] is the surface form of index i

    Vocabulary();
    int add(const std::string& token);           // idempotent
    int lookup(const std::string& token) const;  // kUnk when absent
    int size() const { return static_cast<int>(tokens.size()); }
};

struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<int> ids;
    size_t length() const { return tokens.size(); }
};

struct DepSentence {
    TokenSequence tokens;
    std::vector<int> heads;    // [0, L], 0 = ROOT
    std::vector<int> deprels;  // label indices
};

enum class NLILabel { Entailment = 0, Contradiction = 1, Neutral = 2 };

struct LabelSet {
    std::vector<NLILabel> labels;  // fixed order for stable logit indices
    static LabelSet three_class();
    static LabelSet two_class();  // SciTail-style: entailment, neutral
    int n_classes() const { return static_cast<int>(labels.size()); }
    int index_of(NLILabel l) const;  // throws on label outside set
};

std::string label_name(NLILabel l);
NLILabel parse_label(const std::string& name);

struct NLIExample {
    TokenSequence premise;
    TokenSequence hypothesis;
    NLILabel label;
};

struct EmbeddingMatrix {
    Vocabulary vocab;
    Tensor vectors;  // [V × dim]
    int dim = 0;
};

// Whitespace split with terminal punctuation separated; lowercased before
// vocabulary lookup. Internal apostrophes are kept.
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);
std::vector<std::string> tokenize_words(const std::string& text);

// token + expected_dim reals per line. Rows 0/1 (pad/unk) are prepended;
// unk = columnwise mean of the loaded vectors.
EmbeddingMatrix load_embeddings(const std::string& path, int expected_dim);

struct LabelInventory {
    std::unordered_map<std::string, int> index;
    std::vector<std::string> names;
    int add(const std::string& name);
    int size() const { return static_cast<int>(names.size()); }
};

struct Treebank {
    std::vector<DepSentence> sentences;
    LabelInventory deprels;
};

Treebank load_conllu(const std::string& path, Vocabulary& vocab);
void write_conllu(const std::string& path, const Treebank& treebank);

struct NLILoadResult {
    std::vector<NLIExample> examples;
    int dropped = 0;  // gold_label "-"
};

// One JSON object per line: sentence1, sentence2, gold_label.
NLILoadResult load_nli_jsonl(const std::string& path, const LabelSet& label_set,
                             Vocabulary& vocab);
void write_nli_jsonl(const std::string& path, const std::vector<NLIExample>& examples);

struct PaddedBatch {
    Tensor ids;   // [B × Lmax], values are vocabulary indices
    Tensor mask;  // [B × Lmax], 1.0 on real tokens
};

PaddedBatch pad_batch(const std::vector<TokenSequence>& sequences, int pad_index = 0);

// Verifies every token reaches ROOT in <= L steps; used by the loader.
bool is_tree(const std::vector<int>& heads);

}  // namespace synli
