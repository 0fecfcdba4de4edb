#include "synli/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace synli {

// ---- Vocabulary ----

Vocabulary::Vocabulary() {
    tokens = {"<pad>", "<unk>"};
    index = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocabulary::add(const std::string& token) {
    auto it = index.find(token);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(tokens.size());
    tokens.push_back(token);
    index.emplace(token, id);
    return id;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? kUnk : it->second;
}

// ---- labels ----

LabelSet LabelSet::three_class() {
    return LabelSet{{NLILabel::Entailment, NLILabel::Contradiction, NLILabel::Neutral}};
}

LabelSet LabelSet::two_class() {
    return LabelSet{{NLILabel::Entailment, NLILabel::Neutral}};
}

int LabelSet::index_of(NLILabel l) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == l) return static_cast<int>(i);
    throw FormatError("label '" + label_name(l) + "' not in this dataset's label set");
}

std::string label_name(NLILabel l) {
    switch (l) {
        case NLILabel::Entailment: return "entailment";
        case NLILabel::Contradiction: return "contradiction";
        case NLILabel::Neutral: return "neutral";
    }
    return "?";
}

NLILabel parse_label(const std::string& name) {
    if (name == "entailment") return NLILabel::Entailment;
    if (name == "contradiction") return NLILabel::Contradiction;
    if (name == "neutral") return NLILabel::Neutral;
    throw FormatError("unknown NLI label '" + name + "'");
}

// ---- tokenization ----

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string word;
    auto is_term_punct = [](char c) {
        return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
    };
    while (is >> word) {
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        // split trailing terminal punctuation into separate tokens
        std::vector<std::string> tail;
        while (word.size() > 1 && is_term_punct(word.back())) {
            tail.push_back(std::string(1, word.back()));
            word.pop_back();
        }
        out.push_back(word);
        for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.push_back(*it);
    }
    if (out.empty()) throw FormatError("tokenize: empty input text");
    return out;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
    TokenSequence seq;
    seq.tokens = tokenize_words(text);
    seq.ids.reserve(seq.tokens.size());
    for (const std::string& t : seq.tokens) seq.ids.push_back(vocab.lookup(t));
    return seq;
}

// ---- embeddings ----

EmbeddingMatrix load_embeddings(const std::string& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open embeddings file: " + path);
    EmbeddingMatrix em;
    em.dim = expected_dim;
    std::vector<double> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vec;
        double v;
        while (ls >> v) vec.push_back(v);
        if (static_cast<int>(vec.size()) != expected_dim)
            throw FormatError("embeddings line " + std::to_string(line_no) + ": expected " +
                              std::to_string(expected_dim) + " values, got " +
                              std::to_string(vec.size()));
        em.vocab.add(token);
        rows.insert(rows.end(), vec.begin(), vec.end());
    }
    int n_loaded = em.vocab.size() - 2;
    std::vector<double> all(static_cast<size_t>(em.vocab.size()) * expected_dim, 0.0);
    // row 0 stays zero (pad); row 1 = mean of loaded vectors
    if (n_loaded > 0) {
        for (int j = 0; j < expected_dim; ++j) {
            double s = 0.0;
            for (int i = 0; i < n_loaded; ++i) s += rows[static_cast<size_t>(i) * expected_dim + j];
            all[static_cast<size_t>(expected_dim) + j] = s / n_loaded;
        }
    }
    std::copy(rows.begin(), rows.end(), all.begin() + 2 * static_cast<size_t>(expected_dim));
    em.vectors = Tensor::from({em.vocab.size(), expected_dim}, std::move(all));
    return em;
}

// ---- CoNLL-U ----

bool is_tree(const std::vector<int>& heads) {
    int n = static_cast<int>(heads.size());
    for (int h : heads)
        if (h < 0 || h > n) return false;
    for (int i = 0; i < n; ++i) {
        int cur = i + 1;
        int steps = 0;
        while (cur != 0) {
            cur = heads[static_cast<size_t>(cur - 1)];
            if (++steps > n) return false;  // cycle
        }
    }
    return true;
}

Treebank load_conllu(const std::string& path, Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open treebank file: " + path);
    Treebank tb;
    std::vector<std::string> forms;
    std::vector<int> heads, deprels;
    int sentence_index = 0;
    auto flush = [&]() {
        if (forms.empty()) return;
        if (!is_tree(heads))
            throw FormatError("malformed tree (cyclic or unreachable ROOT) in sentence " +
                              std::to_string(sentence_index));
        DepSentence s;
        for (const std::string& f : forms) {
            std::string lower = f;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            s.tokens.tokens.push_back(lower);
            s.tokens.ids.push_back(vocab.add(lower));
        }
        s.heads = heads;
        s.deprels = deprels;
        tb.sentences.push_back(std::move(s));
        forms.clear();
        heads.clear();
        deprels.clear();
        ++sentence_index;
    };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        if (line[0] == '#') continue;
        std::vector<std::string> cols;
        std::istringstream ls(line);
        std::string col;
        while (std::getline(ls, col, '\t')) cols.push_back(col);
        if (cols.size() < 8)
            throw FormatError("conllu line " + std::to_string(line_no) + ": expected 10 columns");
        const std::string& id = cols[0];
        if (id.find('-') != std::string::npos || id.find('.') != std::string::npos)
            continue;  // multiword ranges and empty nodes
        forms.push_back(cols[1]);
        try {
            size_t pos = 0;
            int head = std::stoi(cols[6], &pos);
            if (pos != cols[6].size()) throw std::invalid_argument("");
            heads.push_back(head);
        } catch (const std::exception&) {
            throw FormatError("conllu line " + std::to_string(line_no) + ": non-integer HEAD '" +
                              cols[6] + "'");
        }
        deprels.push_back(tb.deprels.add(cols[7]));
    }
    flush();
    return tb;
}

void write_conllu(const std::string& path, const Treebank& treebank) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    for (const DepSentence& s : treebank.sentences) {
        for (size_t i = 0; i < s.tokens.tokens.size(); ++i) {
            out << (i + 1) << '\t' << s.tokens.tokens[i] << "\t_\t_\t_\t_\t" << s.heads[i]
                << '\t' << treebank.deprels.names[static_cast<size_t>(s.deprels[i])]
                << "\t_\t_\n";
        }
        out << '\n';
    }
}

int LabelInventory::add(const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(names.size());
    names.push_back(name);
    index.emplace(name, id);
    return id;
}

// ---- NLI JSONL ----

NLILoadResult load_nli_jsonl(const std::string& path, const LabelSet& label_set,
                             Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open NLI file: " + path);
    NLILoadResult result;
    std::string line;
    int line_no = 0;
    auto intern = [&vocab](TokenSequence& seq) {
        for (size_t i = 0; i < seq.tokens.size(); ++i) seq.ids[i] = vocab.add(seq.tokens[i]);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError("jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.contains("sentence1") || !obj.contains("sentence2") ||
            !obj.contains("gold_label"))
            throw FormatError("jsonl line " + std::to_string(line_no) +
                              ": missing sentence1/sentence2/gold_label");
        std::string gold = obj["gold_label"].get<std::string>();
        if (gold == "-") {
            ++result.dropped;
            continue;
        }
        NLIExample ex;
        ex.label = parse_label(gold);
        label_set.index_of(ex.label);  // throws if outside the declared set
        ex.premise = tokenize(obj["sentence1"].get<std::string>(), vocab);
        ex.hypothesis = tokenize(obj["sentence2"].get<std::string>(), vocab);
        intern(ex.premise);
        intern(ex.hypothesis);
        result.examples.push_back(std::move(ex));
    }
    return result;
}

void write_nli_jsonl(const std::string& path, const std::vector<NLIExample>& examples) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    for (const NLIExample& ex : examples) {
        nlohmann::json obj;
        auto join = [](const std::vector<std::string>& ws) {
            std::string s;
            for (size_t i = 0; i < ws.size(); ++i) s += (i ? " " : "") + ws[i];
            return s;
        };
        obj["sentence1"] = join(ex.premise.tokens);
        obj["sentence2"] = join(ex.hypothesis.tokens);
        obj["gold_label"] = label_name(ex.label);
        out << obj.dump() << '\n';
    }
}

// ---- batching ----

PaddedBatch pad_batch(const std::vector<TokenSequence>& sequences, int pad_index) {
    if (sequences.empty()) throw ContractError("pad_batch: empty batch");
    int batch = static_cast<int>(sequences.size());
    int lmax = 0;
    for (const TokenSequence& s : sequences)
        lmax = std::max(lmax, static_cast<int>(s.length()));
    PaddedBatch pb;
    pb.ids = Tensor::full({batch, lmax}, static_cast<double>(pad_index));
    pb.mask = Tensor::zeros({batch, lmax});
    for (int b = 0; b < batch; ++b)
        for (size_t i = 0; i < sequences[static_cast<size_t>(b)].ids.size(); ++i) {
            pb.ids.mut(b, static_cast<int>(i)) =
                static_cast<double>(sequences[static_cast<size_t>(b)].ids[i]);
            pb.mask.mut(b, static_cast<int>(i)) = 1.0;
        }
    return pb;
}

}  // namespace synli
