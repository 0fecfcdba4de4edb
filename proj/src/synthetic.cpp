#include "synli/synthetic.hpp"

namespace synli {

namespace {

DepSentence make_sentence(const std::vector<std::string>& forms, const std::vector<int>& heads,
                          const std::vector<std::string>& rels, Treebank& tb, Vocabulary& vocab) {
    DepSentence s;
    for (const std::string& f : forms) {
        s.tokens.tokens.push_back(f);
        s.tokens.ids.push_back(vocab.add(f));
    }
    s.heads = heads;
    for (const std::string& r : rels) s.deprels.push_back(tb.deprels.add(r));
    return s;
}

std::string pick(const std::vector<std::string>& list, Rng& rng) {
    return list[rng.below(list.size())];
}

}  // namespace

Treebank make_synthetic_treebank(const Lexicon& lexicon, int n_sentences, uint64_t seed,
                                 Vocabulary& vocab) {
    lexicon.validate();
    Rng rng(seed);
    Treebank tb;
    // fixed label order regardless of draw order
    for (const char* r : {"det", "nsubj", "root", "obj", "case", "nmod"}) tb.deprels.add(r);
    for (int i = 0; i < n_sentences; ++i) {
        switch (rng.below(3)) {
            case 0: {  // the N1 V the N2
                std::string n1 = pick(lexicon.singular_nouns, rng);
                std::string n2 = pick(lexicon.singular_nouns, rng);
                std::string v = pick(lexicon.transitive_verbs, rng);
                tb.sentences.push_back(make_sentence({"the", n1, v, "the", n2},
                                                     {2, 3, 0, 5, 3},
                                                     {"det", "nsubj", "root", "det", "obj"},
                                                     tb, vocab));
                break;
            }
            case 1: {  // the N V
                std::string n = pick(lexicon.singular_nouns, rng);
                std::string v = pick(lexicon.intransitive_verbs, rng);
                tb.sentences.push_back(make_sentence({"the", n, v}, {2, 3, 0},
                                                     {"det", "nsubj", "root"}, tb, vocab));
                break;
            }
            default: {  // the N1 near the N2 V
                std::string n1 = pick(lexicon.singular_nouns, rng);
                std::string n2 = pick(lexicon.singular_nouns, rng);
                std::string v = pick(lexicon.intransitive_verbs, rng);
                tb.sentences.push_back(make_sentence(
                    {"the", n1, "near", "the", n2, v}, {2, 6, 5, 5, 2, 0},
                    {"det", "nsubj", "case", "det", "nmod", "root"}, tb, vocab));
                break;
            }
        }
    }
    return tb;
}

std::vector<NLIExample> make_order_task(const Lexicon& lexicon, int n_pairs, uint64_t seed,
                                        Vocabulary& vocab) {
    lexicon.validate();
    Rng rng(seed);
    std::vector<NLIExample> out;
    out.reserve(static_cast<size_t>(n_pairs));
    auto seq = [&](const std::vector<std::string>& words) {
        TokenSequence t;
        for (const std::string& w : words) {
            t.tokens.push_back(w);
            t.ids.push_back(vocab.add(w));
        }
        return t;
    };
    for (int i = 0; i < n_pairs; ++i) {
        std::string a = pick(lexicon.singular_nouns, rng);
        std::string b = pick(lexicon.singular_nouns, rng);
        while (b == a) b = pick(lexicon.singular_nouns, rng);
        std::string v = pick(lexicon.transitive_verbs, rng);
        NLIExample ex;
        ex.premise = seq({"the", a, v, "the", b});
        bool swap = (i % 2) == 1;  // exactly balanced
        ex.hypothesis = swap ? seq({"the", b, v, "the", a}) : seq({"the", a, v, "the", b});
        ex.label = swap ? NLILabel::Neutral : NLILabel::Entailment;
        out.push_back(std::move(ex));
    }
    return out;
}

SplitView split_dataset(const std::vector<NLIExample>& all) {
    SplitView sv;
    size_t n = all.size();
    size_t n_dev = n / 10;
    size_t n_test = n / 10;
    size_t n_train = n - n_dev - n_test;
    sv.train.assign(all.begin(), all.begin() + static_cast<long>(n_train));
    sv.dev.assign(all.begin() + static_cast<long>(n_train),
                  all.begin() + static_cast<long>(n_train + n_dev));
    sv.test.assign(all.begin() + static_cast<long>(n_train + n_dev), all.end());
    return sv;
}

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, int dim, uint64_t seed) {
    Rng rng(seed);
    EmbeddingMatrix em;
    em.vocab = vocab;
    em.dim = dim;
    em.vectors = Tensor::randn({vocab.size(), dim}, rng, 0.5);
    for (int j = 0; j < dim; ++j) em.vectors.mut(Vocabulary::kPad, j) = 0.0;
    return em;
}

}  // namespace synli
