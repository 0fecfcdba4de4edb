#pragma once

#include <vector>

#include "synli/data.hpp"
#include "synli/probes.hpp"

namespace synli {

// Template-grammar treebank over the probe lexicon: transitive clauses,
// intransitive clauses, and prepositional modifiers, with UD-style heads.
Treebank make_synthetic_treebank(const Lexicon& lexicon, int n_sentences, uint64_t seed,
                                 Vocabulary& vocab);

// Two-class task whose label is decided purely by subject/object order:
// premise "the A <verb> the B"; hypothesis either identical (entailment) or
// agent-patient swapped (neutral). Balanced.
std::vector<NLIExample> make_order_task(const Lexicon& lexicon, int n_pairs, uint64_t seed,
                                        Vocabulary& vocab);

struct SplitView {
    std::vector<NLIExample> train, dev, test;
};

// Deterministic 80/10/10 split (no shuffling; generation is already random).
SplitView split_dataset(const std::vector<NLIExample>& all);

// Random embeddings for a vocabulary, in place of pretrained vectors at desk
// scale. Pad row stays zero.
EmbeddingMatrix random_embeddings(const Vocabulary& vocab, int dim, uint64_t seed);

}  // namespace synli
