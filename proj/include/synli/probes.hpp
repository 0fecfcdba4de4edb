#pragma once

#include <array>
#include <string>
#include <vector>

#include "synli/data.hpp"
#include "synli/nli.hpp"

namespace synli {

enum class HeuristicClass { LexicalOverlap = 0, Subsequence = 1, Constituent = 2 };

std::string heuristic_name(HeuristicClass h);
HeuristicClass parse_heuristic(const std::string& name);

enum class ProbeLabel { Entailment = 0, NonEntailment = 1 };

std::string probe_label_name(ProbeLabel l);

struct ProbeExample {
    std::string premise;
    std::string hypothesis;
    ProbeLabel label = ProbeLabel::Entailment;
    HeuristicClass heuristic = HeuristicClass::LexicalOverlap;
    std::string template_id;
};

struct Lexicon {
    std::vector<std::string> singular_nouns;
    std::vector<std::string> plural_nouns;
    std::vector<std::string> transitive_verbs;    // past tense
    std::vector<std::string> intransitive_verbs;  // past tense
    std::vector<std::string> adverbs;
    std::vector<std::string> clause_markers;  // "if", "because", ...

    static Lexicon builtin();
    void validate() const;  // non-empty, role-disjoint
};

// Exactly n_per_cell examples per (heuristic, label) cell, 6 cells total,
// deterministic per seed.
std::vector<ProbeExample> generate_probes(const Lexicon& lexicon, int n_per_cell, uint64_t seed);

// HANS-standard collapse of 3-way predictions.
ProbeLabel relabel_binary(NLILabel prediction);

struct ProbeReport {
    std::string model_name;
    std::string train_data;
    // [heuristic][label] accuracy in percent
    std::array<std::array<double, 2>, 3> cells{};
    double overall = 0.0;  // unweighted mean of the 6 cells
};

ProbeReport evaluate_probes(const NLIModel& model, const ParserModel* frozen_parser,
                            const std::vector<ProbeExample>& probes, Rng* noise_rng,
                            const std::string& model_name, const std::string& train_data);

// Assembles a cell report from raw predictions; exposed for arithmetic tests.
ProbeReport tabulate_probe_results(const std::vector<ProbeExample>& probes,
                                   const std::vector<ProbeLabel>& predictions,
                                   const std::string& model_name, const std::string& train_data);

// Aligned text table, Lexical/Subseq/Const per label plus the average, one
// decimal place. tsv variant is tab-separated with full precision.
std::string summarize_table(const std::vector<ProbeReport>& reports);
std::string summarize_table_tsv(const std::vector<ProbeReport>& reports);

// Probe JSONL round trip (NLI format plus "heuristic" and "template" fields).
void write_probes_jsonl(const std::string& path, const std::vector<ProbeExample>& probes);
std::vector<ProbeExample> load_probes_jsonl(const std::string& path);

}  // namespace synli
