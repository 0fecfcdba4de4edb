#include "synli/probes.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace synli {

std::string heuristic_name(HeuristicClass h) {
    switch (h) {
        case HeuristicClass::LexicalOverlap: return "lexical_overlap";
        case HeuristicClass::Subsequence: return "subsequence";
        case HeuristicClass::Constituent: return "constituent";
    }
    return "?";
}

HeuristicClass parse_heuristic(const std::string& name) {
    if (name == "lexical_overlap") return HeuristicClass::LexicalOverlap;
    if (name == "subsequence") return HeuristicClass::Subsequence;
    if (name == "constituent") return HeuristicClass::Constituent;
    throw FormatError("unknown heuristic class '" + name + "'");
}

std::string probe_label_name(ProbeLabel l) {
    return l == ProbeLabel::Entailment ? "entailment" : "non-entailment";
}

Lexicon Lexicon::builtin() {
    Lexicon lx;
    lx.singular_nouns = {"judge", "actor",  "doctor",  "lawyer",  "senator",   "banker",
                         "artist", "student", "manager", "president", "athlete", "professor"};
    lx.plural_nouns = {"judges", "actors", "doctors", "lawyers", "senators", "bankers"};
    lx.transitive_verbs = {"saw", "admired", "helped", "called", "avoided", "advised"};
    lx.intransitive_verbs = {"slept", "danced", "smiled", "resigned", "arrived", "laughed"};
    lx.adverbs = {"quickly", "quietly", "clearly"};
    lx.clause_markers = {"if", "because", "then"};
    return lx;
}

void Lexicon::validate() const {
    const std::vector<const std::vector<std::string>*> lists = {
        &singular_nouns, &plural_nouns, &transitive_verbs,
        &intransitive_verbs, &adverbs, &clause_markers};
    for (const auto* l : lists)
        if (l->empty()) throw ContractError("lexicon: every role list must be non-empty");
    std::set<std::string> seen;
    for (const auto* l : lists)
        for (const std::string& w : *l)
            if (!seen.insert(w).second)
                throw ContractError("lexicon: word '" + w + "' appears in two role lists");
    if (singular_nouns.size() < 3 || intransitive_verbs.size() < 2)
        throw ContractError("lexicon too small to generate non-degenerate probes");
}

namespace {

std::string pick(const std::vector<std::string>& list, Rng& rng) {
    return list[rng.below(list.size())];
}

// two distinct nouns
std::pair<std::string, std::string> pick2(const std::vector<std::string>& list, Rng& rng) {
    std::string a = pick(list, rng);
    std::string b = pick(list, rng);
    int guard = 0;
    while (b == a) {
        b = pick(list, rng);
        if (++guard > 1000)
            throw ContractError("lexicon too small to avoid degenerate duplicates");
    }
    return {a, b};
}

}  // namespace

std::vector<ProbeExample> generate_probes(const Lexicon& lexicon, int n_per_cell, uint64_t seed) {
    if (n_per_cell < 1) throw ContractError("generate_probes: n_per_cell must be >= 1");
    lexicon.validate();
    Rng rng(seed);
    std::vector<ProbeExample> out;
    out.reserve(static_cast<size_t>(n_per_cell) * 6);

    auto emit = [&](HeuristicClass h, ProbeLabel l, const std::string& tid,
                    const std::string& premise, const std::string& hypothesis) {
        out.push_back({premise, hypothesis, l, h, tid});
    };

    for (int i = 0; i < n_per_cell; ++i) {
        // lexical overlap, entailment: drop a prepositional modifier
        {
            auto [n1, n2] = pick2(lexicon.singular_nouns, rng);
            std::string n3 = pick(lexicon.singular_nouns, rng);
            while (n3 == n1 || n3 == n2) n3 = pick(lexicon.singular_nouns, rng);
            std::string v = pick(lexicon.transitive_verbs, rng);
            emit(HeuristicClass::LexicalOverlap, ProbeLabel::Entailment, "lo_prep_strip",
                 "the " + n1 + " near the " + n2 + " " + v + " the " + n3,
                 "the " + n1 + " " + v + " the " + n3);
        }
        // lexical overlap, non-entailment: agent-patient swap
        {
            auto [n1, n2] = pick2(lexicon.singular_nouns, rng);
            std::string v = pick(lexicon.transitive_verbs, rng);
            emit(HeuristicClass::LexicalOverlap, ProbeLabel::NonEntailment, "lo_swap",
                 "the " + n1 + " " + v + " the " + n2, "the " + n2 + " " + v + " the " + n1);
        }
        // subsequence, entailment: conjunction drop
        {
            auto [n1, n2] = pick2(lexicon.singular_nouns, rng);
            std::string v = pick(lexicon.intransitive_verbs, rng);
            emit(HeuristicClass::Subsequence, ProbeLabel::Entailment, "sub_conj_drop",
                 "the " + n1 + " and the " + n2 + " " + v, "the " + n2 + " " + v);
        }
        // subsequence, non-entailment: the modifier noun is not the subject
        {
            auto [n1, n2] = pick2(lexicon.singular_nouns, rng);
            std::string v = pick(lexicon.intransitive_verbs, rng);
            emit(HeuristicClass::Subsequence, ProbeLabel::NonEntailment, "sub_np_modifier",
                 "the " + n1 + " near the " + n2 + " " + v, "the " + n2 + " " + v);
        }
        // constituent, entailment: because-clauses are presupposed
        {
            auto [n1, n2] = pick2(lexicon.singular_nouns, rng);
            std::string v1 = pick(lexicon.intransitive_verbs, rng);
            std::string v2 = pick(lexicon.intransitive_verbs, rng);
            emit(HeuristicClass::Constituent, ProbeLabel::Entailment, "const_because",
                 "the " + n2 + " " + v2 + " because the " + n1 + " " + v1,
                 "the " + n1 + " " + v1);
        }
        // constituent, non-entailment: clause embedded under "if"
        {
            auto [n1, n2] = pick2(lexicon.singular_nouns, rng);
            std::string v1 = pick(lexicon.intransitive_verbs, rng);
            std::string v2 = pick(lexicon.intransitive_verbs, rng);
            emit(HeuristicClass::Constituent, ProbeLabel::NonEntailment, "const_if",
                 "if the " + n1 + " " + v1 + " then the " + n2 + " " + v2,
                 "the " + n1 + " " + v1);
        }
    }
    return out;
}

ProbeLabel relabel_binary(NLILabel prediction) {
    switch (prediction) {
        case NLILabel::Entailment: return ProbeLabel::Entailment;
        case NLILabel::Contradiction:
        case NLILabel::Neutral: return ProbeLabel::NonEntailment;
    }
    throw ContractError("relabel_binary: unknown label");
}

ProbeReport tabulate_probe_results(const std::vector<ProbeExample>& probes,
                                   const std::vector<ProbeLabel>& predictions,
                                   const std::string& model_name, const std::string& train_data) {
    if (probes.size() != predictions.size())
        throw ContractError("tabulate_probe_results: prediction count mismatch");
    std::array<std::array<int, 2>, 3> total{};
    std::array<std::array<int, 2>, 3> correct{};
    for (size_t i = 0; i < probes.size(); ++i) {
        int h = static_cast<int>(probes[i].heuristic);
        int l = static_cast<int>(probes[i].label);
        total[static_cast<size_t>(h)][static_cast<size_t>(l)] += 1;
        if (predictions[i] == probes[i].label)
            correct[static_cast<size_t>(h)][static_cast<size_t>(l)] += 1;
    }
    ProbeReport report;
    report.model_name = model_name;
    report.train_data = train_data;
    double sum = 0.0;
    for (int h = 0; h < 3; ++h)
        for (int l = 0; l < 2; ++l) {
            if (total[static_cast<size_t>(h)][static_cast<size_t>(l)] == 0)
                throw ContractError("evaluate_probes: empty cell " +
                                    heuristic_name(static_cast<HeuristicClass>(h)) + "/" +
                                    probe_label_name(static_cast<ProbeLabel>(l)));
            double acc = 100.0 * correct[static_cast<size_t>(h)][static_cast<size_t>(l)] /
                         total[static_cast<size_t>(h)][static_cast<size_t>(l)];
            report.cells[static_cast<size_t>(h)][static_cast<size_t>(l)] = acc;
            sum += acc;
        }
    report.overall = sum / 6.0;
    return report;
}

ProbeReport evaluate_probes(const NLIModel& model, const ParserModel* frozen_parser,
                            const std::vector<ProbeExample>& probes, Rng* noise_rng,
                            const std::string& model_name, const std::string& train_data) {
    if (fusion_uses_swrs(model.fusion) && !frozen_parser)
        throw ContractError("evaluate_probes: SWR fusion mode needs the frozen parser");
    std::vector<ProbeLabel> predictions;
    predictions.reserve(probes.size());
    for (const ProbeExample& p : probes) {
        NLIExample ex;
        ex.premise = tokenize(p.premise, model.vocab);
        ex.hypothesis = tokenize(p.hypothesis, model.vocab);
        ex.label = NLILabel::Entailment;  // unused
        SwrPair swrs;
        const SwrPair* swr_ptr = nullptr;
        if (fusion_uses_swrs(model.fusion)) {
            TokenSequence pp = tokenize(p.premise, frozen_parser->vocab);
            TokenSequence hh = tokenize(p.hypothesis, frozen_parser->vocab);
            swrs.premise = extract_swrs(*frozen_parser, pp).vectors;
            swrs.hypothesis = extract_swrs(*frozen_parser, hh).vectors;
            swr_ptr = &swrs;
        }
        Tensor logits = nli_forward(model, ex, swr_ptr, false, noise_rng);
        int best = 0;
        for (int c = 1; c < logits.dim(0); ++c)
            if (logits.at(c) > logits.at(best)) best = c;
        NLILabel pred = model.label_set.labels[static_cast<size_t>(best)];
        predictions.push_back(relabel_binary(pred));
    }
    return tabulate_probe_results(probes, predictions, model_name, train_data);
}

namespace {

std::string fmt1(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << v;
    return os.str();
}

std::vector<const ProbeReport*> sorted_reports(const std::vector<ProbeReport>& reports) {
    if (reports.empty()) throw ContractError("summarize_table: no reports");
    std::vector<const ProbeReport*> order;
    for (const ProbeReport& r : reports) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const ProbeReport* a, const ProbeReport* b) {
        return a->model_name < b->model_name;
    });
    return order;
}

}  // namespace

std::string summarize_table(const std::vector<ProbeReport>& reports) {
    auto order = sorted_reports(reports);
    std::ostringstream os;
    os << "Model            Train        | Ent: Lex  Subseq Const | Non: Lex  Subseq Const | Avg\n";
    for (const ProbeReport* r : order) {
        std::ostringstream row;
        row << r->model_name;
        while (row.str().size() < 17) row << ' ';
        row << r->train_data;
        std::string head = row.str();
        while (head.size() < 30) head += ' ';
        os << head << "|";
        for (int l = 0; l < 2; ++l) {
            for (int h = 0; h < 3; ++h) {
                std::string cell = fmt1(r->cells[static_cast<size_t>(h)][static_cast<size_t>(l)]);
                os << ' ';
                for (size_t pad = cell.size(); pad < 6; ++pad) os << ' ';
                os << cell;
            }
            os << " |";
        }
        os << ' ' << fmt1(r->overall) << '\n';
    }
    return os.str();
}

std::string summarize_table_tsv(const std::vector<ProbeReport>& reports) {
    auto order = sorted_reports(reports);
    std::ostringstream os;
    os << "model\ttrain_data\tent_lexical\tent_subsequence\tent_constituent"
          "\tnon_lexical\tnon_subsequence\tnon_constituent\taverage\n";
    os.precision(17);
    for (const ProbeReport* r : order) {
        os << r->model_name << '\t' << r->train_data;
        for (int l = 0; l < 2; ++l)
            for (int h = 0; h < 3; ++h)
                os << '\t' << r->cells[static_cast<size_t>(h)][static_cast<size_t>(l)];
        os << '\t' << r->overall << '\n';
    }
    return os.str();
}

void write_probes_jsonl(const std::string& path, const std::vector<ProbeExample>& probes) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    for (const ProbeExample& p : probes) {
        nlohmann::json obj;
        obj["sentence1"] = p.premise;
        obj["sentence2"] = p.hypothesis;
        obj["gold_label"] = probe_label_name(p.label);
        obj["heuristic"] = heuristic_name(p.heuristic);
        obj["template"] = p.template_id;
        out << obj.dump() << '\n';
    }
}

std::vector<ProbeExample> load_probes_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open probes file: " + path);
    std::vector<ProbeExample> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError("probes line " + std::to_string(line_no) + ": " + e.what());
        }
        ProbeExample p;
        p.premise = obj.at("sentence1").get<std::string>();
        p.hypothesis = obj.at("sentence2").get<std::string>();
        std::string label = obj.at("gold_label").get<std::string>();
        if (label == "entailment")
            p.label = ProbeLabel::Entailment;
        else if (label == "non-entailment")
            p.label = ProbeLabel::NonEntailment;
        else
            throw FormatError("probes line " + std::to_string(line_no) + ": bad label '" +
                              label + "'");
        p.heuristic = parse_heuristic(obj.at("heuristic").get<std::string>());
        p.template_id = obj.value("template", "");
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace synli
