#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdio>
#include <sstream>

#include "doctest.h"
#include "synli/data.hpp"
#include "synli/probes.hpp"

using namespace synli;

namespace {

bool is_contiguous_subsequence(const std::vector<std::string>& hyp,
                               const std::vector<std::string>& prem) {
    if (hyp.size() > prem.size()) return false;
    for (size_t start = 0; start + hyp.size() <= prem.size(); ++start) {
        bool ok = true;
        for (size_t i = 0; i < hyp.size(); ++i)
            if (prem[start + i] != hyp[i]) {
                ok = false;
                break;
            }
        if (ok) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("generate_probes balance and determinism") {
    std::vector<ProbeExample> probes = generate_probes(Lexicon::builtin(), 500, 11);
    CHECK(probes.size() == 3000);
    int per_cell[3][2] = {};
    int per_label[2] = {};
    for (const ProbeExample& p : probes) {
        per_cell[static_cast<int>(p.heuristic)][static_cast<int>(p.label)] += 1;
        per_label[static_cast<int>(p.label)] += 1;
    }
    for (int h = 0; h < 3; ++h)
        for (int l = 0; l < 2; ++l) CHECK(per_cell[h][l] == 500);
    CHECK(per_label[0] == 1500);
    CHECK(per_label[1] == 1500);

    std::vector<ProbeExample> again = generate_probes(Lexicon::builtin(), 500, 11);
    REQUIRE(again.size() == probes.size());
    for (size_t i = 0; i < probes.size(); ++i) {
        CHECK(again[i].premise == probes[i].premise);
        CHECK(again[i].hypothesis == probes[i].hypothesis);
        CHECK(again[i].label == probes[i].label);
    }
    std::vector<ProbeExample> other = generate_probes(Lexicon::builtin(), 500, 12);
    bool any_diff = false;
    for (size_t i = 0; i < probes.size() && !any_diff; ++i)
        any_diff = other[i].premise != probes[i].premise;
    CHECK(any_diff);

    CHECK_THROWS_AS(generate_probes(Lexicon::builtin(), 0, 1), ContractError);
}

TEST_CASE("template invariants hold mechanically") {
    for (const ProbeExample& p : generate_probes(Lexicon::builtin(), 200, 13)) {
        std::vector<std::string> prem = tokenize_words(p.premise);
        std::vector<std::string> hyp = tokenize_words(p.hypothesis);
        CAPTURE(p.premise);
        CAPTURE(p.hypothesis);
        switch (p.heuristic) {
            case HeuristicClass::LexicalOverlap:
                for (const std::string& w : hyp)
                    CHECK(std::find(prem.begin(), prem.end(), w) != prem.end());
                break;
            case HeuristicClass::Subsequence:
                CHECK(is_contiguous_subsequence(hyp, prem));
                break;
            case HeuristicClass::Constituent:
                // constituent-shaped fragment: a clause of the premise
                CHECK(is_contiguous_subsequence(hyp, prem));
                break;
        }
        // agent-patient swap keeps the bag of words but never the sentence
        if (p.template_id == "lo_swap") {
            CHECK(p.label == ProbeLabel::NonEntailment);
            CHECK(prem.size() == hyp.size());
            CHECK(p.premise != p.hypothesis);
        }
    }
}

TEST_CASE("lexicon validation") {
    Lexicon ok = Lexicon::builtin();
    CHECK_NOTHROW(ok.validate());
    Lexicon dup = Lexicon::builtin();
    dup.adverbs.push_back(dup.singular_nouns[0]);
    CHECK_THROWS_AS(dup.validate(), ContractError);
    Lexicon empty = Lexicon::builtin();
    empty.clause_markers.clear();
    CHECK_THROWS_AS(empty.validate(), ContractError);
}

TEST_CASE("relabel_binary collapse") {
    CHECK(relabel_binary(NLILabel::Entailment) == ProbeLabel::Entailment);
    CHECK(relabel_binary(NLILabel::Neutral) == ProbeLabel::NonEntailment);
    CHECK(relabel_binary(NLILabel::Contradiction) == ProbeLabel::NonEntailment);
}

TEST_CASE("probe arithmetic reproduces the published row") {
    // cells 93.4 / 89.1 / 90.3 (entailment) and 7.1 / 9.9 / 11.0 (non-entailment)
    const int correct[3][2] = {{934, 71}, {891, 99}, {903, 110}};
    std::vector<ProbeExample> probes;
    std::vector<ProbeLabel> preds;
    for (int h = 0; h < 3; ++h)
        for (int l = 0; l < 2; ++l)
            for (int i = 0; i < 1000; ++i) {
                ProbeExample p;
                p.heuristic = static_cast<HeuristicClass>(h);
                p.label = static_cast<ProbeLabel>(l);
                p.premise = "the judge saw the actor";
                p.hypothesis = "the actor saw the judge";
                probes.push_back(p);
                bool right = i < correct[h][l];
                preds.push_back(right ? p.label
                                      : (p.label == ProbeLabel::Entailment
                                             ? ProbeLabel::NonEntailment
                                             : ProbeLabel::Entailment));
            }
    ProbeReport r = tabulate_probe_results(probes, preds, "DA", "SciTail");
    CHECK(r.cells[0][0] == doctest::Approx(93.4));
    CHECK(r.cells[1][0] == doctest::Approx(89.1));
    CHECK(r.cells[2][0] == doctest::Approx(90.3));
    CHECK(r.cells[0][1] == doctest::Approx(7.1));
    CHECK(r.cells[1][1] == doctest::Approx(9.9));
    CHECK(r.cells[2][1] == doctest::Approx(11.0));
    CHECK(r.overall == doctest::Approx((93.4 + 89.1 + 90.3 + 7.1 + 9.9 + 11.0) / 6.0));

    std::string table = summarize_table({r});
    for (const char* cell : {"93.4", "89.1", "90.3", "7.1", "9.9", "11.0", "50.1"})
        CHECK(table.find(cell) != std::string::npos);
    // one header plus one data row
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
}

TEST_CASE("constant predictor scores exactly 50 on a balanced set") {
    std::vector<ProbeExample> probes = generate_probes(Lexicon::builtin(), 50, 21);
    std::vector<ProbeLabel> preds(probes.size(), ProbeLabel::Entailment);
    ProbeReport r = tabulate_probe_results(probes, preds, "const", "-");
    for (int h = 0; h < 3; ++h) {
        CHECK(r.cells[static_cast<size_t>(h)][0] == 100.0);
        CHECK(r.cells[static_cast<size_t>(h)][1] == 0.0);
    }
    CHECK(r.overall == 50.0);
}

TEST_CASE("tabulate rejects mismatches and empty cells") {
    std::vector<ProbeExample> probes = generate_probes(Lexicon::builtin(), 2, 3);
    std::vector<ProbeLabel> short_preds(probes.size() - 1, ProbeLabel::Entailment);
    CHECK_THROWS_AS(tabulate_probe_results(probes, short_preds, "m", "-"), ContractError);
    std::vector<ProbeExample> lop_only(probes.begin(), probes.begin() + 2);
    std::vector<ProbeLabel> preds(2, ProbeLabel::Entailment);
    CHECK_THROWS_AS(tabulate_probe_results(lop_only, preds, "m", "-"), ContractError);
}

TEST_CASE("summarize_table sorts rows by model name") {
    ProbeReport a;
    a.model_name = "zeta";
    a.train_data = "x";
    ProbeReport b;
    b.model_name = "alpha";
    b.train_data = "x";
    std::string table = summarize_table({a, b});
    CHECK(table.find("alpha") < table.find("zeta"));
    std::string tsv = summarize_table_tsv({a, b});
    CHECK(tsv.find("alpha") < tsv.find("zeta"));
    CHECK_THROWS_AS(summarize_table({}), ContractError);
}

TEST_CASE("probe jsonl round trip") {
    std::vector<ProbeExample> probes = generate_probes(Lexicon::builtin(), 5, 33);
    std::string path = "/tmp/synli_test_probes.jsonl";
    write_probes_jsonl(path, probes);
    std::vector<ProbeExample> loaded = load_probes_jsonl(path);
    REQUIRE(loaded.size() == probes.size());
    for (size_t i = 0; i < probes.size(); ++i) {
        CHECK(loaded[i].premise == probes[i].premise);
        CHECK(loaded[i].hypothesis == probes[i].hypothesis);
        CHECK(loaded[i].label == probes[i].label);
        CHECK(loaded[i].heuristic == probes[i].heuristic);
        CHECK(loaded[i].template_id == probes[i].template_id);
    }
    std::remove(path.c_str());
}
