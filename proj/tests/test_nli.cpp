#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "model_check.hpp"
#include "synli/nli.hpp"
#include "synli/synthetic.hpp"

using namespace synli;

namespace {

EmbeddingMatrix tiny_embeddings(int dim = 6, uint64_t seed = 2) {
    Vocabulary vocab;
    for (const char* w : {"the", "judge", "saw", "actor", "slept", "dog", "runs"}) vocab.add(w);
    return random_embeddings(vocab, dim, seed);
}

DAConfig tiny_da() {
    DAConfig c;
    c.attend_hd = 7;
    c.compare_hd = 5;
    c.aggregate_hd = 6;
    c.attend_dropout = c.compare_dropout = c.aggregate_dropout = 0.2;
    return c;
}

ESIMConfig tiny_esim() {
    ESIMConfig c;
    c.encoder_hidden = 5;
    c.composition_hidden = 4;
    return c;
}

NLIExample example(const NLIModel& m, const std::vector<std::string>& p,
                   const std::vector<std::string>& h) {
    NLIExample ex;
    for (const std::string& w : p) {
        ex.premise.tokens.push_back(w);
        ex.premise.ids.push_back(m.vocab.lookup(w));
    }
    for (const std::string& w : h) {
        ex.hypothesis.tokens.push_back(w);
        ex.hypothesis.ids.push_back(m.vocab.lookup(w));
    }
    ex.label = NLILabel::Entailment;
    return ex;
}

SwrPair random_swrs(int lp, int lh, int d, uint64_t seed) {
    Rng rng(seed);
    return {Tensor::randn({lp, d}, rng), Tensor::randn({lh, d}, rng)};
}

// copy every parameter from src into dst (shapes must agree)
void copy_params(const NLIModel& src, NLIModel& dst) {
    auto a = src.parameters();
    auto b = dst.parameters();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].second.shape() == b[i].second.shape());
        b[i].second.data() = a[i].second.data();
    }
}

}  // namespace

TEST_CASE("fusion mode names and predicates") {
    for (FusionMode m : {FusionMode::Baseline, FusionMode::LateFusion,
                         FusionMode::SyntacticAttention, FusionMode::LateFusionNoise,
                         FusionMode::SyntacticAttentionNoise})
        CHECK(parse_fusion(fusion_name(m)) == m);
    CHECK_THROWS_AS(parse_fusion("bogus"), FormatError);
    CHECK(fusion_uses_swrs(FusionMode::LateFusion));
    CHECK(fusion_uses_noise(FusionMode::SyntacticAttentionNoise));
    CHECK(!fusion_uses_swrs(FusionMode::LateFusionNoise));
}

TEST_CASE("compute_attention hand example and additivity") {
    Tensor p = Tensor::from({1, 2}, {1, 2});
    Tensor h = Tensor::from({1, 2}, {3, 4});
    Tensor base = compute_attention(p, h, nullptr, nullptr, FusionMode::Baseline);
    CHECK(base.at(0, 0) == 11.0);

    Tensor sp = Tensor::from({1, 2}, {2, 1});
    Tensor sh = Tensor::from({1, 2}, {1, 1});
    Tensor sa = compute_attention(p, h, &sp, &sh, FusionMode::SyntacticAttention);
    CHECK(sa.at(0, 0) == 14.0);  // 11 + (2*1 + 1*1)

    // zero SWRs: bit-equal to baseline
    Tensor zp = Tensor::zeros({1, 2});
    Tensor zh = Tensor::zeros({1, 2});
    Tensor saz = compute_attention(p, h, &zp, &zh, FusionMode::SyntacticAttention);
    CHECK(saz.data() == base.data());

    // random instances: a_SA - a_base == swr_p . swr_h^T within 1e-12
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Tensor pp = Tensor::randn({3, 4}, rng);
        Tensor hh = Tensor::randn({5, 4}, rng);
        Tensor ssp = Tensor::randn({3, 6}, rng);
        Tensor ssh = Tensor::randn({5, 6}, rng);
        Tensor b = compute_attention(pp, hh, nullptr, nullptr, FusionMode::Baseline);
        Tensor s = compute_attention(pp, hh, &ssp, &ssh, FusionMode::SyntacticAttention);
        Tensor d = matmul(ssp, transpose(ssh));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(std::abs(s.at(i, j) - b.at(i, j) - d.at(i, j)) < 1e-12);
    }

    Tensor wrong_len = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(
        compute_attention(p, h, &wrong_len, &sh, FusionMode::SyntacticAttention), ContractError);
    CHECK_THROWS_AS(compute_attention(p, h, nullptr, nullptr, FusionMode::SyntacticAttention),
                    ContractError);
}

TEST_CASE("parameter accounting") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        DAConfig dc;
        dc.attend_hd = 3 + static_cast<int>(rng.below(20));
        dc.compare_hd = 3 + static_cast<int>(rng.below(20));
        dc.aggregate_hd = 3 + static_cast<int>(rng.below(20));
        int d_swr = 2 + static_cast<int>(rng.below(30));
        int64_t base = count_parameters(
            NLIModel::init_da(dc, FusionMode::Baseline, labels, em, 0, 1));
        int64_t sa = count_parameters(
            NLIModel::init_da(dc, FusionMode::SyntacticAttention, labels, em, d_swr, 1));
        int64_t lf = count_parameters(
            NLIModel::init_da(dc, FusionMode::LateFusion, labels, em, d_swr, 1));
        CHECK(sa - base == 0);
        CHECK(lf - base == 2LL * d_swr * dc.aggregate_hd);

        ESIMConfig ec;
        ec.encoder_hidden = 3 + static_cast<int>(rng.below(8));
        ec.composition_hidden = 3 + static_cast<int>(rng.below(8));
        int64_t ebase = count_parameters(
            NLIModel::init_esim(ec, FusionMode::Baseline, labels, em, 0, 1));
        int64_t esa = count_parameters(
            NLIModel::init_esim(ec, FusionMode::SyntacticAttention, labels, em, d_swr, 1));
        int64_t elf = count_parameters(
            NLIModel::init_esim(ec, FusionMode::LateFusion, labels, em, d_swr, 1));
        CHECK(esa - ebase == 0);
        CHECK(elf - ebase == 2LL * d_swr * ec.composition_hidden);
    }
    // d_swr=16, h1=8 -> delta 256
    DAConfig dc = tiny_da();
    dc.aggregate_hd = 8;
    int64_t base = count_parameters(NLIModel::init_da(dc, FusionMode::Baseline, labels, em, 0, 1));
    int64_t lf =
        count_parameters(NLIModel::init_da(dc, FusionMode::LateFusion, labels, em, 16, 1));
    CHECK(lf - base == 256);
    // noise variants match their SWR counterparts
    int64_t lfn =
        count_parameters(NLIModel::init_da(dc, FusionMode::LateFusionNoise, labels, em, 16, 1));
    CHECK(lfn == lf);
}

TEST_CASE("DA baseline is order-invariant, +SA is not") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    NLIModel base =
        NLIModel::init_da(tiny_da(), FusionMode::Baseline, labels, em, 0, 17);
    NLIExample fwd = example(base, {"the", "judge", "saw", "the", "actor"},
                             {"the", "actor", "slept"});
    NLIExample perm = example(base, {"actor", "the", "saw", "judge", "the"},
                              {"the", "actor", "slept"});
    Tensor lf = da_forward(base, fwd, nullptr, false, nullptr);
    CHECK(lf.shape() == Shape{3});
    Tensor lp = da_forward(base, perm, nullptr, false, nullptr);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(lf.at(c) - lp.at(c)) < 1e-9);

    NLIModel sa = NLIModel::init_da(tiny_da(), FusionMode::SyntacticAttention, labels, em, 4, 17);
    // position-dependent SWRs held fixed while tokens permute
    SwrPair swrs = random_swrs(5, 3, 4, 23);
    Tensor sf = da_forward(sa, fwd, &swrs, false, nullptr);
    Tensor sp = da_forward(sa, perm, &swrs, false, nullptr);
    double max_delta = 0;
    for (int c = 0; c < 3; ++c) max_delta = std::max(max_delta, std::abs(sf.at(c) - sp.at(c)));
    CHECK(max_delta > 1e-6);
}

TEST_CASE("ESIM baseline is order-sensitive") {
    EmbeddingMatrix em = tiny_embeddings();
    NLIModel m = NLIModel::init_esim(tiny_esim(), FusionMode::Baseline,
                                     LabelSet::three_class(), em, 0, 19);
    NLIExample fwd = example(m, {"the", "judge", "saw", "the", "actor"}, {"the", "actor", "slept"});
    NLIExample perm = example(m, {"actor", "the", "saw", "judge", "the"}, {"the", "actor", "slept"});
    Tensor a = esim_forward(m, fwd, nullptr, false, nullptr);
    CHECK(a.shape() == Shape{3});
    Tensor b = esim_forward(m, perm, nullptr, false, nullptr);
    double max_delta = 0;
    for (int c = 0; c < 3; ++c) max_delta = std::max(max_delta, std::abs(a.at(c) - b.at(c)));
    CHECK(max_delta > 0.0);
}

TEST_CASE("zero-SWR +SA logits are bit-equal to baseline") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    for (int arch = 0; arch < 2; ++arch) {
        NLIModel base, sa;
        if (arch == 0) {
            base = NLIModel::init_da(tiny_da(), FusionMode::Baseline, labels, em, 0, 29);
            sa = NLIModel::init_da(tiny_da(), FusionMode::SyntacticAttention, labels, em, 4, 30);
        } else {
            base = NLIModel::init_esim(tiny_esim(), FusionMode::Baseline, labels, em, 0, 29);
            sa = NLIModel::init_esim(tiny_esim(), FusionMode::SyntacticAttention, labels, em, 4, 30);
        }
        copy_params(base, sa);
        NLIExample ex = example(base, {"the", "judge", "saw", "the", "actor"},
                                {"the", "actor", "slept"});
        SwrPair zeros = {Tensor::zeros({5, 4}), Tensor::zeros({3, 4})};
        Tensor lb = nli_forward(base, ex, nullptr, false, nullptr);
        Tensor ls = nli_forward(sa, ex, &zeros, false, nullptr);
        CHECK(lb.data() == ls.data());
    }
}

TEST_CASE("late fusion widened columns: zero case and dimensions") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    DAConfig dc = tiny_da();
    NLIModel base = NLIModel::init_da(dc, FusionMode::Baseline, labels, em, 0, 41);
    NLIModel lf = NLIModel::init_da(dc, FusionMode::LateFusion, labels, em, 4, 42);
    CHECK(lf.classifier_input_dim() == base.classifier_input_dim() + 8);

    // align shared weights, zero the widened columns: logits must equal baseline
    auto a = base.parameters();
    auto b = lf.parameters();
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].first == "cls_w1") {
            int h1 = lf.classifier_hidden_dim();
            int in_base = base.classifier_input_dim();
            int in_lf = lf.classifier_input_dim();
            for (int r = 0; r < h1; ++r) {
                for (int c = 0; c < in_base; ++c)
                    b[i].second.data()[static_cast<size_t>(r * in_lf + c)] =
                        a[i].second.data()[static_cast<size_t>(r * in_base + c)];
                for (int c = in_base; c < in_lf; ++c)
                    b[i].second.data()[static_cast<size_t>(r * in_lf + c)] = 0.0;
            }
        } else {
            b[i].second.data() = a[i].second.data();
        }
    }
    NLIExample ex = example(base, {"the", "judge", "saw", "the", "actor"},
                            {"the", "actor", "slept"});
    SwrPair swrs = random_swrs(5, 3, 4, 55);
    Tensor lb = nli_forward(base, ex, nullptr, false, nullptr);
    Tensor ll = nli_forward(lf, ex, &swrs, false, nullptr);
    REQUIRE(lb.size() == ll.size());
    for (int c = 0; c < 3; ++c) CHECK(ll.at(c) == lb.at(c));
}

TEST_CASE("SWR contract errors") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    NLIModel base = NLIModel::init_da(tiny_da(), FusionMode::Baseline, labels, em, 0, 3);
    NLIModel sa = NLIModel::init_da(tiny_da(), FusionMode::SyntacticAttention, labels, em, 4, 3);
    NLIExample ex = example(base, {"the", "judge"}, {"the", "actor"});
    SwrPair swrs = random_swrs(2, 2, 4, 5);
    CHECK_THROWS_AS(nli_forward(base, ex, &swrs, false, nullptr), ContractError);  // unexpected
    CHECK_THROWS_AS(nli_forward(sa, ex, nullptr, false, nullptr), ContractError);  // missing
    SwrPair bad = random_swrs(3, 2, 4, 5);
    CHECK_THROWS_AS(nli_forward(sa, ex, &bad, false, nullptr), ContractError);  // length
    CHECK_THROWS_AS(NLIModel::init_da(tiny_da(), FusionMode::SyntacticAttention, labels, em, 0, 3),
                    ContractError);  // d_swr required
}

TEST_CASE("noise sampling statistics and determinism") {
    Rng rng(42);
    Tensor big = sample_noise_swr({1000, 100}, rng);
    double mean = 0, sq = 0;
    for (double v : big.data()) {
        mean += v;
        sq += v * v;
    }
    size_t n = big.size();
    mean /= static_cast<double>(n);
    double stddev = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(stddev - 1.0) < 0.02);

    Rng r1(7), r2(7);
    CHECK(sample_noise_swr({5, 3}, r1).data() == sample_noise_swr({5, 3}, r2).data());
    CHECK(sample_noise_swr({5, 3}, r1).size() == 15);
}

TEST_CASE("noise modes resample per forward unless pinned per example") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    NLIModel m = NLIModel::init_da(tiny_da(), FusionMode::SyntacticAttentionNoise, labels, em, 4, 3);
    NLIExample ex = example(m, {"the", "judge"}, {"the", "actor"});
    Rng rng(9);
    Tensor a = nli_forward(m, ex, nullptr, false, &rng);
    Tensor b = nli_forward(m, ex, nullptr, false, &rng);
    bool identical = a.data() == b.data();
    CHECK(!identical);
    CHECK_THROWS_AS(nli_forward(m, ex, nullptr, false, nullptr), ContractError);

    m.fixed_noise_per_example = true;
    Tensor c = nli_forward(m, ex, nullptr, false, nullptr);
    Tensor d = nli_forward(m, ex, nullptr, false, nullptr);
    CHECK(c.data() == d.data());
}

TEST_CASE("full-model gradient checks, every architecture x fusion mode") {
    EmbeddingMatrix em = tiny_embeddings();
    LabelSet labels = LabelSet::three_class();
    const FusionMode modes[] = {FusionMode::Baseline, FusionMode::LateFusion,
                                FusionMode::SyntacticAttention, FusionMode::LateFusionNoise,
                                FusionMode::SyntacticAttentionNoise};
    for (int arch = 0; arch < 2; ++arch) {
        for (FusionMode mode : modes) {
            int d_swr = mode == FusionMode::Baseline ? 0 : 3;
            NLIModel m;
            if (arch == 0)
                m = NLIModel::init_da(tiny_da(), mode, labels, em, d_swr, 61);
            else
                m = NLIModel::init_esim(tiny_esim(), mode, labels, em, d_swr, 61);
            m.fixed_noise_per_example = true;  // make noise draws a pure function of the input
            NLIExample ex1 = example(m, {"the", "judge", "saw", "the", "actor"},
                                     {"the", "actor", "slept"});
            NLIExample ex2 = example(m, {"the", "dog", "runs"}, {"the", "judge", "saw", "the", "dog"});
            ex2.label = NLILabel::Neutral;
            SwrPair s1 = random_swrs(5, 3, 3, 71);
            SwrPair s2 = random_swrs(3, 5, 3, 72);
            bool swr = fusion_uses_swrs(mode);
            auto loss_fn = [&] {
                Tensor l1 = nli_forward(m, ex1, swr ? &s1 : nullptr, false, nullptr);
                Tensor l2 = nli_forward(m, ex2, swr ? &s2 : nullptr, false, nullptr);
                Tensor logits = stack_rows({l1, l2});
                return cross_entropy_rows(logits, {labels.index_of(ex1.label),
                                                   labels.index_of(ex2.label)});
            };
            auto rep = synli_test::check_model_grads(loss_fn, m.parameter_tensors(), 1e-3, 1e-3);
            INFO("arch " << arch << " mode " << fusion_name(mode) << " max_rel_error "
                         << rep.max_rel_error);
            CHECK(rep.pass);
        }
    }
}
