#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "synli/harness.hpp"
#include "synli/probes.hpp"
#include "synli/synthetic.hpp"

namespace synli {

namespace {

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

double get_double(const ConfigMap& c, const std::string& sec, const std::string& key,
                  double dflt) {
    auto s = c.find(sec);
    if (s == c.end()) return dflt;
    auto k = s->second.find(key);
    return k == s->second.end() ? dflt : std::stod(k->second);
}

int get_int(const ConfigMap& c, const std::string& sec, const std::string& key, int dflt) {
    return static_cast<int>(get_double(c, sec, key, dflt));
}

std::string get_str(const ConfigMap& c, const std::string& sec, const std::string& key,
                    const std::string& dflt) {
    auto s = c.find(sec);
    if (s == c.end()) return dflt;
    auto k = s->second.find(key);
    return k == s->second.end() ? dflt : k->second;
}

ConfigMap load_base_config(const std::string& path, const std::vector<std::string>& sets) {
    ConfigMap config;
    if (!path.empty()) {
        std::string full = resolve_data_path(path);
        std::ifstream probe(full);
        if (!probe) throw UsageError("missing config file: " + full);
        config = load_config_file(full);
    }
    for (const std::string& s : sets) {
        size_t dot = s.find('.');
        size_t eq = s.find('=');
        if (dot == std::string::npos || eq == std::string::npos || dot > eq)
            throw UsageError("bad --set '" + s + "', expected section.key=value");
        config[s.substr(0, dot)][s.substr(dot + 1, eq - dot - 1)] = s.substr(eq + 1);
    }
    return config;
}

NLIModel::Arch parse_arch(const std::string& name) {
    if (name == "da") return NLIModel::Arch::DA;
    if (name == "esim") return NLIModel::Arch::ESIM;
    throw UsageError("unknown architecture '" + name + "' (expected da or esim)");
}

LabelSet classes_to_labels(int classes) {
    if (classes == 2) return LabelSet::two_class();
    if (classes == 3) return LabelSet::three_class();
    throw UsageError("--classes must be 2 or 3");
}

void remap_ids(std::vector<NLIExample>& examples, const Vocabulary& vocab) {
    auto fix = [&](TokenSequence& s) {
        for (size_t i = 0; i < s.tokens.size(); ++i) s.ids[i] = vocab.lookup(s.tokens[i]);
    };
    for (NLIExample& ex : examples) {
        fix(ex.premise);
        fix(ex.hypothesis);
    }
}

std::vector<NLIExample> load_split(const std::string& path, const LabelSet& labels,
                                   const Vocabulary& vocab) {
    Vocabulary scratch;
    NLILoadResult r = load_nli_jsonl(resolve_data_path(path), labels, scratch);
    remap_ids(r.examples, vocab);
    return std::move(r.examples);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << text;
}

void write_embeddings_file(const std::string& path, const EmbeddingMatrix& em) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.precision(17);
    for (int i = 2; i < em.vocab.size(); ++i) {  // pad/unk are implicit
        out << em.vocab.tokens[static_cast<size_t>(i)];
        for (int j = 0; j < em.dim; ++j) out << ' ' << em.vectors.at(i, j);
        out << '\n';
    }
}

// ---- subcommand option bags ----

struct CommonOpts {
    std::string config;
    std::vector<std::string> sets;
    uint64_t seed = 1;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config, "INI config file");
    sub->add_option("--set", o.sets, "override a config entry, section.key=value");
    sub->add_option("--seed", o.seed, "random seed");
}

int cmd_synth(const CommonOpts& common, const std::string& out_dir, int pairs, int sentences,
              int embed_dim) {
    ConfigMap config = load_base_config(common.config, common.sets);
    pairs = get_int(config, "synth", "pairs", pairs);
    sentences = get_int(config, "synth", "sentences", sentences);
    embed_dim = get_int(config, "synth", "embed_dim", embed_dim);

    Lexicon lexicon = Lexicon::builtin();
    Vocabulary vocab;
    Treebank tb = make_synthetic_treebank(lexicon, sentences, common.seed, vocab);
    std::vector<NLIExample> pairs_all = make_order_task(lexicon, pairs, common.seed + 1, vocab);
    SplitView sv = split_dataset(pairs_all);
    EmbeddingMatrix em = random_embeddings(vocab, embed_dim, common.seed + 2);

    write_conllu(out_dir + "/treebank.conllu", tb);
    write_nli_jsonl(out_dir + "/order_train.jsonl", sv.train);
    write_nli_jsonl(out_dir + "/order_dev.jsonl", sv.dev);
    write_nli_jsonl(out_dir + "/order_test.jsonl", sv.test);
    write_embeddings_file(out_dir + "/embeddings.txt", em);
    write_manifest(out_dir + "/manifest.txt", common.seed, write_ini(config), {});
    std::cout << "wrote " << tb.sentences.size() << " trees, " << sv.train.size() << "/"
              << sv.dev.size() << "/" << sv.test.size() << " pairs, " << vocab.size()
              << "-word vocabulary to " << out_dir << "\n";
    return 0;
}

int cmd_train_parser(const CommonOpts& common, const std::string& treebank_path,
                     const std::string& out, double lr, int epochs, bool no_freeze) {
    ConfigMap config = load_base_config(common.config, common.sets);
    lr = get_double(config, "train", "lr", lr);
    epochs = get_int(config, "train", "epochs", epochs);

    Vocabulary vocab;
    Treebank tb = load_conllu(resolve_data_path(treebank_path), vocab);
    if (tb.sentences.empty()) throw FormatError("empty treebank: " + treebank_path);
    ParserConfig pc = parser_config_from(config);
    pc.n_labels = tb.deprels.size();
    ParserModel model = ParserModel::init(pc, std::move(vocab), tb.deprels, common.seed);
    ParserTrainResult result = train_parser(model, tb.sentences, lr, epochs, common.seed);
    for (size_t e = 0; e < result.history.size(); ++e)
        std::printf("epoch %zu loss %.6f uas %.4f\n", e + 1, result.history[e].loss,
                    result.history[e].uas);
    model.frozen = !no_freeze;
    save_parser_checkpoint(model, out, common.seed,
                           static_cast<uint64_t>(result.history.size()));
    write_manifest(out + ".manifest", common.seed, write_ini(config),
                   {resolve_data_path(treebank_path)});
    return 0;
}

TrainOptions train_options_from(const ConfigMap& config, uint64_t seed) {
    TrainOptions o;
    o.lr = get_double(config, "train", "lr", o.lr);
    o.epochs = get_int(config, "train", "epochs", o.epochs);
    o.batch_size = get_int(config, "train", "batch_size", o.batch_size);
    o.patience = get_int(config, "train", "patience", o.patience);
    o.seed = seed;
    return o;
}

int cmd_train_nli(const CommonOpts& common, const std::string& train_path,
                  const std::string& dev_path, const std::string& embeddings_path, int embed_dim,
                  const std::string& arch_name, const std::string& fusion_name_arg, int classes,
                  const std::string& parser_path, const std::string& out) {
    ConfigMap config = load_base_config(common.config, common.sets);
    NLIModel::Arch arch = parse_arch(get_str(config, "model", "arch", arch_name));
    FusionMode fusion = parse_fusion(get_str(config, "model", "fusion", fusion_name_arg));
    LabelSet labels = classes_to_labels(get_int(config, "model", "classes", classes));
    embed_dim = get_int(config, "model", "embed_dim", embed_dim);

    EmbeddingMatrix em = load_embeddings(resolve_data_path(embeddings_path), embed_dim);
    std::optional<ParserModel> parser;
    if (!parser_path.empty()) parser = load_parser_checkpoint(resolve_data_path(parser_path));
    if (fusion_uses_swrs(fusion) && !parser)
        throw UsageError("--parser is required for fusion mode " + fusion_name(fusion));
    int d_swr = fusion == FusionMode::Baseline
                    ? 0
                    : (parser ? parser->config.swr_dim()
                              : get_int(config, "model", "d_swr", 0));
    if (fusion != FusionMode::Baseline && d_swr <= 0)
        throw UsageError("fusion mode " + fusion_name(fusion) +
                         " needs --parser or model.d_swr in the config");

    std::vector<NLIExample> train = load_split(train_path, labels, em.vocab);
    std::vector<NLIExample> dev = load_split(dev_path, labels, em.vocab);

    TrainOptions opts = train_options_from(config, common.seed);
    NLIModel model;
    if (arch == NLIModel::Arch::DA) {
        DAConfig dc = da_config_from(config);
        opts.lr = get_double(config, "train", "lr", dc.lr);
        model = NLIModel::init_da(dc, fusion, labels, em, d_swr, common.seed);
    } else {
        ESIMConfig ec = esim_config_from(config);
        opts.lr = get_double(config, "train", "lr", ec.lr);
        model = NLIModel::init_esim(ec, fusion, labels, em, d_swr, common.seed);
    }
    TrainHistory h = train_nli(model, train, dev, parser ? &*parser : nullptr, opts);
    for (size_t e = 0; e < h.epochs.size(); ++e)
        std::printf("epoch %zu loss %.6f dev_accuracy %.4f\n", e + 1, h.epochs[e].train_loss,
                    h.epochs[e].dev_accuracy);
    std::printf("best epoch %d dev_accuracy %.4f\n", h.best_epoch + 1, h.best_dev_accuracy);
    save_nli_checkpoint(model, out, common.seed, static_cast<uint64_t>(h.epochs.size()));
    std::vector<std::string> inputs = {resolve_data_path(train_path),
                                       resolve_data_path(dev_path),
                                       resolve_data_path(embeddings_path)};
    if (!parser_path.empty()) inputs.push_back(resolve_data_path(parser_path));
    write_manifest(out + ".manifest", common.seed, write_ini(config), inputs);
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& model_path,
             const std::string& data_path, const std::string& parser_path) {
    NLIModel model = load_nli_checkpoint(resolve_data_path(model_path));
    std::optional<ParserModel> parser;
    if (!parser_path.empty()) parser = load_parser_checkpoint(resolve_data_path(parser_path));
    if (fusion_uses_swrs(model.fusion) && !parser)
        throw UsageError("--parser is required for fusion mode " + fusion_name(model.fusion));
    std::vector<NLIExample> data = load_split(data_path, model.label_set, model.vocab);
    Rng noise_rng(common.seed);
    double acc = evaluate_accuracy(model, data, parser ? &*parser : nullptr, &noise_rng);
    std::printf("accuracy=%.4f\n", acc);
    return 0;
}

AblationTask make_ablation_task(const ConfigMap& config, const std::string& arch_name,
                                const LabelSet& labels, const EmbeddingMatrix& em,
                                const ParserModel& parser, uint64_t seed) {
    AblationTask task;
    task.arch = parse_arch(get_str(config, "model", "arch", arch_name));
    task.da = da_config_from(config);
    task.esim = esim_config_from(config);
    task.label_set = labels;
    task.embeddings = &em;
    task.frozen_parser = &parser;
    task.options = train_options_from(config, seed);
    task.options.lr = get_double(config, "train", "lr",
                                 task.arch == NLIModel::Arch::DA ? task.da.lr : task.esim.lr);
    return task;
}

int cmd_ablate(const CommonOpts& common, const std::string& arch_name,
               const std::string& train_path, const std::string& dev_path,
               const std::string& test_path, const std::string& embeddings_path, int embed_dim,
               int classes, const std::string& parser_path, const std::string& out) {
    ConfigMap config = load_base_config(common.config, common.sets);
    LabelSet labels = classes_to_labels(get_int(config, "model", "classes", classes));
    embed_dim = get_int(config, "model", "embed_dim", embed_dim);
    EmbeddingMatrix em = load_embeddings(resolve_data_path(embeddings_path), embed_dim);
    ParserModel parser = load_parser_checkpoint(resolve_data_path(parser_path));

    std::vector<NLIExample> train = load_split(train_path, labels, em.vocab);
    std::vector<NLIExample> dev = load_split(dev_path, labels, em.vocab);
    std::vector<NLIExample> test = load_split(test_path, labels, em.vocab);

    AblationTask task = make_ablation_task(config, arch_name, labels, em, parser, common.seed);
    task.train = &train;
    task.dev = &dev;
    task.test = &test;
    AblationResult result = ablation_suite(task, common.seed);
    std::cout << result.text();
    if (!out.empty()) {
        write_text_file(out, result.tsv());
        write_manifest(out + ".manifest", common.seed, write_ini(config),
                       {resolve_data_path(train_path), resolve_data_path(dev_path),
                        resolve_data_path(test_path), resolve_data_path(embeddings_path),
                        resolve_data_path(parser_path)});
    }
    return 0;
}

int cmd_search(const CommonOpts& common, const std::string& arch_name,
               const std::string& fusion_name_arg, const std::string& train_path,
               const std::string& dev_path, const std::string& embeddings_path, int embed_dim,
               int classes, const std::string& parser_path, int trials) {
    ConfigMap config = load_base_config(common.config, common.sets);
    SearchTask task;
    task.arch = parse_arch(get_str(config, "model", "arch", arch_name));
    task.fusion = parse_fusion(get_str(config, "model", "fusion", fusion_name_arg));
    task.label_set = classes_to_labels(get_int(config, "model", "classes", classes));
    embed_dim = get_int(config, "model", "embed_dim", embed_dim);
    trials = get_int(config, "search", "trials", trials);

    EmbeddingMatrix em = load_embeddings(resolve_data_path(embeddings_path), embed_dim);
    std::optional<ParserModel> parser;
    if (!parser_path.empty()) parser = load_parser_checkpoint(resolve_data_path(parser_path));
    if (task.fusion != FusionMode::Baseline && !parser)
        throw UsageError("--parser is required for fusion mode " + fusion_name(task.fusion));
    std::vector<NLIExample> train = load_split(train_path, task.label_set, em.vocab);
    std::vector<NLIExample> dev = load_split(dev_path, task.label_set, em.vocab);
    task.embeddings = &em;
    task.frozen_parser = parser ? &*parser : nullptr;
    task.train = &train;
    task.dev = &dev;
    task.options = train_options_from(config, common.seed);

    HyperparamSpace space = task.arch == NLIModel::Arch::DA ? HyperparamSpace::da_space()
                                                            : HyperparamSpace::esim_space();
    SearchResult result = random_search(space, trials, task, common.seed);
    for (size_t i = 0; i < result.trials.size(); ++i) {
        const Trial& t = result.trials[i];
        if (t.failed) {
            std::printf("trial %zu failed: %s\n", i + 1, t.error.c_str());
            continue;
        }
        std::printf("trial %zu dev_accuracy %.4f (%.1fs)", i + 1, t.dev_accuracy,
                    t.wall_seconds);
        for (const auto& [k, v] : t.config) std::printf(" %s=%g", k.c_str(), v);
        std::printf("\n");
    }
    if (result.best.dev_accuracy < 0) throw DivergenceError("all search trials failed");
    std::printf("best dev_accuracy %.4f", result.best.dev_accuracy);
    for (const auto& [k, v] : result.best.config) std::printf(" %s=%g", k.c_str(), v);
    std::printf("\n");
    return 0;
}

int cmd_probe_gen(const CommonOpts& common, const std::string& out, int n_per_cell) {
    ConfigMap config = load_base_config(common.config, common.sets);
    n_per_cell = get_int(config, "probes", "n_per_cell", n_per_cell);
    std::vector<ProbeExample> probes =
        generate_probes(Lexicon::builtin(), n_per_cell, common.seed);
    write_probes_jsonl(out, probes);
    write_manifest(out + ".manifest", common.seed, write_ini(config), {});
    std::cout << "wrote " << probes.size() << " probes to " << out << "\n";
    return 0;
}

int cmd_probe_eval(const CommonOpts& common, const std::string& model_path,
                   const std::string& probes_path, const std::string& parser_path,
                   const std::string& name, const std::string& train_data, bool tsv) {
    NLIModel model = load_nli_checkpoint(resolve_data_path(model_path));
    std::optional<ParserModel> parser;
    if (!parser_path.empty()) parser = load_parser_checkpoint(resolve_data_path(parser_path));
    if (fusion_uses_swrs(model.fusion) && !parser)
        throw UsageError("--parser is required for fusion mode " + fusion_name(model.fusion));
    std::vector<ProbeExample> probes = load_probes_jsonl(resolve_data_path(probes_path));
    Rng noise_rng(common.seed);
    ProbeReport report = evaluate_probes(model, parser ? &*parser : nullptr, probes, &noise_rng,
                                         name, train_data);
    std::cout << (tsv ? summarize_table_tsv({report}) : summarize_table({report}));
    return 0;
}

AblationResult read_ablation_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open report file: " + path);
    AblationResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("model\t", 0) == 0) continue;
        std::vector<std::string> cols;
        std::istringstream ls(line);
        std::string col;
        while (std::getline(ls, col, '\t')) cols.push_back(col);
        if (cols.size() != 5)
            throw FormatError(path + " line " + std::to_string(line_no) +
                              ": expected 5 tab-separated columns");
        EvalReport r;
        r.model_name = cols[0];
        r.fusion = parse_fusion(cols[1]);
        r.dev_accuracy = std::stod(cols[2]);
        r.test_accuracy = std::stod(cols[3]);
        result.reports.push_back(r);
    }
    if (result.reports.empty()) throw FormatError("no report rows in " + path);
    // deltas are always recomputed, never trusted from the file
    double base = result.reports[0].test_accuracy;
    for (EvalReport& r : result.reports) r.delta_vs_baseline = r.test_accuracy - base;
    return result;
}

int cmd_report(const std::vector<std::string>& ablation_files) {
    if (ablation_files.empty()) throw UsageError("report: give at least one --ablation TSV file");
    for (const std::string& path : ablation_files) {
        std::cout << path << ":\n" << read_ablation_tsv(resolve_data_path(path)).text() << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"syntax-aware NLI experiments"};
    app.require_subcommand(1);
    int rc = 0;
    auto run = [&rc](std::function<int()> f) { rc = f(); };

    {
        auto* sub = app.add_subcommand("synth", "generate the synthetic order task and treebank");
        auto common = std::make_shared<CommonOpts>();
        auto out_dir = std::make_shared<std::string>();
        auto pairs = std::make_shared<int>(2000);
        auto sentences = std::make_shared<int>(400);
        auto embed_dim = std::make_shared<int>(50);
        add_common(sub, *common);
        sub->add_option("--out-dir", *out_dir, "output directory")->required();
        sub->add_option("--pairs", *pairs, "number of NLI pairs");
        sub->add_option("--sentences", *sentences, "number of treebank sentences");
        sub->add_option("--embed-dim", *embed_dim, "embedding dimension");
        sub->callback([=] {
            run([&] { return cmd_synth(*common, *out_dir, *pairs, *sentences, *embed_dim); });
        });
    }
    {
        auto* sub = app.add_subcommand("train-parser", "train the biaffine dependency parser");
        auto common = std::make_shared<CommonOpts>();
        auto treebank = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto lr = std::make_shared<double>(2e-3);
        auto epochs = std::make_shared<int>(30);
        auto no_freeze = std::make_shared<bool>(false);
        add_common(sub, *common);
        sub->add_option("--treebank", *treebank, "CoNLL-U training file")->required();
        sub->add_option("--out", *out, "checkpoint output path")->required();
        sub->add_option("--lr", *lr, "learning rate");
        sub->add_option("--epochs", *epochs, "training epochs");
        sub->add_flag("--no-freeze", *no_freeze, "keep the saved parser trainable");
        sub->callback([=] {
            run([&] {
                return cmd_train_parser(*common, *treebank, *out, *lr, *epochs, *no_freeze);
            });
        });
    }
    {
        auto* sub = app.add_subcommand("train-nli", "train an NLI model");
        auto common = std::make_shared<CommonOpts>();
        auto train = std::make_shared<std::string>();
        auto dev = std::make_shared<std::string>();
        auto embeddings = std::make_shared<std::string>();
        auto embed_dim = std::make_shared<int>(50);
        auto arch = std::make_shared<std::string>("da");
        auto fusion = std::make_shared<std::string>("baseline");
        auto classes = std::make_shared<int>(3);
        auto parser = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        add_common(sub, *common);
        sub->add_option("--train", *train, "training JSONL")->required();
        sub->add_option("--dev", *dev, "development JSONL")->required();
        sub->add_option("--embeddings", *embeddings, "word embeddings text file")->required();
        sub->add_option("--embed-dim", *embed_dim, "embedding dimension");
        sub->add_option("--arch", *arch, "da or esim");
        sub->add_option("--fusion", *fusion, "baseline, lf, sa, lf_n, or sa_n");
        sub->add_option("--classes", *classes, "2 or 3");
        sub->add_option("--parser", *parser, "frozen parser checkpoint");
        sub->add_option("--out", *out, "checkpoint output path")->required();
        sub->callback([=] {
            run([&] {
                return cmd_train_nli(*common, *train, *dev, *embeddings, *embed_dim, *arch,
                                     *fusion, *classes, *parser, *out);
            });
        });
    }
    {
        auto* sub = app.add_subcommand("eval", "evaluate a checkpoint on a JSONL split");
        auto common = std::make_shared<CommonOpts>();
        auto model = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto parser = std::make_shared<std::string>();
        add_common(sub, *common);
        sub->add_option("--model", *model, "NLI checkpoint")->required();
        sub->add_option("--data", *data, "evaluation JSONL")->required();
        sub->add_option("--parser", *parser, "frozen parser checkpoint");
        sub->callback([=] { run([&] { return cmd_eval(*common, *model, *data, *parser); }); });
    }
    {
        auto* sub = app.add_subcommand("ablate", "run the five-mode fusion ablation");
        auto common = std::make_shared<CommonOpts>();
        auto arch = std::make_shared<std::string>("da");
        auto train = std::make_shared<std::string>();
        auto dev = std::make_shared<std::string>();
        auto test = std::make_shared<std::string>();
        auto embeddings = std::make_shared<std::string>();
        auto embed_dim = std::make_shared<int>(50);
        auto classes = std::make_shared<int>(3);
        auto parser = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        add_common(sub, *common);
        sub->add_option("--arch", *arch, "da or esim");
        sub->add_option("--train", *train, "training JSONL")->required();
        sub->add_option("--dev", *dev, "development JSONL")->required();
        sub->add_option("--test", *test, "test JSONL")->required();
        sub->add_option("--embeddings", *embeddings, "word embeddings text file")->required();
        sub->add_option("--embed-dim", *embed_dim, "embedding dimension");
        sub->add_option("--classes", *classes, "2 or 3");
        sub->add_option("--parser", *parser, "frozen parser checkpoint")->required();
        sub->add_option("--out", *out, "TSV output path");
        sub->callback([=] {
            run([&] {
                return cmd_ablate(*common, *arch, *train, *dev, *test, *embeddings, *embed_dim,
                                  *classes, *parser, *out);
            });
        });
    }
    {
        auto* sub = app.add_subcommand("search", "random hyperparameter search");
        auto common = std::make_shared<CommonOpts>();
        auto arch = std::make_shared<std::string>("da");
        auto fusion = std::make_shared<std::string>("baseline");
        auto train = std::make_shared<std::string>();
        auto dev = std::make_shared<std::string>();
        auto embeddings = std::make_shared<std::string>();
        auto embed_dim = std::make_shared<int>(50);
        auto classes = std::make_shared<int>(3);
        auto parser = std::make_shared<std::string>();
        auto trials = std::make_shared<int>(10);
        add_common(sub, *common);
        sub->add_option("--arch", *arch, "da or esim");
        sub->add_option("--fusion", *fusion, "baseline, lf, sa, lf_n, or sa_n");
        sub->add_option("--train", *train, "training JSONL")->required();
        sub->add_option("--dev", *dev, "development JSONL")->required();
        sub->add_option("--embeddings", *embeddings, "word embeddings text file")->required();
        sub->add_option("--embed-dim", *embed_dim, "embedding dimension");
        sub->add_option("--classes", *classes, "2 or 3");
        sub->add_option("--parser", *parser, "frozen parser checkpoint");
        sub->add_option("-k,--trials", *trials, "number of sampled configurations");
        sub->callback([=] {
            run([&] {
                return cmd_search(*common, *arch, *fusion, *train, *dev, *embeddings,
                                  *embed_dim, *classes, *parser, *trials);
            });
        });
    }
    {
        auto* sub = app.add_subcommand("probe-gen", "generate HANS-style probes");
        auto common = std::make_shared<CommonOpts>();
        auto out = std::make_shared<std::string>();
        auto n = std::make_shared<int>(25);
        add_common(sub, *common);
        sub->add_option("--out", *out, "probe JSONL output path")->required();
        sub->add_option("--n", *n, "examples per (heuristic, label) cell");
        sub->callback([=] { run([&] { return cmd_probe_gen(*common, *out, *n); }); });
    }
    {
        auto* sub = app.add_subcommand("probe-eval", "score a checkpoint on probes");
        auto common = std::make_shared<CommonOpts>();
        auto model = std::make_shared<std::string>();
        auto probes = std::make_shared<std::string>();
        auto parser = std::make_shared<std::string>();
        auto name = std::make_shared<std::string>("model");
        auto train_data = std::make_shared<std::string>("-");
        auto tsv = std::make_shared<bool>(false);
        add_common(sub, *common);
        sub->add_option("--model", *model, "NLI checkpoint")->required();
        sub->add_option("--probes", *probes, "probe JSONL")->required();
        sub->add_option("--parser", *parser, "frozen parser checkpoint");
        sub->add_option("--name", *name, "row label in the report");
        sub->add_option("--train-data", *train_data, "training-data label in the report");
        sub->add_flag("--tsv", *tsv, "emit TSV instead of the aligned table");
        sub->callback([=] {
            run([&] {
                return cmd_probe_eval(*common, *model, *probes, *parser, *name, *train_data,
                                      *tsv);
            });
        });
    }
    {
        auto* sub = app.add_subcommand("report", "render ablation TSVs as aligned tables");
        auto files = std::make_shared<std::vector<std::string>>();
        sub->add_option("--ablation", *files, "ablation TSV file(s)");
        sub->callback([=] { run([&] { return cmd_report(*files); }); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}

}  // namespace synli
