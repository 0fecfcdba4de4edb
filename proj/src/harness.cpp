#include "synli/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace synli {

// ---- config files ----

ConfigMap parse_ini(const std::string& text) {
    ConfigMap config;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    auto trim = [](std::string s) {
        size_t b = s.find_first_not_of(" \t\r");
        size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw FormatError("config line " + std::to_string(line_no) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            config[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) + ": expected key=value");
        config[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return config;
}

std::string write_ini(const ConfigMap& config) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [section, entries] : config) {
        if (!first) os << '\n';
        first = false;
        os << '[' << section << "]\n";
        for (const auto& [key, value] : entries) os << key << " = " << value << '\n';
    }
    return os.str();
}

ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_ini(buf.str());
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double get_double(const ConfigMap& c, const std::string& sec, const std::string& key, double dflt) {
    auto s = c.find(sec);
    if (s == c.end()) return dflt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return dflt;
    return std::stod(k->second);
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

}  // namespace

DAConfig da_config_from(const ConfigMap& c) {
    DAConfig d;
    d.lr = get_double(c, "da", "lr", d.lr);
    d.attend_hd = get_int(c, "da", "attend_hd", d.attend_hd);
    d.compare_hd = get_int(c, "da", "compare_hd", d.compare_hd);
    d.aggregate_hd = get_int(c, "da", "aggregate_hd", d.aggregate_hd);
    d.attend_dropout = get_double(c, "da", "attend_dropout", d.attend_dropout);
    d.compare_dropout = get_double(c, "da", "compare_dropout", d.compare_dropout);
    d.aggregate_dropout = get_double(c, "da", "aggregate_dropout", d.aggregate_dropout);
    return d;
}

ESIMConfig esim_config_from(const ConfigMap& c) {
    ESIMConfig e;
    e.lr = get_double(c, "esim", "lr", e.lr);
    e.encoder_hidden = get_int(c, "esim", "encoder_hidden", e.encoder_hidden);
    e.composition_hidden = get_int(c, "esim", "composition_hidden", e.composition_hidden);
    e.model_dropout = get_double(c, "esim", "model_dropout", e.model_dropout);
    e.output_dropout = get_double(c, "esim", "output_dropout", e.output_dropout);
    return e;
}

ParserConfig parser_config_from(const ConfigMap& c) {
    ParserConfig p;
    p.embed_dim = get_int(c, "parser", "embed_dim", p.embed_dim);
    p.encoder_hidden = get_int(c, "parser", "encoder_hidden", p.encoder_hidden);
    p.encoder_layers = get_int(c, "parser", "encoder_layers", p.encoder_layers);
    p.arc_mlp_dim = get_int(c, "parser", "arc_mlp_dim", p.arc_mlp_dim);
    p.label_mlp_dim = get_int(c, "parser", "label_mlp_dim", p.label_mlp_dim);
    p.n_labels = get_int(c, "parser", "n_labels", p.n_labels);
    p.dropout = get_double(c, "parser", "dropout", p.dropout);
    return p;
}

// ---- SWR cache ----

Tensor SwrCache::get_sentence(const TokenSequence& sentence) {
    // NLI example ids index the embedding vocabulary, not the parser's, so
    // re-look tokens up before encoding
    TokenSequence mapped;
    mapped.tokens = sentence.tokens;
    for (const std::string& t : sentence.tokens) mapped.ids.push_back(parser_->vocab.lookup(t));
    auto it = cache_.find(mapped.ids);
    if (it != cache_.end()) return it->second;
    Tensor swr = extract_swrs(*parser_, mapped).vectors;
    cache_.emplace(mapped.ids, swr);
    return swr;
}

SwrPair SwrCache::get(const NLIExample& example) {
    return {get_sentence(example.premise), get_sentence(example.hypothesis)};
}

// ---- training ----

namespace {

int predict_class(const Tensor& logits) {
    int best = 0;
    for (int c = 1; c < logits.dim(0); ++c)
        if (logits.at(c) > logits.at(best)) best = c;  // ties go to the lower index
    return best;
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const Tensor& p : params) out.push_back(p.data());
    return out;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
    for (size_t i = 0; i < params.size(); ++i) params[i].data() = snap[i];
}

}  // namespace

double evaluate_accuracy(const NLIModel& model, const std::vector<NLIExample>& split,
                         const ParserModel* frozen_parser, Rng* noise_rng) {
    if (split.empty()) throw ContractError("evaluate_accuracy: empty split");
    std::optional<SwrCache> cache;
    if (fusion_uses_swrs(model.fusion)) {
        if (!frozen_parser) throw ContractError("evaluate_accuracy: missing frozen parser");
        cache.emplace(*frozen_parser);
    }
    int correct = 0;
    for (const NLIExample& ex : split) {
        SwrPair swrs;
        const SwrPair* swr_ptr = nullptr;
        if (cache) {
            swrs = cache->get(ex);
            swr_ptr = &swrs;
        }
        Tensor logits = nli_forward(model, ex, swr_ptr, false, noise_rng);
        if (predict_class(logits) == model.label_set.index_of(ex.label)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

TrainHistory train_nli(NLIModel& model, const std::vector<NLIExample>& train,
                       const std::vector<NLIExample>& dev, const ParserModel* frozen_parser,
                       const TrainOptions& options) {
    if (train.empty()) throw ContractError("train_nli: empty training set");
    for (const NLIExample& ex : train) model.label_set.index_of(ex.label);
    for (const NLIExample& ex : dev) model.label_set.index_of(ex.label);

    Rng rng(options.seed);
    Rng forward_rng = rng.fork();  // dropout + noise draws
    std::optional<SwrCache> cache;
    if (fusion_uses_swrs(model.fusion)) {
        if (!frozen_parser) throw ContractError("train_nli: missing frozen parser");
        cache.emplace(*frozen_parser);
    }
    std::vector<Tensor> params = model.parameter_tensors();
    AdamState adam;
    TrainHistory history;
    std::vector<std::vector<double>> best_params = snapshot(params);
    int epochs_since_best = 0;
    int64_t step = 0;

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(options.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(options.batch_size));
            Tape tape;
            Tensor total;
            for (size_t i = start; i < end; ++i) {
                const NLIExample& ex = train[order[i]];
                SwrPair swrs;
                const SwrPair* swr_ptr = nullptr;
                if (cache) {
                    swrs = cache->get(ex);
                    swr_ptr = &swrs;
                }
                Tensor logits = nli_forward(model, ex, swr_ptr, true, &forward_rng);
                Tensor loss = cross_entropy_rows(reshape(logits, {1, logits.dim(0)}),
                                                 {model.label_set.index_of(ex.label)});
                total = total.defined() ? add(total, loss) : loss;
            }
            Tensor loss = scale(total, 1.0 / static_cast<double>(end - start));
            ++step;
            if (!std::isfinite(loss.value()))
                throw DivergenceError("train_nli: non-finite loss at step " + std::to_string(step));
            for (Tensor& p : params) p.zero_grad();
            tape.backward(loss);
            for (Tensor& p : params) p.grad();
            adam_step(params, adam, options.lr);
            epoch_loss += loss.value() * static_cast<double>(end - start);
        }
        EpochStats stats;
        stats.train_loss = epoch_loss / static_cast<double>(train.size());
        if (!dev.empty()) {
            Rng eval_rng = rng.fork();
            stats.dev_accuracy = evaluate_accuracy(model, dev, frozen_parser, &eval_rng);
            if (history.best_epoch < 0 || stats.dev_accuracy > history.best_dev_accuracy) {
                history.best_dev_accuracy = stats.dev_accuracy;
                history.best_epoch = epoch;
                best_params = snapshot(params);
                epochs_since_best = 0;
            } else {
                ++epochs_since_best;
            }
        }
        history.epochs.push_back(stats);
        if (!dev.empty() && epochs_since_best > options.patience) break;
    }
    if (!dev.empty() && history.best_epoch >= 0) restore(params, best_params);
    return history;
}

// ---- random search ----

HyperparamSpace HyperparamSpace::da_space() {
    // learning-rate range read as log10(lr) uniform on [-6, 0]
    return {{
        {"lr", 1e-6, 1.0, true, false},
        {"attend_hd", 100, 300, false, true},
        {"compare_hd", 100, 400, false, true},
        {"aggregate_hd", 100, 400, false, true},
        {"attend_dropout", 0.2, 0.7, false, false},
        {"compare_dropout", 0.2, 0.7, false, false},
        {"aggregate_dropout", 0.2, 0.7, false, false},
    }};
}

HyperparamSpace HyperparamSpace::esim_space() {
    // learning-rate range read as log10(lr) uniform on [-4, -1]
    return {{
        {"lr", 1e-4, 1e-1, true, false},
        {"model_dropout", 0.2, 0.7, false, false},
        {"output_dropout", 0.2, 0.7, false, false},
    }};
}

double sample_field(const HyperparamField& field, Rng& rng) {
    if (field.lo >= field.hi) throw ContractError("sample_field: degenerate range for " + field.name);
    double v;
    if (field.log_uniform) {
        if (field.lo <= 0.0)
            throw ContractError("sample_field: log-uniform needs a positive range");
        v = std::exp(rng.uniform(std::log(field.lo), std::log(field.hi)));
    } else {
        v = rng.uniform(field.lo, field.hi);
    }
    if (field.integer) v = std::floor(v + 0.5);
    return v;
}

std::map<std::string, double> sample_space(const HyperparamSpace& space, Rng& rng) {
    std::map<std::string, double> out;
    for (const HyperparamField& f : space.fields) out[f.name] = sample_field(f, rng);
    return out;
}

namespace {

DAConfig da_from_sample(const std::map<std::string, double>& s, const DAConfig& base) {
    DAConfig d = base;
    auto get = [&](const char* k, double dflt) {
        auto it = s.find(k);
        return it == s.end() ? dflt : it->second;
    };
    d.lr = get("lr", d.lr);
    d.attend_hd = static_cast<int>(get("attend_hd", d.attend_hd));
    d.compare_hd = static_cast<int>(get("compare_hd", d.compare_hd));
    d.aggregate_hd = static_cast<int>(get("aggregate_hd", d.aggregate_hd));
    d.attend_dropout = get("attend_dropout", d.attend_dropout);
    d.compare_dropout = get("compare_dropout", d.compare_dropout);
    d.aggregate_dropout = get("aggregate_dropout", d.aggregate_dropout);
    return d;
}

ESIMConfig esim_from_sample(const std::map<std::string, double>& s, const ESIMConfig& base) {
    ESIMConfig e = base;
    auto get = [&](const char* k, double dflt) {
        auto it = s.find(k);
        return it == s.end() ? dflt : it->second;
    };
    e.lr = get("lr", e.lr);
    e.model_dropout = get("model_dropout", e.model_dropout);
    e.output_dropout = get("output_dropout", e.output_dropout);
    return e;
}

}  // namespace

SearchResult random_search(const HyperparamSpace& space, int k, const SearchTask& task,
                           uint64_t seed) {
    if (k < 1) throw ContractError("random_search: k must be >= 1");
    if (!task.embeddings || !task.train || !task.dev)
        throw ContractError("random_search: task is missing embeddings or data");
    Rng rng(seed);
    SearchResult result;
    int best_index = -1;
    for (int i = 0; i < k; ++i) {
        Trial trial;
        trial.seed = rng.next_u64();
        trial.config = sample_space(space, rng);
        auto t0 = std::chrono::steady_clock::now();
        try {
            int d_swr = task.fusion == FusionMode::Baseline
                            ? 0
                            : (task.frozen_parser ? task.frozen_parser->config.swr_dim() : 0);
            NLIModel model;
            TrainOptions opts = task.options;
            if (task.arch == NLIModel::Arch::DA) {
                DAConfig cfg = da_from_sample(trial.config, DAConfig{});
                opts.lr = cfg.lr;
                model = NLIModel::init_da(cfg, task.fusion, task.label_set, *task.embeddings,
                                          d_swr, trial.seed);
            } else {
                ESIMConfig cfg = esim_from_sample(trial.config, ESIMConfig{});
                opts.lr = cfg.lr;
                model = NLIModel::init_esim(cfg, task.fusion, task.label_set, *task.embeddings,
                                            d_swr, trial.seed);
            }
            opts.seed = trial.seed;
            TrainHistory h = train_nli(model, *task.train, *task.dev, task.frozen_parser, opts);
            trial.dev_accuracy = h.best_dev_accuracy;
        } catch (const std::exception& e) {
            trial.failed = true;
            trial.error = e.what();
        }
        trial.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.trials.push_back(trial);
        if (!trial.failed &&
            (best_index < 0 || trial.dev_accuracy > result.trials[static_cast<size_t>(best_index)]
                                                        .dev_accuracy))
            best_index = i;
    }
    if (best_index >= 0) result.best = result.trials[static_cast<size_t>(best_index)];
    return result;
}

// ---- ablation suite ----

namespace {

std::string arch_name(NLIModel::Arch arch) {
    return arch == NLIModel::Arch::DA ? "DA" : "ESIM";
}

std::string mode_suffix(FusionMode m) {
    switch (m) {
        case FusionMode::Baseline: return "";
        case FusionMode::LateFusion: return "+LF";
        case FusionMode::SyntacticAttention: return "+SA";
        case FusionMode::LateFusionNoise: return "+LF_N";
        case FusionMode::SyntacticAttentionNoise: return "+SA_N";
    }
    return "";
}

}  // namespace

AblationResult ablation_suite(const AblationTask& task, uint64_t seed) {
    if (!task.embeddings || !task.train || !task.dev || !task.test)
        throw ContractError("ablation_suite: task is missing embeddings or data");
    if (!task.frozen_parser) throw ContractError("ablation_suite: frozen parser required");
    const FusionMode modes[] = {FusionMode::Baseline, FusionMode::LateFusion,
                                FusionMode::SyntacticAttention, FusionMode::LateFusionNoise,
                                FusionMode::SyntacticAttentionNoise};
    int d_swr = task.frozen_parser->config.swr_dim();
    AblationResult result;
    for (FusionMode mode : modes) {
        NLIModel model;
        TrainOptions opts = task.options;
        // noise variants reuse the SWR variant's configuration; here all five
        // share one matched config so only the representation differs
        if (task.arch == NLIModel::Arch::DA) {
            opts.lr = task.da.lr;
            model = NLIModel::init_da(task.da, mode, task.label_set, *task.embeddings,
                                      mode == FusionMode::Baseline ? 0 : d_swr, seed);
        } else {
            opts.lr = task.esim.lr;
            model = NLIModel::init_esim(task.esim, mode, task.label_set, *task.embeddings,
                                        mode == FusionMode::Baseline ? 0 : d_swr, seed);
        }
        opts.seed = seed;
        train_nli(model, *task.train, *task.dev, task.frozen_parser, opts);
        Rng dev_rng(seed ^ 0x5eedULL);
        Rng test_rng(seed ^ 0x7e57ULL);
        EvalReport report;
        report.model_name = arch_name(task.arch) + mode_suffix(mode);
        report.fusion = mode;
        report.dev_accuracy = evaluate_accuracy(model, *task.dev, task.frozen_parser, &dev_rng);
        report.test_accuracy = evaluate_accuracy(model, *task.test, task.frozen_parser, &test_rng);
        result.reports.push_back(report);
    }
    double base = result.reports[0].test_accuracy;
    for (EvalReport& r : result.reports) r.delta_vs_baseline = r.test_accuracy - base;
    return result;
}

std::string AblationResult::tsv() const {
    std::ostringstream os;
    os << "model\tfusion\tdev_accuracy\ttest_accuracy\tdelta_vs_baseline\n";
    os.precision(17);
    for (const EvalReport& r : reports)
        os << r.model_name << '\t' << fusion_name(r.fusion) << '\t' << r.dev_accuracy << '\t'
           << r.test_accuracy << '\t' << r.delta_vs_baseline << '\n';
    return os.str();
}

std::string AblationResult::text() const {
    std::ostringstream os;
    os << "Model        Dev    Test   Delta\n";
    os.setf(std::ios::fixed);
    os.precision(1);
    for (const EvalReport& r : reports) {
        std::string name = r.model_name;
        while (name.size() < 12) name += ' ';
        os << name << ' ' << 100.0 * r.dev_accuracy << "   " << 100.0 * r.test_accuracy << "   "
           << (r.delta_vs_baseline >= 0 ? "+" : "") << 100.0 * r.delta_vs_baseline << '\n';
    }
    return os.str();
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'S', 'Y', 'N', 'L', 'C', 'K', 'P', 'T'};

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    std::string bytes;
    size_t pos = 0;
    std::string path;

    void need(size_t n) const {
        if (pos + n > bytes.size())
            throw FormatError("truncated checkpoint file: " + path);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(
            (static_cast<unsigned char>(bytes[pos])) |
            (static_cast<unsigned char>(bytes[pos + 1]) << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + static_cast<size_t>(i)]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + static_cast<size_t>(i)]))
                 << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
    put_u16(out, static_cast<uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.rank()));
    for (int d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
    put_u64(out, t.size());
    for (double v : t.data()) put_f64(out, v);
}

std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
    return s;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::string checkpoint_bytes(const std::string& kind, const ConfigMap& config,
                             const std::vector<std::pair<std::string, Tensor>>& tensors,
                             uint64_t seed, uint64_t steps) {
    std::string out(kMagic, 8);
    put_u32(out, kCheckpointVersion);
    put_u16(out, static_cast<uint16_t>(kind.size()));
    out += kind;
    std::string config_text = write_ini(config);
    put_u32(out, static_cast<uint32_t>(config_text.size()));
    out += config_text;
    put_u64(out, seed);
    put_u64(out, steps);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) put_tensor(out, name, t);
    return out;
}

struct LoadedCheckpoint {
    std::string kind;
    ConfigMap config;
    std::vector<std::pair<std::string, Tensor>> tensors;
    uint64_t seed = 0;
    uint64_t steps = 0;
};

LoadedCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    Reader r;
    r.bytes = buf.str();
    r.path = path;
    if (r.str(8) != std::string(kMagic, 8))
        throw FormatError("not a checkpoint file: " + path);
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint version mismatch in " + path + ": got " +
                          std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
    LoadedCheckpoint ck;
    ck.kind = r.str(r.u16());
    ck.config = parse_ini(r.str(r.u32()));
    ck.seed = r.u64();
    ck.steps = r.u64();
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str(r.u16());
        r.need(1);
        int rank = static_cast<unsigned char>(r.bytes[r.pos]);
        ++r.pos;
        Shape shape;
        for (int d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
        uint64_t count = r.u64();
        if (count != shape_numel(shape))
            throw FormatError("corrupt tensor record '" + name + "' in " + path);
        std::vector<double> values(count);
        for (uint64_t j = 0; j < count; ++j) values[j] = r.f64();
        ck.tensors.emplace_back(name, Tensor::from(shape, std::move(values)));
    }
    if (r.pos != r.bytes.size())
        throw FormatError("trailing bytes in checkpoint file: " + path);
    return ck;
}

void fill_parameters(std::vector<std::pair<std::string, Tensor>> target,
                     const std::vector<std::pair<std::string, Tensor>>& loaded,
                     const std::string& path) {
    if (target.size() != loaded.size())
        throw FormatError("checkpoint tensor count mismatch in " + path);
    for (size_t i = 0; i < target.size(); ++i) {
        if (target[i].first != loaded[i].first)
            throw FormatError("unexpected tensor '" + loaded[i].first + "' in " + path +
                              " (wanted '" + target[i].first + "')");
        if (target[i].second.shape() != loaded[i].second.shape())
            throw FormatError("shape mismatch for tensor '" + loaded[i].first + "' in " + path +
                              ": " + shape_str(loaded[i].second.shape()) + " vs " +
                              shape_str(target[i].second.shape()));
        target[i].second.data() = loaded[i].second.data();
    }
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::string serialize_parameters(const std::vector<std::pair<std::string, Tensor>>& params) {
    std::string out;
    for (const auto& [name, t] : params) put_tensor(out, name, t);
    return out;
}

void save_parser_checkpoint(const ParserModel& model, const std::string& path, uint64_t seed,
                            uint64_t steps) {
    ConfigMap c;
    c["parser"]["embed_dim"] = std::to_string(model.config.embed_dim);
    c["parser"]["encoder_hidden"] = std::to_string(model.config.encoder_hidden);
    c["parser"]["encoder_layers"] = std::to_string(model.config.encoder_layers);
    c["parser"]["arc_mlp_dim"] = std::to_string(model.config.arc_mlp_dim);
    c["parser"]["label_mlp_dim"] = std::to_string(model.config.label_mlp_dim);
    c["parser"]["n_labels"] = std::to_string(model.config.n_labels);
    c["parser"]["dropout"] = fmt_double(model.config.dropout);
    c["parser"]["frozen"] = model.frozen ? "1" : "0";
    c["vocab"]["tokens"] = join_words(std::vector<std::string>(model.vocab.tokens.begin() + 2,
                                                               model.vocab.tokens.end()));
    c["deprels"]["names"] = join_words(model.deprels.names);
    write_file(path, checkpoint_bytes("parser", c, model.parameters(), seed, steps));
}

ParserModel load_parser_checkpoint(const std::string& path) {
    LoadedCheckpoint ck = read_checkpoint(path);
    if (ck.kind != "parser")
        throw FormatError("model kind mismatch in " + path + ": '" + ck.kind +
                          "' is not a parser checkpoint");
    ParserConfig cfg = parser_config_from(ck.config);
    Vocabulary vocab;
    for (const std::string& t : split_words(get_str(ck.config, "vocab", "tokens", "")))
        vocab.add(t);
    LabelInventory deprels;
    for (const std::string& n : split_words(get_str(ck.config, "deprels", "names", "")))
        deprels.add(n);
    ParserModel model = ParserModel::init(cfg, std::move(vocab), std::move(deprels), 0);
    fill_parameters(model.parameters(), ck.tensors, path);
    model.frozen = get_str(ck.config, "parser", "frozen", "0") == "1";
    return model;
}

void save_nli_checkpoint(const NLIModel& model, const std::string& path, uint64_t seed,
                         uint64_t steps) {
    ConfigMap c;
    c["model"]["arch"] = model.arch == NLIModel::Arch::DA ? "da" : "esim";
    c["model"]["fusion"] = fusion_name(model.fusion);
    c["model"]["embed_dim"] = std::to_string(model.embed_dim);
    c["model"]["d_swr"] = std::to_string(model.d_swr);
    c["model"]["fixed_noise_per_example"] = model.fixed_noise_per_example ? "1" : "0";
    c["model"]["noise_salt"] = std::to_string(model.noise_salt);
    std::vector<std::string> label_names;
    for (NLILabel l : model.label_set.labels) label_names.push_back(label_name(l));
    c["model"]["labels"] = join_words(label_names);
    if (model.arch == NLIModel::Arch::DA) {
        c["da"]["lr"] = fmt_double(model.da.lr);
        c["da"]["attend_hd"] = std::to_string(model.da.attend_hd);
        c["da"]["compare_hd"] = std::to_string(model.da.compare_hd);
        c["da"]["aggregate_hd"] = std::to_string(model.da.aggregate_hd);
        c["da"]["attend_dropout"] = fmt_double(model.da.attend_dropout);
        c["da"]["compare_dropout"] = fmt_double(model.da.compare_dropout);
        c["da"]["aggregate_dropout"] = fmt_double(model.da.aggregate_dropout);
    } else {
        c["esim"]["lr"] = fmt_double(model.esim.lr);
        c["esim"]["encoder_hidden"] = std::to_string(model.esim.encoder_hidden);
        c["esim"]["composition_hidden"] = std::to_string(model.esim.composition_hidden);
        c["esim"]["model_dropout"] = fmt_double(model.esim.model_dropout);
        c["esim"]["output_dropout"] = fmt_double(model.esim.output_dropout);
    }
    c["vocab"]["tokens"] = join_words(std::vector<std::string>(model.vocab.tokens.begin() + 2,
                                                               model.vocab.tokens.end()));
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.emplace_back("embedding", model.embedding);
    for (auto& nt : model.parameters()) tensors.push_back(nt);
    write_file(path, checkpoint_bytes("nli", c, tensors, seed, steps));
}

NLIModel load_nli_checkpoint(const std::string& path) {
    LoadedCheckpoint ck = read_checkpoint(path);
    if (ck.kind != "nli")
        throw FormatError("model kind mismatch in " + path + ": '" + ck.kind +
                          "' is not an NLI checkpoint");
    EmbeddingMatrix em;
    for (const std::string& t : split_words(get_str(ck.config, "vocab", "tokens", "")))
        em.vocab.add(t);
    em.dim = get_int(ck.config, "model", "embed_dim", 0);
    em.vectors = Tensor::zeros({em.vocab.size(), em.dim});
    LabelSet labels;
    for (const std::string& n : split_words(get_str(ck.config, "model", "labels", "")))
        labels.labels.push_back(parse_label(n));
    FusionMode fusion = parse_fusion(get_str(ck.config, "model", "fusion", "baseline"));
    int d_swr = get_int(ck.config, "model", "d_swr", 0);
    std::string arch = get_str(ck.config, "model", "arch", "da");
    NLIModel model;
    if (arch == "da")
        model = NLIModel::init_da(da_config_from(ck.config), fusion, labels, em, d_swr, 0);
    else if (arch == "esim")
        model = NLIModel::init_esim(esim_config_from(ck.config), fusion, labels, em, d_swr, 0);
    else
        throw FormatError("unknown architecture '" + arch + "' in " + path);
    model.fixed_noise_per_example =
        get_str(ck.config, "model", "fixed_noise_per_example", "0") == "1";
    model.noise_salt =
        static_cast<uint64_t>(std::stoull(get_str(ck.config, "model", "noise_salt", "0")));
    std::vector<std::pair<std::string, Tensor>> target;
    target.emplace_back("embedding", model.embedding);
    for (auto& nt : model.parameters()) target.push_back(nt);
    fill_parameters(target, ck.tensors, path);
    return model;
}

// ---- manifests, data dir ----

void write_manifest(const std::string& path, uint64_t seed, const std::string& config_text,
                    const std::vector<std::string>& input_paths) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << "seed = " << seed << '\n';
    out << "config_hash = " << std::hex << fnv1a(config_text) << std::dec << '\n';
    for (const std::string& in_path : input_paths) {
        std::ifstream in(in_path, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        out << "input " << in_path << " = " << std::hex << fnv1a(buf.str()) << std::dec << '\n';
    }
}

std::string data_dir() {
    const char* env = std::getenv("SYNLI_DATA_DIR");
    return env && *env ? env : ".";
}

std::string resolve_data_path(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    std::string dir = data_dir();
    if (dir == ".") return path;
    return dir + "/" + path;
}

}  // namespace synli
