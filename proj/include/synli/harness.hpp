#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synli/nli.hpp"
#include "synli/parser.hpp"

namespace synli {

// ---- configuration files ----

// Sections of key=value pairs; '#' starts a comment. Ordered maps keep the
// serialized form canonical.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

ConfigMap parse_ini(const std::string& text);
std::string write_ini(const ConfigMap& config);
ConfigMap load_config_file(const std::string& path);

DAConfig da_config_from(const ConfigMap& config);
ESIMConfig esim_config_from(const ConfigMap& config);
ParserConfig parser_config_from(const ConfigMap& config);

// ---- SWR cache ----

// Memoizes extract_swrs per token-id sequence; extraction is a pure function
// of (frozen parameters, ids).
class SwrCache {
public:
    explicit SwrCache(const ParserModel& frozen) : parser_(&frozen) {}
    SwrPair get(const NLIExample& example);
    Tensor get_sentence(const TokenSequence& sentence);

private:
    const ParserModel* parser_;
    std::map<std::vector<int>, Tensor> cache_;
};

// ---- training ----

struct TrainOptions {
    double lr = 3e-4;
    int epochs = 75;
    int batch_size = 32;
    int patience = 10;
    uint64_t seed = 1;
};

struct EpochStats {
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_dev_accuracy = 0.0;
};

// Cross-entropy training with per-epoch dev evaluation; keeps the best-dev
// parameters and stops after `patience` non-improving epochs.
TrainHistory train_nli(NLIModel& model, const std::vector<NLIExample>& train,
                       const std::vector<NLIExample>& dev, const ParserModel* frozen_parser,
                       const TrainOptions& options);

double evaluate_accuracy(const NLIModel& model, const std::vector<NLIExample>& split,
                         const ParserModel* frozen_parser, Rng* noise_rng);

// ---- random hyperparameter search ----

struct HyperparamField {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    bool log_uniform = false;
    bool integer = false;
};

struct HyperparamSpace {
    std::vector<HyperparamField> fields;
    static HyperparamSpace da_space();
    static HyperparamSpace esim_space();
};

double sample_field(const HyperparamField& field, Rng& rng);
std::map<std::string, double> sample_space(const HyperparamSpace& space, Rng& rng);

struct Trial {
    std::map<std::string, double> config;
    uint64_t seed = 0;
    double dev_accuracy = -1.0;
    double test_accuracy = -1.0;  // filled only for the selected best trial
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;
};

struct SearchResult {
    Trial best;
    std::vector<Trial> trials;
};

struct SearchTask {
    NLIModel::Arch arch = NLIModel::Arch::DA;
    FusionMode fusion = FusionMode::Baseline;
    LabelSet label_set;
    const EmbeddingMatrix* embeddings = nullptr;
    const ParserModel* frozen_parser = nullptr;  // required for SWR/noise modes
    const std::vector<NLIExample>* train = nullptr;
    const std::vector<NLIExample>* dev = nullptr;
    TrainOptions options;
};

// k independent samples, each trained and scored on dev; selection never
// looks at test.
SearchResult random_search(const HyperparamSpace& space, int k, const SearchTask& task,
                           uint64_t seed);

// ---- ablation suite ----

struct EvalReport {
    std::string model_name;
    FusionMode fusion = FusionMode::Baseline;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
    double delta_vs_baseline = 0.0;  // test accuracy, recomputed difference
};

struct AblationResult {
    std::vector<EvalReport> reports;  // Baseline, +LF, +SA, +LF_N, +SA_N
    std::string tsv() const;
    std::string text() const;
};

struct AblationTask {
    NLIModel::Arch arch = NLIModel::Arch::DA;
    DAConfig da;
    ESIMConfig esim;
    LabelSet label_set;
    const EmbeddingMatrix* embeddings = nullptr;
    const ParserModel* frozen_parser = nullptr;
    const std::vector<NLIExample>* train = nullptr;
    const std::vector<NLIExample>* dev = nullptr;
    const std::vector<NLIExample>* test = nullptr;
    TrainOptions options;
};

AblationResult ablation_suite(const AblationTask& task, uint64_t seed);

// ---- checkpoints ----

constexpr uint32_t kCheckpointVersion = 1;

void save_parser_checkpoint(const ParserModel& model, const std::string& path,
                            uint64_t seed = 0, uint64_t steps = 0);
ParserModel load_parser_checkpoint(const std::string& path);

void save_nli_checkpoint(const NLIModel& model, const std::string& path, uint64_t seed = 0,
                         uint64_t steps = 0);
NLIModel load_nli_checkpoint(const std::string& path);

// Serialized parser parameter bytes, for freezing checks.
std::string serialize_parameters(const std::vector<std::pair<std::string, Tensor>>& params);

// ---- run manifests ----

void write_manifest(const std::string& path, uint64_t seed, const std::string& config_text,
                    const std::vector<std::string>& input_paths);

// Default data directory: $SYNLI_DATA_DIR when set, else ".".
std::string data_dir();
std::string resolve_data_path(const std::string& path);

// ---- CLI ----

int run_cli(int argc, const char* const* argv);

}  // namespace synli
