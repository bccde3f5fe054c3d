#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lexcurate/chat.hpp"
#include "lexcurate/dedup.hpp"
#include "lexcurate/error.hpp"
#include "lexcurate/lm.hpp"
#include "lexcurate/mix.hpp"

namespace lexcurate::pipeline {

/// A stage failed after validation; `stage()` names it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Configuration document plus the directory its relative paths resolve against.
class Config {
public:
    /// Built-in defaults; relative paths resolve against `base_dir`.
    static Config defaults(std::filesystem::path base_dir = std::filesystem::current_path());
    static Config load(const std::filesystem::path& path);
    static Config from_json(std::string_view text, std::filesystem::path base_dir);

    /// Overrides one scalar by dotted key ("lm.order=3"). The key must already
    /// exist and hold a scalar. The value is parsed as JSON when the current
    /// value is not a string, otherwise taken verbatim. Throws ConfigError.
    void set(std::string_view key, std::string_view value);
    /// "key=value" form of set().
    void set_assignment(std::string_view assignment);

    /// SHA-256 of the canonical serialization (sorted keys, no whitespace).
    std::string hash() const;
    std::string dump() const { return json_.dump(2) + "\n"; }

    const nlohmann::json& json() const noexcept { return json_; }
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
    std::filesystem::path resolve(std::string_view relative) const;

private:
    nlohmann::json json_;
    std::filesystem::path base_dir_;
};

/// The defaults as JSON text, with paths relative to a data directory.
std::string default_config_json();

struct BackendSettings {
    std::string type = "stub";  ///< stub, label-stub or remote
    chat::RemoteConfig remote;
};

/// Typed, validated view of a Config.
struct Settings {
    std::uint64_t seed = 0;
    int workers = 0;
    bool strict = true;
    std::string tokenizer = "whitespace";

    std::filesystem::path input;
    std::filesystem::path seed_corpus;
    std::filesystem::path work_dir;
    std::optional<std::filesystem::path> rules;  ///< unset: built-in rules
    std::filesystem::path examples;
    std::filesystem::path templates;
    std::filesystem::path tasks;
    std::filesystem::path mmlu;

    bool normalize = true;
    std::size_t ngram_n = 10;
    std::size_t top_k = 50;

    lm::TrainOptions lm;
    double percentile = 99.0;
    lm::Granularity granularity = lm::Granularity::paragraph;
    bool heldout_calibration = true;
    std::size_t folds = 5;

    dedup::NearDedupParams dedup;

    mix::MixSpec mix;  ///< token_budget 0 means max_feasible_budget
    /// Mix source name to corpus path; "@pipeline" stands for the dedup output.
    std::map<std::string, std::string> mix_sources;

    std::size_t turn_pairs = 2;
    std::size_t instruct_concurrency = 4;
    BackendSettings instruct_backend;

    std::size_t eval_concurrency = 4;
    BackendSettings eval_backend;
    std::vector<std::string> ppl_categories;
};

/// Throws ConfigError on missing keys, wrong types or out-of-range values.
Settings parse_settings(const Config& config);

/// Fails with ConfigError unless the pipeline's inputs exist.
void validate_pipeline_paths(const Settings& s);

std::unique_ptr<chat::ChatBackend> make_backend(const BackendSettings& b);

struct StageStats {
    std::string stage;
    std::string output;  ///< file name of the main output
    std::uint64_t documents_in = 0;
    std::uint64_t documents_out = 0;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
    nlohmann::json extra = nlohmann::json::object();
    /// Secondary files written next to the main output (dropped units, cluster
    /// dumps, tables); the sidecar records their digests too.
    std::vector<std::filesystem::path> auxiliary;

    nlohmann::json to_json() const;
};

/// Writes `<output>.manifest.json` next to `output`: the stats, config hash,
/// seed and SHA-256 of the output and of every auxiliary file. No timestamps, so reruns are byte-identical.
void write_sidecar(const std::filesystem::path& output, const StageStats& stats, std::string_view config_hash,
                   std::uint64_t seed);

StageStats run_normalize(const std::filesystem::path& in, const std::filesystem::path& out, const Settings& s);
/// Applies the rules; documents left with no tokens are dropped.
StageStats run_filter_rules(const std::filesystem::path& in, const std::filesystem::path& out, const Settings& s);
StageStats run_mine_ngrams(const std::filesystem::path& in, const std::filesystem::path& out, const Settings& s);

/// Trains on the seed corpus, saves the model and calibrates the threshold
/// (extra["threshold"]).
StageStats run_train_lm(const std::filesystem::path& seed, const std::filesystem::path& model_out, const Settings& s);
StageStats run_filter_ppl(const std::filesystem::path& in, const std::filesystem::path& out,
                          const std::filesystem::path* dropped, const lm::NGramLM& model, double threshold,
                          const Settings& s);
StageStats run_dedup(const std::filesystem::path& in, const std::filesystem::path& out,
                     const std::filesystem::path& clusters, const Settings& s);
/// `sources` maps mix source names to corpus files. Writes the mix manifest
/// next to `out` as `<out>.mix.json`.
StageStats run_mix(const std::map<std::string, std::filesystem::path>& sources, const std::filesystem::path& out,
                   const Settings& s);

StageStats run_gen_instructions(const std::filesystem::path& examples, const std::filesystem::path& out,
                                const Settings& s);
/// Benchmark inputs are the instances of every task in `tasks_dir`.
StageStats run_decontaminate(const std::filesystem::path& conversations, const std::filesystem::path& tasks_dir,
                             const std::filesystem::path& out, const Settings& s);
/// Curates `original` (a few-shot prompt file) with `labels`; writes the curated text.
StageStats run_curate_prompt(const std::filesystem::path& original, const std::vector<std::string>& labels,
                             const std::filesystem::path& out);
/// Runs the task suite (and the MMLU files when `mmlu_dir` is non-empty);
/// writes the report JSON to `out`, the table to `<out>.txt` and the prediction
/// dump to `<out>.predictions.jsonl`.
StageStats run_eval(const std::filesystem::path& tasks_dir, const std::filesystem::path& mmlu_dir,
                    const std::filesystem::path& out, const Settings& s);
/// Per-category perplexity of `docs` under `model`, against `baseline` when given.
StageStats run_ppl_report(const std::filesystem::path& docs, const std::filesystem::path& model,
                          const std::filesystem::path* baseline, const std::filesystem::path& out, const Settings& s);

/// normalize, filter-rules, train-lm, filter-ppl, dedup and mix in order under
/// work_dir, then run_manifest.json (config hash, seed, per-stage counts).
/// Returns the run manifest. Stage failures raise StageError; outputs of
/// earlier stages stay in place.
nlohmann::json run_pipeline(const Config& config);

}  // namespace lexcurate::pipeline
