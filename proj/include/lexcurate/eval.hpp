#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexcurate/chat.hpp"
#include "lexcurate/corpus.hpp"
#include "lexcurate/lm.hpp"
#include "lexcurate/tokenizer.hpp"

namespace lexcurate::eval {

/// The five LegalBench legal-reasoning abilities plus the MMLU legal subsets.
enum class Category { issue_spotting, rule_recall, interpretation, rhetoric_understanding, rule_conclusion, mmlu_legal };

std::string_view to_string(Category c) noexcept;
Category parse_category(std::string_view name);
std::span<const Category> all_categories() noexcept;

struct Instance {
    std::string input;
    std::string gold;

    bool operator==(const Instance&) const = default;
};

/// Input placeholder of curated templates.
inline constexpr std::string_view kInputPlaceholder = "{text}";

struct EvalTask {
    std::string name;
    Category category = Category::issue_spotting;
    std::vector<std::string> label_set;
    std::string prompt_template;  ///< contains kInputPlaceholder exactly once
    std::vector<Instance> instances;

    bool operator==(const EvalTask&) const = default;

    /// Throws FormatError unless instances are non-empty, labels are non-empty
    /// and unique, every gold label is in label_set and the template has exactly
    /// one placeholder.
    void validate() const;

    /// {"name", "category", "label_set", "prompt_template", "instances": [{"input", "gold"}]}
    static EvalTask from_json(std::string_view text);
    std::string to_json() const;
    static EvalTask load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Every *.json file in `dir`, sorted by task name.
std::vector<EvalTask> load_task_dir(const std::filesystem::path& dir);

/// `Answer by only outputting "A" or "B"`; three or more labels read `"A", "B" or "C"`.
std::string answer_instruction(std::span<const std::string> label_set);

/// Rewrites a few-shot prompt into a curated one. The prompt is read as
/// blank-line separated blocks: preamble blocks, few-shot blocks
/// (`Question: ...` with a filled `Answer: ...`), and the final question block
/// holding the input placeholder (`{{text}}` or `{text}`). The few-shot blocks
/// are dropped and the result is
///
///   <preamble>\n\nAnswer the following question: <final question>\n\n<answer_instruction>
///
/// A prompt without Question blocks keeps its text unchanged and only gains the
/// instruction. Throws FormatError when there is no placeholder, more than one,
/// or a block after the final question.
std::string curate_prompt(std::string_view original, std::span<const std::string> label_set);

/// Template with its placeholder replaced by `input`.
std::string render_prompt(std::string_view prompt_template, std::string_view input);

/// Earliest case-insensitive whole-word occurrence of any label; labels
/// matching at the same offset resolve to the longest. Case folding covers
/// ASCII letters; other bytes compare exactly. nullopt is ABSTAIN.
std::optional<std::string> parse_answer(std::string_view raw, std::span<const std::string> label_set);

/// Mean over gold classes of per-class recall; classes absent from `golds` do
/// not enter the mean and ABSTAIN (nullopt) is never correct. Throws
/// InvalidArgument on empty or mismatched input.
double balanced_accuracy(std::span<const std::optional<std::string>> preds, std::span<const std::string> golds);

struct PredictionRecord {
    std::string task;
    Category category = Category::issue_spotting;
    std::size_t index = 0;
    std::string gold;
    std::string raw_output;
    std::optional<std::string> parsed;  ///< nullopt is ABSTAIN
    std::string failure_reason;         ///< empty unless the backend failed

    bool operator==(const PredictionRecord&) const = default;
};

std::string serialize_prediction(const PredictionRecord& r);
PredictionRecord parse_prediction(std::string_view line);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

struct TaskScore {
    Category category = Category::issue_spotting;
    std::size_t instances = 0;
    std::size_t abstained = 0;
    double balanced_accuracy = 0.0;

    bool operator==(const TaskScore&) const = default;
};

struct EvalReport {
    std::map<std::string, TaskScore> tasks;
    std::map<std::string, double> categories;  ///< mean task score per category present
    double overall = 0.0;                      ///< mean over tasks
    double abstain_rate = 0.0;                 ///< over all instances

    bool operator==(const EvalReport&) const = default;

    std::string to_json() const;
    std::string to_table() const;
};

/// Aggregates a prediction dump; run_benchmark's report equals this applied to its own dump.
EvalReport score_predictions(std::span<const PredictionRecord> predictions);

struct BenchmarkOptions {
    std::size_t concurrency = 4;
    /// Seeds the order in which instances are dispatched; results do not depend on it.
    std::uint64_t seed = 0;
};

struct BenchmarkRun {
    EvalReport report;
    std::vector<PredictionRecord> predictions;  ///< sorted by (task, index)
};

/// Renders each instance with its task's template, queries `backend` as a
/// single user message, parses and scores. Backend failures become ABSTAIN
/// records carrying the failure reason.
BenchmarkRun run_benchmark(std::span<const EvalTask> tasks, const chat::ChatBackend& backend,
                           const BenchmarkOptions& options = {});

/// One MMLU CSV (question, A, B, C, D, answer letter; no header) as a task in
/// the mmlu_legal category with labels A-D.
EvalTask load_mmlu_csv(const std::filesystem::path& path, std::string name, std::string subject);

/// MMLU legal subsets: international_law, professional_law and jurisprudence,
/// read from `<subset>_test.csv` in `dir`.
std::vector<EvalTask> load_mmlu_legal(const std::filesystem::path& dir);

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF records.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Source of per-token natural-log probabilities.
class LogProbScorer {
public:
    virtual ~LogProbScorer() = default;
    virtual std::vector<double> token_log_probs(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

class NGramScorer final : public LogProbScorer {
public:
    NGramScorer(const lm::NGramLM& model, const Tokenizer& tok, std::string name = "ngram")
        : model_(model), tok_(tok), name_(std::move(name)) {}
    std::vector<double> token_log_probs(std::string_view text) const override {
        return model_.token_log_probs(text, tok_);
    }
    std::string name() const override { return name_; }

private:
    const lm::NGramLM& model_;
    const Tokenizer& tok_;
    std::string name_;
};

/// p = 1/V for every token.
class UniformScorer final : public LogProbScorer {
public:
    UniformScorer(double vocab_size, const Tokenizer& tok) : vocab_size_(vocab_size), tok_(tok) {}
    std::vector<double> token_log_probs(std::string_view text) const override;
    std::string name() const override { return "uniform"; }

private:
    double vocab_size_;
    const Tokenizer& tok_;
};

class RemoteScorer final : public LogProbScorer {
public:
    explicit RemoteScorer(chat::RemoteConfig config) : backend_(std::move(config)) {}
    std::vector<double> token_log_probs(std::string_view text) const override {
        return backend_.prompt_log_probs(text);
    }
    std::string name() const override { return backend_.name(); }

private:
    chat::RemoteChatBackend backend_;
};

/// exp of the mean negative log-probability. Throws InvalidArgument when the
/// scorer returns no tokens.
double document_perplexity(std::string_view text, const LogProbScorer& scorer);

/// (baseline - candidate) / baseline.
double relative_reduction(double baseline, double candidate);

struct CategoryPerplexity {
    std::size_t documents = 0;
    double median = 0.0;
    double iqr = 0.0;
    std::optional<double> baseline_median;
    std::optional<double> baseline_iqr;
    std::optional<double> reduction;  ///< relative_reduction(baseline_median, median)
};

struct PerplexityReport {
    std::string scorer;
    std::string baseline;  ///< empty without a baseline
    std::map<std::string, CategoryPerplexity> categories;

    std::string to_json() const;
    std::string to_table() const;
};

inline constexpr std::string_view kCategoryKey = "category";

/// Default document categories.
std::vector<std::string> default_ppl_categories();

/// Groups `docs` by meta[kCategoryKey] and reports, for each of `categories`,
/// the median and interquartile range of per-document perplexity under
/// `scorer`, plus the baseline figures and the relative median reduction when
/// `baseline` is given. Documents of other categories are ignored. Throws
/// InvalidArgument when a listed category has no documents.
PerplexityReport perplexity_report(std::span<const corpus::Document> docs, std::span<const std::string> categories,
                                   const LogProbScorer& scorer, const LogProbScorer* baseline = nullptr);

/// Same report from precomputed per-document perplexities keyed by category.
PerplexityReport perplexity_report_from_values(const std::map<std::string, std::vector<double>>& scorer_values,
                                               const std::map<std::string, std::vector<double>>* baseline_values,
                                               std::string scorer_name, std::string baseline_name = {});

}  // namespace lexcurate::eval
