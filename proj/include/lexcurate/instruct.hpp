#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexcurate/chat.hpp"
#include "lexcurate/corpus.hpp"
#include "lexcurate/parallel.hpp"
#include "lexcurate/tokenizer.hpp"

namespace lexcurate::instruct {

/// A labeled legal example, e.g. a forum post and its topic.
struct LabeledExample {
    std::string id;
    std::string task_type;
    std::string input_text;
    std::string label;
    corpus::Metadata meta;

    bool operator==(const LabeledExample&) const = default;
};

/// One JSONL record: {"id", "task_type", "input", "label", "meta": {...}}.
LabeledExample parse_example(std::string_view line);
std::string serialize_example(const LabeledExample& ex);
std::vector<LabeledExample> read_examples(const std::filesystem::path& path);

enum class Status { ok, failed };

struct Conversation {
    std::string id;
    std::string origin;     ///< id of the example it was built from
    std::string generator;  ///< "template" for scaffolds, otherwise the extension backends
    std::vector<chat::Message> turns;
    Status status = Status::ok;
    std::string failure_reason;

    bool operator==(const Conversation&) const = default;
};

/// Roles alternate starting with the user and there are at least three turns.
bool well_formed(const Conversation& conv);

/// {"id", "origin", "generator", "status", "failure_reason"?, "turns": [{"role", "text"}]}
Conversation parse_conversation(std::string_view line);
std::string serialize_conversation(const Conversation& conv);
std::vector<Conversation> read_conversations(const std::filesystem::path& path);
void write_conversations(std::span<const Conversation> convs, const std::filesystem::path& path);

/// The three scaffold turns for one task type. Placeholders: {input}, {label},
/// {meta} (every metadata pair as "key: value", joined by "; ") and {meta.KEY}.
struct TaskTemplate {
    std::string request;    ///< user: the request built from the input text
    std::string answer;     ///< assistant: restates label and metadata; must contain {label} and {meta}
    std::string elaborate;  ///< user: asks for the reasoning

    bool operator==(const TaskTemplate&) const = default;
};

/// Template file: {"extra_turn_pairs": k, "tasks": {"<task_type>": {"request", "answer", "elaborate"}}}.
/// An extended conversation has 2 + 2k turns: the scaffold, then alternating
/// assistant/user completions ending on an assistant turn.
class TemplateSet {
public:
    TemplateSet() = default;

    void add(std::string task_type, TaskTemplate t);
    /// Throws ConfigError when no template covers `task_type`.
    const TaskTemplate& at(std::string_view task_type) const;
    bool contains(std::string_view task_type) const;

    std::size_t extra_turn_pairs() const noexcept { return extra_turn_pairs_; }
    void set_extra_turn_pairs(std::size_t k);

    static TemplateSet from_json(std::string_view text);
    static TemplateSet load(const std::filesystem::path& path);
    std::string to_json() const;

private:
    std::map<std::string, TaskTemplate, std::less<>> templates_;
    std::size_t extra_turn_pairs_ = 2;
};

/// Substitutes placeholders. Unknown placeholders and missing meta keys are ConfigErrors.
std::string render_template(std::string_view tmpl, const LabeledExample& ex);

/// Three template-rendered turns (user request, assistant answer, user
/// elaboration request); no model calls. Throws InvalidArgument for an empty
/// input or label and ConfigError for a missing template.
Conversation scaffold_conversation(const LabeledExample& ex, const TemplateSet& templates);

/// Appends 2k - 1 alternating assistant/user completions (k = extra_turn_pairs
/// >= 1), ending on an assistant turn. When a backend fails or returns blank
/// text the result keeps only the scaffold, with status failed and the
/// ChatError reason; rerunning on the scaffold retries it.
Conversation extend_conversation(const Conversation& conv, const chat::ChatBackend& user_backend,
                                 const chat::ChatBackend& assistant_backend, std::size_t extra_turn_pairs);

/// extend_conversation over many scaffolds with at most `concurrency` backend
/// calls in flight. Output order matches input order.
std::vector<Conversation> extend_all(std::span<const Conversation> convs, const chat::ChatBackend& user_backend,
                                     const chat::ChatBackend& assistant_backend, std::size_t extra_turn_pairs,
                                     std::size_t concurrency);

struct DecontaminationResult {
    std::vector<Conversation> kept;
    std::vector<std::string> removed_ids;
};

inline constexpr std::size_t kDecontaminationShingle = 8;

/// Removes every conversation with a turn sharing at least one `shingle_n`-token
/// window with a benchmark input. Both sides are NFKC-normalized before
/// tokenizing; a benchmark input shorter than `shingle_n` tokens cannot match.
DecontaminationResult decontaminate(std::span<const Conversation> convs, std::span<const std::string> benchmark_inputs,
                                    std::size_t shingle_n = kDecontaminationShingle,
                                    const Tokenizer& tok = whitespace_tokenizer(),
                                    Execution exec = Execution::parallel);

}  // namespace lexcurate::instruct
